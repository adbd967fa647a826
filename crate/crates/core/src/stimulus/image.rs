//! Image files.
//!
//! Snapshots are binary PPM (`P6`, maxval 255). Grey images are written with
//! the value repeated on all three channels; other channel counts besides 1
//! and 3 have no PPM form. Each 8-bit value is `round(p * 255)`.
//!
//! The raw sidecar keeps the exact pixels. Little-endian throughout:
//!
//! ```text
//! magic    4 bytes  "MSTM"
//! version  u32      1
//! height   u32
//! width    u32
//! channels u32
//! pixels   f32 x height*width*channels, row-major, channel-last
//! ```

use std::io::{Read, Write};

use super::Canvas;
use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"MSTM";
const RAW_VERSION: u32 = 1;

fn to_byte(p: f32) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ppm<W: Write>(canvas: Canvas, pixels: &[f32], mut w: W) -> Result<()> {
    if pixels.len() != canvas.len() {
        return Err(Error::input("pixel count does not match the canvas"));
    }
    write!(w, "P6\n{} {}\n255\n", canvas.width, canvas.height)?;
    let bytes: Vec<u8> = match canvas.channels {
        1 => pixels.iter().flat_map(|&p| [to_byte(p); 3]).collect(),
        3 => pixels.iter().map(|&p| to_byte(p)).collect(),
        c => return Err(Error::input(format!("cannot write a {c}-channel image as PPM"))),
    };
    w.write_all(&bytes)?;
    Ok(())
}

pub fn write_raw<W: Write>(canvas: Canvas, pixels: &[f32], mut w: W) -> Result<()> {
    if pixels.len() != canvas.len() {
        return Err(Error::input("pixel count does not match the canvas"));
    }
    w.write_all(RAW_MAGIC)?;
    for v in [RAW_VERSION as usize, canvas.height, canvas.width, canvas.channels] {
        let v = u32::try_from(v).map_err(|_| Error::input("canvas too large"))?;
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(pixels.len() * 4);
    for p in pixels {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_raw<R: Read>(mut r: R) -> Result<(Canvas, Vec<f32>)> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < 20 || &data[..4] != RAW_MAGIC {
        return Err(Error::Format("not a raw image sidecar".into()));
    }
    let word = |i: usize| u32::from_le_bytes(data[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    if word(0) != RAW_VERSION as usize {
        return Err(Error::Format(format!("unsupported sidecar version {}", word(0))));
    }
    let canvas = Canvas { height: word(1), width: word(2), channels: word(3) };
    canvas.validate().map_err(|e| Error::Format(e.to_string()))?;
    let body = &data[20..];
    if canvas.len().checked_mul(4) != Some(body.len()) {
        return Err(Error::Format("sidecar length does not match its header".into()));
    }
    let pixels = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    Ok((canvas, pixels))
}
