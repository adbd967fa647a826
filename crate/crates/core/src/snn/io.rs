//! Binary network checkpoints (`epoch_<n>.net`).
//!
//! All integers are little-endian `u32`, all reals little-endian `f64`:
//!
//! ```text
//! magic    4 bytes  "SNET"
//! version  u32      1
//! exposure u32
//! alpha    f64
//! input    3 x u32  channels, height, width
//! layers   u32      count
//! per layer:
//!   kind   u32      0 = dense, 1 = conv
//!   beta   f64
//!   u_thr  f64
//!   dense: outputs u32, inputs u32
//!   conv:  in_channels, out_channels, height, width, kernel (u32 each)
//!   weights         f64 x len, row-major (dense [out][in], conv [out][in][ky][kx])
//! ```

use std::io::{Read, Write};

use super::{ConvGeometry, Layer, SpikingNetwork, Synapses};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SNET";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("value {v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("network checkpoint is truncated".into())
    } else {
        Error::Io(e)
    }
}

pub fn write_network<W: Write>(net: &SpikingNetwork, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, NETWORK_FORMAT_VERSION as usize)?;
    put_u32(&mut w, net.exposure)?;
    put_f64(&mut w, net.alpha)?;
    for &d in &net.input_shape {
        put_u32(&mut w, d)?;
    }
    put_u32(&mut w, net.layers.len())?;
    for layer in &net.layers {
        match &layer.synapses {
            Synapses::Dense { outputs, inputs, .. } => {
                put_u32(&mut w, 0)?;
                put_f64(&mut w, layer.beta)?;
                put_f64(&mut w, layer.u_thr)?;
                put_u32(&mut w, *outputs)?;
                put_u32(&mut w, *inputs)?;
            }
            Synapses::Conv { geometry: g, .. } => {
                put_u32(&mut w, 1)?;
                put_f64(&mut w, layer.beta)?;
                put_f64(&mut w, layer.u_thr)?;
                for d in [g.in_channels, g.out_channels, g.height, g.width, g.kernel] {
                    put_u32(&mut w, d)?;
                }
            }
        }
        for &v in layer.synapses.weights() {
            put_f64(&mut w, v)?;
        }
    }
    Ok(())
}

/// Upper bound on the weights accepted per layer, so a corrupt header cannot
/// trigger a huge allocation.
const MAX_WEIGHTS: usize = 1 << 28;

fn get_weights<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    if len > MAX_WEIGHTS {
        return Err(Error::Format(format!("layer declares {len} weights")));
    }
    (0..len).map(|_| get_f64(r)).collect()
}

pub fn read_network<R: Read>(mut r: R) -> Result<SpikingNetwork> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a network checkpoint".into()));
    }
    let version = get_u32(&mut r)?;
    if version != NETWORK_FORMAT_VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let exposure = get_u32(&mut r)?;
    let alpha = get_f64(&mut r)?;
    let input_shape = [get_u32(&mut r)?, get_u32(&mut r)?, get_u32(&mut r)?];
    let count = get_u32(&mut r)?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let kind = get_u32(&mut r)?;
        let beta = get_f64(&mut r)?;
        let u_thr = get_f64(&mut r)?;
        let synapses = match kind {
            0 => {
                let outputs = get_u32(&mut r)?;
                let inputs = get_u32(&mut r)?;
                let weights = get_weights(&mut r, outputs.saturating_mul(inputs))?;
                Synapses::dense(outputs, inputs, weights)?
            }
            1 => {
                let g = ConvGeometry {
                    in_channels: get_u32(&mut r)?,
                    out_channels: get_u32(&mut r)?,
                    height: get_u32(&mut r)?,
                    width: get_u32(&mut r)?,
                    kernel: get_u32(&mut r)?,
                };
                let len = g
                    .out_channels
                    .saturating_mul(g.in_channels)
                    .saturating_mul(g.kernel)
                    .saturating_mul(g.kernel);
                let weights = get_weights(&mut r, len)?;
                Synapses::conv(g, weights)?
            }
            other => return Err(Error::Format(format!("unknown layer kind {other}"))),
        };
        layers.push(Layer::new(synapses, beta, u_thr)?);
    }
    SpikingNetwork::new(input_shape, layers, exposure, alpha)
        .map_err(|e| Error::Format(format!("checkpoint describes an invalid network: {e}")))
}
