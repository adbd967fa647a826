//! Binary checkpoint format for a [`TensorTrain`].
//!
//! All integers are unsigned 64-bit little-endian, all values IEEE-754
//! binary64 little-endian:
//!
//! ```text
//! d                       u64
//! n_1 .. n_d              d x u64
//! r_0 .. r_d              (d + 1) x u64, r_0 = r_d = 1
//! core_1 .. core_d        f64, each core row-major over (r_{i-1}, n_i, r_i)
//! ```

use std::io::{Read, Write};

use super::{Core, TensorTrain};
use crate::error::{Error, Result};

const MAX_DIM: u64 = 1 << 20;

pub fn write_tt<W: Write>(tt: &TensorTrain, mut w: W) -> Result<()> {
    w.write_all(&(tt.dim() as u64).to_le_bytes())?;
    for n in tt.shape() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for r in tt.ranks() {
        w.write_all(&(r as u64).to_le_bytes())?;
    }
    for core in tt.cores() {
        for v in core.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_tt<R: Read>(mut r: R) -> Result<TensorTrain> {
    let d = read_u64(&mut r)?;
    if d == 0 || d > MAX_DIM {
        return Err(Error::Format(format!("implausible tensor-train dimension {d}")));
    }
    let d = d as usize;
    let shape = (0..d).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let ranks = (0..=d).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mut cores = Vec::with_capacity(d);
    for i in 0..d {
        let len = ranks[i]
            .checked_mul(shape[i])
            .and_then(|x| x.checked_mul(ranks[i + 1]))
            .filter(|&l| l > 0 && l < (1 << 32))
            .ok_or_else(|| Error::Format(format!("implausible size for core {i}")))?;
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        cores.push(Core::new(ranks[i], shape[i], ranks[i + 1], data).map_err(|e| Error::Format(e.to_string()))?);
    }
    TensorTrain::from_cores(cores).map_err(|e| Error::Format(e.to_string()))
}
