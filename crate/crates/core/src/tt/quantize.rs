use serde::{Deserialize, Serialize};

use super::LatentIndex;
use crate::error::{Error, Result};

/// Splits every mode of size `q^k` into `k` modes of size `q`.
///
/// Digits are expanded big-endian: the first quantized digit of a mode is the
/// most significant one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationMap {
    base_shape: Vec<usize>,
    factor: usize,
    digits_per_mode: Vec<usize>,
}

impl QuantizationMap {
    pub fn new(base_shape: &[usize], factor: usize) -> Result<Self> {
        if factor < 2 {
            return Err(Error::input("quantization factor must be at least 2"));
        }
        let digits_per_mode = base_shape
            .iter()
            .map(|&n| {
                let mut k = 0;
                let mut p = 1usize;
                while p < n {
                    p = p.checked_mul(factor).ok_or_else(|| Error::input("mode size overflow"))?;
                    k += 1;
                }
                if p != n || k == 0 {
                    return Err(Error::input(format!("mode size {n} is not a power of {factor}")));
                }
                Ok(k)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuantizationMap { base_shape: base_shape.to_vec(), factor, digits_per_mode })
    }

    pub fn base_shape(&self) -> &[usize] {
        &self.base_shape
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn digits_per_mode(&self) -> &[usize] {
        &self.digits_per_mode
    }

    pub fn quantized_shape(&self) -> Vec<usize> {
        vec![self.factor; self.digits_per_mode.iter().sum()]
    }

    pub fn quantize(&self, index: &LatentIndex) -> Result<LatentIndex> {
        index.validate(&self.base_shape)?;
        let mut out = Vec::with_capacity(self.digits_per_mode.iter().sum());
        for (&digit, &k) in index.digits().iter().zip(&self.digits_per_mode) {
            let start = out.len();
            let mut rest = digit;
            for _ in 0..k {
                out.push(rest % self.factor);
                rest /= self.factor;
            }
            out[start..].reverse();
        }
        Ok(LatentIndex(out))
    }

    pub fn dequantize(&self, qindex: &LatentIndex) -> Result<LatentIndex> {
        qindex.validate(&self.quantized_shape())?;
        let mut digits = qindex.digits().iter();
        let out = self
            .digits_per_mode
            .iter()
            .map(|&k| digits.by_ref().take(k).fold(0, |acc, &q| acc * self.factor + q))
            .collect();
        Ok(LatentIndex(out))
    }
}
