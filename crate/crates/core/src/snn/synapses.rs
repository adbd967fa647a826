//! Weighted connections feeding a spiking layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a stride-1 convolution with zero "same" padding. Inputs and
/// outputs are laid out channel-major (`[channel][row][col]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    /// Odd kernel side length.
    pub kernel: usize,
}

impl ConvGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::input("convolution dimensions must be positive"));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::input(format!("kernel size {} must be odd", self.kernel)));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn outputs(&self) -> usize {
        self.out_channels * self.height * self.width
    }

    pub fn num_weights(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    /// Calls `f(out_pos, in_pos, weight_pos)` for every tap that lands inside
    /// the input.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (h, w, k) = (self.height as isize, self.width as isize, self.kernel as isize);
        let half = k / 2;
        for o in 0..self.out_channels {
            for c in 0..self.in_channels {
                let wbase = (o * self.in_channels + c) * self.kernel * self.kernel;
                for ky in 0..k {
                    for kx in 0..k {
                        let wi = wbase + (ky * k + kx) as usize;
                        for y in 0..h {
                            let iy = y + ky - half;
                            if iy < 0 || iy >= h {
                                continue;
                            }
                            for x in 0..w {
                                let ix = x + kx - half;
                                if ix < 0 || ix >= w {
                                    continue;
                                }
                                let out = (o * self.height + y as usize) * self.width + x as usize;
                                let inp = (c * self.height + iy as usize) * self.width + ix as usize;
                                f(out, inp, wi);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Synapses {
    /// `outputs x inputs` matrix, row-major.
    Dense { outputs: usize, inputs: usize, weights: Vec<f64> },
    /// Weights laid out `[out][in][ky][kx]`.
    Conv { geometry: ConvGeometry, weights: Vec<f64> },
}

impl Synapses {
    pub fn dense(outputs: usize, inputs: usize, weights: Vec<f64>) -> Result<Self> {
        if outputs == 0 || inputs == 0 {
            return Err(Error::input("dense layer needs at least one input and one output"));
        }
        if weights.len() != outputs * inputs {
            return Err(Error::input(format!(
                "dense weights hold {} values, expected {outputs} x {inputs}",
                weights.len()
            )));
        }
        check_finite(&weights)?;
        Ok(Synapses::Dense { outputs, inputs, weights })
    }

    pub fn conv(geometry: ConvGeometry, weights: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if weights.len() != geometry.num_weights() {
            return Err(Error::input(format!(
                "conv weights hold {} values, expected {}",
                weights.len(),
                geometry.num_weights()
            )));
        }
        check_finite(&weights)?;
        Ok(Synapses::Conv { geometry, weights })
    }

    pub fn inputs(&self) -> usize {
        match self {
            Synapses::Dense { inputs, .. } => *inputs,
            Synapses::Conv { geometry, .. } => geometry.inputs(),
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Synapses::Dense { outputs, .. } => *outputs,
            Synapses::Conv { geometry, .. } => geometry.outputs(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Synapses::Dense { weights, .. } | Synapses::Conv { weights, .. } => weights,
        }
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        match self {
            Synapses::Dense { weights, .. } | Synapses::Conv { weights, .. } => weights,
        }
    }

    /// `out = W x`.
    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            Synapses::Dense { inputs, weights, .. } => {
                for (o, row) in out.iter_mut().zip(weights.chunks_exact(*inputs)) {
                    *o = row.iter().zip(x).map(|(w, v)| w * v).sum();
                }
            }
            Synapses::Conv { geometry, weights } => {
                geometry.for_each_tap(|o, i, w| out[o] += weights[w] * x[i]);
            }
        }
    }

    /// `out += W^T g`.
    pub(crate) fn apply_transpose(&self, g: &[f64], out: &mut [f64]) {
        match self {
            Synapses::Dense { inputs, weights, .. } => {
                for (&go, row) in g.iter().zip(weights.chunks_exact(*inputs)) {
                    if go == 0.0 {
                        continue;
                    }
                    for (o, w) in out.iter_mut().zip(row) {
                        *o += go * w;
                    }
                }
            }
            Synapses::Conv { geometry, weights } => {
                geometry.for_each_tap(|o, i, w| out[i] += weights[w] * g[o]);
            }
        }
    }

    /// `grad += d(g . W x) / dW`.
    pub(crate) fn accumulate_grad(&self, g: &[f64], x: &[f64], grad: &mut [f64]) {
        match self {
            Synapses::Dense { inputs, .. } => {
                for (&go, row) in g.iter().zip(grad.chunks_exact_mut(*inputs)) {
                    if go == 0.0 {
                        continue;
                    }
                    for (r, v) in row.iter_mut().zip(x) {
                        *r += go * v;
                    }
                }
            }
            Synapses::Conv { geometry, .. } => {
                geometry.for_each_tap(|o, i, w| grad[w] += g[o] * x[i]);
            }
        }
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().any(|w| !w.is_finite()) {
        return Err(Error::input("weights must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_matches_direct_sum() {
        let g = ConvGeometry { in_channels: 2, out_channels: 1, height: 3, width: 3, kernel: 3 };
        let weights: Vec<f64> = (0..18).map(|v| v as f64 * 0.1).collect();
        let s = Synapses::conv(g, weights.clone()).unwrap();
        let x: Vec<f64> = (0..18).map(|v| (v % 5) as f64).collect();
        let mut out = vec![0.0; 9];
        s.apply(&x, &mut out);
        // Centre output sees every tap.
        let centre: f64 = (0..2)
            .flat_map(|c| (0..3).flat_map(move |ky| (0..3).map(move |kx| (c, ky, kx))))
            .map(|(c, ky, kx)| weights[c * 9 + ky * 3 + kx] * x[c * 9 + ky * 3 + kx])
            .sum();
        assert!((out[4] - centre).abs() < 1e-12);
        // Corner output (0,0) sees taps ky,kx in 1..3 only.
        let corner: f64 = (0..2)
            .flat_map(|c| (1..3).flat_map(move |ky| (1..3).map(move |kx| (c, ky, kx))))
            .map(|(c, ky, kx)| weights[c * 9 + ky * 3 + kx] * x[c * 9 + (ky - 1) * 3 + (kx - 1)])
            .sum();
        assert!((out[0] - corner).abs() < 1e-12);
    }

    #[test]
    fn transpose_is_adjoint() {
        let g = ConvGeometry { in_channels: 2, out_channels: 3, height: 4, width: 5, kernel: 3 };
        let weights: Vec<f64> = (0..g.num_weights()).map(|v| ((v * 7) % 11) as f64 - 5.0).collect();
        for s in [Synapses::conv(g, weights).unwrap(), Synapses::dense(3, 4, (0..12).map(f64::from).collect()).unwrap()] {
            let x: Vec<f64> = (0..s.inputs()).map(|v| ((v * 3) % 7) as f64).collect();
            let y: Vec<f64> = (0..s.outputs()).map(|v| ((v * 5) % 9) as f64 - 4.0).collect();
            let mut wx = vec![0.0; s.outputs()];
            s.apply(&x, &mut wx);
            let mut wty = vec![0.0; s.inputs()];
            s.apply_transpose(&y, &mut wty);
            let lhs: f64 = wx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = wty.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Synapses::dense(2, 2, vec![0.0; 3]).is_err());
        assert!(Synapses::dense(2, 2, vec![0.0, 0.0, f64::NAN, 0.0]).is_err());
        let g = ConvGeometry { in_channels: 1, out_channels: 1, height: 3, width: 3, kernel: 2 };
        assert!(Synapses::conv(g, vec![0.0; 4]).is_err());
    }
}
