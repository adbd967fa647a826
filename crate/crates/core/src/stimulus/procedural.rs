//! Parametric grating and blob images.
//!
//! Latent coordinates are read in a fixed order (see [`FACTORS`]); a grid
//! with fewer dimensions leaves the remaining factors at their neutral
//! values, and coordinates past the last factor are ignored.
//!
//! ```text
//! pixel = clamp(lum + contrast/2 * sin(2 pi f (u cos t + v sin t) + phase)
//!               + blob(x, y) + tint[c], 0, 1)
//! ```
//!
//! with `(u, v)` the pixel offset from the canvas centre. Orientation digit
//! `k` gives angle `t = k pi / n`, so digit 0 is a vertical grating (stripes
//! vary along x) and the digits split the half turn evenly. Contrast,
//! luminance, blob amplitude and tint are "centred" factors: the grid points
//! nearest the origin map to exactly zero even when `n` is even, so the
//! centre index decodes to a uniform mid-grey canvas.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Canvas, Generator, LatentGrid, Stimulus};
use crate::error::Result;
use crate::tt::LatentIndex;

/// Latent factor names in coordinate order. Coordinates from position
/// `FACTORS.len()` onward add a per-channel tint, one per channel.
pub const FACTORS: [&str; 9] = [
    "orientation",
    "frequency",
    "phase",
    "contrast",
    "luminance",
    "blob_amplitude",
    "blob_x",
    "blob_y",
    "blob_size",
];

/// Resolved image parameters for one index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    /// Radians in `[0, pi)`.
    pub orientation: f64,
    /// Cycles per pixel.
    pub frequency: f64,
    pub phase: f64,
    /// Signed; negative inverts the grating.
    pub contrast: f64,
    pub luminance: f64,
    pub blob_amplitude: f64,
    /// Blob centre in pixel units.
    pub blob_x: f64,
    pub blob_y: f64,
    pub blob_sigma: f64,
    pub tint: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Procedural {
    grid: LatentGrid,
    canvas: Canvas,
}

impl Procedural {
    pub fn new(grid: LatentGrid, canvas: Canvas) -> Result<Self> {
        grid.validate()?;
        canvas.validate()?;
        Ok(Procedural { grid, canvas })
    }

    /// Maps a coordinate to a factor that is exactly zero at the grid
    /// points nearest the origin and still reaches +-1 at the ends.
    fn centred(&self, c: f64) -> f64 {
        let n = self.grid.points;
        if n % 2 == 1 || n == 2 {
            return c;
        }
        let dead = 1.0 / (n - 1) as f64;
        c.signum() * ((c.abs() - dead).max(0.0) / (1.0 - dead))
    }

    pub fn factors(&self, index: &LatentIndex) -> Result<Factors> {
        let c = self.grid.coordinates(index)?;
        let at = |i: usize| c.get(i).copied();
        let n = self.grid.points as f64;
        let Canvas { height, width, channels } = self.canvas;
        let side = height.max(width) as f64;
        let unit = |v: f64| (v + 1.0) / 2.0;

        let f_lo = (1.0 / side).min(0.25);
        Ok(Factors {
            orientation: at(0).map_or(0.0, |v| PI * unit(v) * (n - 1.0) / n),
            frequency: at(1).map_or((f_lo + 0.25) / 2.0, |v| f_lo + (0.25 - f_lo) * unit(v)),
            phase: at(2).map_or(0.0, |v| PI * v),
            contrast: at(3).map_or(1.0, |v| self.centred(v)),
            luminance: 0.5 + 0.25 * at(4).map_or(0.0, |v| self.centred(v)),
            blob_amplitude: 0.5 * at(5).map_or(0.0, |v| self.centred(v)),
            blob_x: unit(at(6).unwrap_or(0.0)) * (width - 1) as f64,
            blob_y: unit(at(7).unwrap_or(0.0)) * (height - 1) as f64,
            blob_sigma: side * (0.08 + 0.12 * unit(at(8).unwrap_or(0.0))),
            tint: (0..channels).map(|ch| 0.25 * at(FACTORS.len() + ch).map_or(0.0, |v| self.centred(v))).collect(),
        })
    }

    pub fn render(&self, f: &Factors) -> Vec<f32> {
        let Canvas { height, width, channels } = self.canvas;
        let (cy, cx) = ((height - 1) as f64 / 2.0, (width - 1) as f64 / 2.0);
        let (sin_t, cos_t) = f.orientation.sin_cos();
        let k = 2.0 * PI * f.frequency;
        let two_var = 2.0 * f.blob_sigma * f.blob_sigma;
        let mut px = Vec::with_capacity(self.canvas.len());
        for y in 0..height {
            for x in 0..width {
                let (u, v) = (x as f64 - cx, y as f64 - cy);
                let grating = 0.5 * f.contrast * (k * (u * cos_t + v * sin_t) + f.phase).sin();
                let (dx, dy) = (x as f64 - f.blob_x, y as f64 - f.blob_y);
                let blob = f.blob_amplitude * (-(dx * dx + dy * dy) / two_var).exp();
                let base = f.luminance + grating + blob;
                for tint in &f.tint[..channels] {
                    px.push((base + tint).clamp(0.0, 1.0) as f32);
                }
            }
        }
        px
    }
}

impl Generator for Procedural {
    fn id(&self) -> &str {
        "procedural"
    }

    fn grid(&self) -> LatentGrid {
        self.grid
    }

    fn canvas(&self) -> Canvas {
        self.canvas
    }

    fn decode(&self, index: &LatentIndex) -> Result<Stimulus> {
        let f = self.factors(index)?;
        Ok(Stimulus { canvas: self.canvas, pixels: self.render(&f), index: index.clone(), generator: "procedural".into() })
    }

    fn concurrent(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(d: usize, n: usize, side: usize, ch: usize) -> Procedural {
        Procedural::new(LatentGrid::new(d, n).unwrap(), Canvas::new(side, side, ch).unwrap()).unwrap()
    }

    #[test]
    fn centre_index_is_flat_grey() {
        for (d, n) in [(8, 16), (4, 8), (12, 5), (3, 2)] {
            let g = gen(d, n, 8, 3);
            let mut idx = g.grid.centre();
            if n == 2 {
                // No zero-contrast point on a two-point grid.
                continue;
            }
            let s = g.decode(&idx).unwrap();
            assert!(s.pixels.iter().all(|&p| p == 0.5), "d={d} n={n}");
            idx.0[0] = 0;
            assert!(g.decode(&idx).unwrap().pixels.iter().all(|&p| p == 0.5));
        }
    }

    #[test]
    fn digit_zero_is_vertical() {
        let g = gen(4, 8, 8, 1);
        let s = g.decode(&LatentIndex(vec![0, 3, 0, 7])).unwrap();
        for x in 0..8 {
            let col: Vec<f32> = (0..8).map(|y| s.pixel(y, x, 0)).collect();
            assert!(col.iter().all(|&v| v == col[0]));
        }
        assert!((0..8).any(|x| s.pixel(0, x, 0) != s.pixel(0, 0, 0)));
        // Digit n/2 turns it horizontal.
        let h = g.decode(&LatentIndex(vec![4, 3, 0, 7])).unwrap();
        for y in 0..8 {
            let row: Vec<f32> = (0..8).map(|x| h.pixel(y, x, 0)).collect();
            assert!(row.iter().all(|&v| (v - row[0]).abs() < 1e-6));
        }
    }

    #[test]
    fn tint_moves_single_channels() {
        let g = gen(12, 5, 4, 3);
        let mut idx = g.grid.centre();
        idx.0[FACTORS.len() + 1] = 4;
        let s = g.decode(&idx).unwrap();
        assert!(s.pixels.chunks(3).all(|p| p == [0.5, 0.75, 0.5]));
    }

    #[test]
    fn invalid_index_is_rejected() {
        let g = gen(4, 8, 8, 1);
        assert!(g.decode(&LatentIndex(vec![0, 0, 0])).is_err());
        assert!(g.decode(&LatentIndex(vec![0, 0, 0, 8])).is_err());
    }
}
