//! Latent grids and the generators that turn grid points into images.
//!
//! A [`Generator`] maps a [`LatentIndex`] on a [`LatentGrid`] to a
//! [`Stimulus`]: an `H x W x C` image (channel-last) with pixels in `[0, 1]`.
//! Two generators ship with the crate: the in-process [`Procedural`] grating
//! and blob synthesizer, and [`ExternalGenerator`], which drives a child
//! process over a line-based JSON protocol.

mod external;
mod image;
mod procedural;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tt::LatentIndex;

pub use external::{conformance_check, ConformanceReport, ExternalGenerator, DEFAULT_TIMEOUT};
pub use image::{read_raw, write_ppm, write_raw, RAW_MAGIC};
pub use procedural::{Procedural, FACTORS};

/// `d` latent coordinates, each sampled at `n` evenly spaced points of
/// `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentGrid {
    pub dim: usize,
    pub points: usize,
}

impl LatentGrid {
    pub fn new(dim: usize, points: usize) -> Result<Self> {
        let g = LatentGrid { dim, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::input("latent grid needs at least one dimension"));
        }
        if self.points < 2 {
            return Err(Error::input("latent grid needs at least two points per dimension"));
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.dim]
    }

    /// Coordinate of digit `k`: `2k/(n-1) - 1`.
    pub fn coordinate(&self, k: usize) -> f64 {
        let n1 = (self.points - 1) as f64;
        // Written as a difference of two ratios so digit k and n-1-k land on
        // exactly opposite values.
        (k as f64 - (n1 - k as f64)) / n1
    }

    pub fn coordinates(&self, index: &LatentIndex) -> Result<Vec<f64>> {
        index.validate(&self.shape())?;
        Ok(index.digits().iter().map(|&k| self.coordinate(k)).collect())
    }

    /// Digits `round((n-1)/2)`: the grid point nearest the origin.
    pub fn centre(&self) -> LatentIndex {
        LatentIndex(vec![self.points / 2; self.dim])
    }
}

/// Image geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Canvas {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        let c = Canvas { height, width, channels };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(Error::input("canvas dimensions must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Network input shape `[channels, height, width]`.
    pub fn network_shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

/// A decoded image and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub canvas: Canvas,
    /// Row-major, channel-last pixels in `[0, 1]`.
    pub pixels: Vec<f32>,
    pub index: LatentIndex,
    pub generator: String,
}

impl Stimulus {
    pub fn new(canvas: Canvas, pixels: Vec<f32>, index: LatentIndex, generator: impl Into<String>) -> Result<Self> {
        canvas.validate()?;
        if pixels.len() != canvas.len() {
            return Err(Error::input(format!("image has {} values, canvas needs {}", pixels.len(), canvas.len())));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::input(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Stimulus { canvas, pixels, index, generator: generator.into() })
    }

    pub fn pixel(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.canvas.width + x) * self.canvas.channels + c]
    }

    /// Pixels reordered to the network's channel-first layout.
    pub fn to_network_input(&self) -> Vec<f64> {
        let Canvas { height, width, channels } = self.canvas;
        let mut out = Vec::with_capacity(self.pixels.len());
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    out.push(self.pixel(y, x, c) as f64);
                }
            }
        }
        out
    }
}

/// Anything that decodes latent indices into images.
pub trait Generator: Send + Sync {
    /// Short identifier recorded as the stimulus provenance.
    fn id(&self) -> &str;
    fn grid(&self) -> LatentGrid;
    fn canvas(&self) -> Canvas;
    fn decode(&self, index: &LatentIndex) -> Result<Stimulus>;

    /// Whether `decode` may be called from several threads at once with
    /// any benefit. Serial resources still accept concurrent callers but
    /// queue them.
    fn concurrent(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_cover_the_unit_box() {
        let g = LatentGrid::new(1, 5).unwrap();
        let c: Vec<f64> = (0..5).map(|k| g.coordinate(k)).collect();
        assert_eq!(c, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(LatentGrid::new(0, 4).is_err());
        assert!(LatentGrid::new(3, 1).is_err());
    }

    #[test]
    fn channel_first_reordering() {
        let canvas = Canvas::new(1, 2, 3).unwrap();
        let px = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let s = Stimulus::new(canvas, px, LatentIndex(vec![0]), "t").unwrap();
        let want: Vec<f64> = [0.0f32, 0.3, 0.1, 0.4, 0.2, 0.5].iter().map(|&v| v as f64).collect();
        assert_eq!(s.to_network_input(), want);
        assert!(Stimulus::new(canvas, vec![1.5; 6], LatentIndex(vec![0]), "t").is_err());
        assert!(Stimulus::new(canvas, vec![0.5; 5], LatentIndex(vec![0]), "t").is_err());
    }
}
