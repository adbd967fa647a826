//! Procedural 8x8 pattern classification task for toy-scale training.
//!
//! Classes: 0 horizontal bar, 1 vertical bar, 2 diagonal bar, 3 square blob.
//! Each pattern is placed near the centre with a one-pixel jitter, then
//! uniform background noise is added and pixels are clipped to `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledSample, SpikingNetwork};
use crate::error::{Error, Result};

pub const SIDE: usize = 8;
pub const CLASSES: usize = 4;
pub const CLASS_NAMES: [&str; CLASSES] = ["horizontal", "vertical", "diagonal", "blob"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTask {
    pub samples: usize,
    pub seed: u64,
    /// Peak amplitude of the uniform background noise.
    pub noise: f64,
}

impl Default for ToyTask {
    fn default() -> Self {
        ToyTask { samples: 200, seed: 0x70_7e57, noise: 0.2 }
    }
}

/// Hidden widths of the default toy network.
pub const HIDDEN: [usize; 2] = [32, 16];
/// Weight gain of hidden layers.
pub const HIDDEN_GAIN: f64 = 1.0;
/// Weight gain of the readout layer. Small enough that an untrained network
/// stays silent at the readout, so its loss starts at `ln 4`.
pub const OUTPUT_GAIN: f64 = 0.3;

/// Fresh `64 -> 32 -> 16 -> 4` network for the toy task.
pub fn network(seed: u64) -> Result<SpikingNetwork> {
    network_with(seed, &HIDDEN)
}

/// Fresh toy network with the given hidden widths.
pub fn network_with(seed: u64, hidden: &[usize]) -> Result<SpikingNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths: Vec<usize> = hidden.iter().copied().chain([CLASSES]).collect();
    let gains: Vec<f64> = hidden.iter().map(|_| HIDDEN_GAIN).chain([OUTPUT_GAIN]).collect();
    SpikingNetwork::random_dense([1, SIDE, SIDE], &widths, &gains, &mut rng)
}

/// The noiseless pattern of `class` shifted by `(dy, dx)`.
pub fn pattern(class: usize, dy: isize, dx: isize) -> Vec<f64> {
    let mut img = vec![0.0; SIDE * SIDE];
    let mut set = |y: isize, x: isize| {
        if (0..SIDE as isize).contains(&y) && (0..SIDE as isize).contains(&x) {
            img[y as usize * SIDE + x as usize] = 1.0;
        }
    };
    let c = (SIDE / 2) as isize;
    match class {
        0 => (0..SIDE as isize).for_each(|x| set(c + dy, x)),
        1 => (0..SIDE as isize).for_each(|y| set(y, c + dx)),
        2 => (0..SIDE as isize).for_each(|i| set(i + dy, i + dx)),
        _ => {
            for y in -1..=1 {
                for x in -1..=1 {
                    set(c + dy + y, c + dx + x);
                }
            }
        }
    }
    img
}

/// Balanced labelled samples (classes cycle), reproducible from the seed.
pub fn generate(task: &ToyTask) -> Result<Vec<LabeledSample>> {
    if task.samples == 0 {
        return Err(Error::input("toy task needs at least one sample"));
    }
    if !(0.0..=1.0).contains(&task.noise) {
        return Err(Error::input(format!("noise amplitude {} must lie in [0, 1]", task.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    Ok((0..task.samples)
        .map(|i| {
            let label = i % CLASSES;
            let dy = rng.random_range(-1i32..=1) as isize;
            let dx = rng.random_range(-1i32..=1) as isize;
            let input = pattern(label, dy, dx)
                .into_iter()
                .map(|v| (v + task.noise * rng.random::<f64>()).min(1.0))
                .collect();
            LabeledSample { input, label }
        })
        .collect())
}
