//! Synthetic discrete objectives with known optima, used by the benchmark
//! command and the acceptance tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::tt::LatentIndex;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Landscape {
    /// Negated Euclidean distance to a hidden index.
    PeakEuclidean { peak: Vec<usize> },
    /// Negated Manhattan distance to a hidden index.
    PeakManhattan { peak: Vec<usize> },
    /// Sum of independent per-coordinate scores.
    Separable { table: Vec<Vec<f64>> },
    /// Negated quadratic form coupling neighbouring coordinates.
    Coupled { center: Vec<usize>, coupling: f64 },
    /// A wide local peak and a narrower, higher global peak.
    Deceptive { local: Vec<usize>, global: Vec<usize>, local_height: f64, local_slope: f64, global_slope: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkProblem {
    pub name: String,
    pub shape: Vec<usize>,
    pub landscape: Landscape,
}

fn sq(a: usize, b: usize) -> f64 {
    let d = a as f64 - b as f64;
    d * d
}

fn manhattan(a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum()
}

impl BenchmarkProblem {
    pub fn value(&self, index: &LatentIndex) -> f64 {
        let x = index.digits();
        match &self.landscape {
            Landscape::PeakEuclidean { peak } => -x.iter().zip(peak).map(|(&a, &b)| sq(a, b)).sum::<f64>().sqrt(),
            Landscape::PeakManhattan { peak } => -manhattan(x, peak),
            Landscape::Separable { table } => x.iter().zip(table).map(|(&d, row)| row[d]).sum(),
            Landscape::Coupled { center, coupling } => {
                let dev: Vec<f64> = x.iter().zip(center).map(|(&a, &c)| a as f64 - c as f64).collect();
                let diag: f64 = dev.iter().map(|v| v * v).sum();
                let cross: f64 = dev.windows(2).map(|w| w[0] * w[1]).sum();
                -(diag + coupling * cross)
            }
            Landscape::Deceptive { local, global, local_height, local_slope, global_slope } => {
                let a = local_height - local_slope * manhattan(x, local);
                let b = 1.0 - global_slope * manhattan(x, global);
                a.max(b)
            }
        }
    }

    pub fn grid_size(&self) -> usize {
        self.shape.iter().product()
    }

    /// Exhaustive maximum over the grid.
    pub fn brute_force_max(&self) -> (LatentIndex, f64) {
        let d = self.shape.len();
        let mut digits = vec![0usize; d];
        let mut best = (LatentIndex(digits.clone()), f64::NEG_INFINITY);
        loop {
            let idx = LatentIndex(digits.clone());
            let v = self.value(&idx);
            if v > best.1 {
                best = (idx, v);
            }
            let mut pos = d;
            loop {
                if pos == 0 {
                    return best;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < self.shape[pos] {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
}

fn random_point(shape: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    shape.iter().map(|&n| rng.random_range(0..n)).collect()
}

/// The standard suite: five landscapes on each of the `[4]^6` and `[8]^6`
/// grids, generated from a fixed seed.
pub fn standard_suite() -> Vec<BenchmarkProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
    let mut out = Vec::new();
    for n in [4usize, 8] {
        let shape = vec![n; 6];
        let peak = random_point(&shape, &mut rng);
        out.push(BenchmarkProblem {
            name: format!("peak_euclid_{n}"),
            shape: shape.clone(),
            landscape: Landscape::PeakEuclidean { peak },
        });
        let peak = random_point(&shape, &mut rng);
        out.push(BenchmarkProblem {
            name: format!("peak_manhattan_{n}"),
            shape: shape.clone(),
            landscape: Landscape::PeakManhattan { peak },
        });
        // Each coordinate scores a shuffled ladder of evenly spaced levels,
        // so the per-digit optimum is never a near tie.
        let table = (0..6)
            .map(|_| {
                let mut row: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
                row.shuffle(&mut rng);
                row
            })
            .collect();
        out.push(BenchmarkProblem {
            name: format!("separable_{n}"),
            shape: shape.clone(),
            landscape: Landscape::Separable { table },
        });
        let center = random_point(&shape, &mut rng);
        out.push(BenchmarkProblem {
            name: format!("coupled_{n}"),
            shape: shape.clone(),
            landscape: Landscape::Coupled { center, coupling: 0.8 },
        });
        // The local peak sits at the mirror image of the global one, so the
        // two basins are as far apart as the grid allows.
        let global = random_point(&shape, &mut rng);
        let local = global.iter().map(|&g| n - 1 - g).collect();
        let span = (n - 1) as f64 * 6.0;
        out.push(BenchmarkProblem {
            name: format!("deceptive_{n}"),
            shape,
            landscape: Landscape::Deceptive {
                local,
                global,
                local_height: 0.8,
                local_slope: 0.4 / span,
                global_slope: 1.0 / span,
            },
        });
    }
    out
}
