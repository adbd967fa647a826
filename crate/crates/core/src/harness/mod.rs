//! Experiment orchestration: configuration, objectives wired from a network
//! and a generator, toy training with snapshots, MEI sweeps, reports and run
//! manifests.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/
//!   checkpoints/epoch_<n>.net       training snapshots
//!   accuracy.csv                    per-epoch loss and accuracy
//!   cells/epoch_<e>/L<l>_N<n>_<method>/
//!     history.csv                   every objective call
//!     mei.ppm, mei.f32              best image (8-bit snapshot, exact floats)
//!     mei.json                      the cell result; written last
//!     error.txt                     present only if the cell failed
//!   report/*.csv                    analysis tables
//!   bench/runs.csv, summary.csv     optimizer benchmark
//!   manifest_<command>.json         config snapshot and file inventory
//!   timings_<command>.json          wall-clock timings (not reproducible)
//! ```

mod bench;
mod config;
mod manifest;
mod report;
mod sweep;
mod training;

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optimizer::Objective;
use crate::snn::{Layer, SpikingNetwork, Synapses, Target, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_THRESHOLD};
use crate::stimulus::{Generator, Stimulus};
use crate::tt::LatentIndex;

pub use bench::{benchmark, run_benchmarks, BenchCell, BenchRun, BenchSettings, BenchSummary};
pub use config::{ExperimentConfig, GeneratorKind, GeneratorSpec, NetworkSpec, OptimizerSpec, TargetSpec, TrainSpec};
pub use manifest::{FileEntry, RunManifest, MANIFEST_SCHEMA};
pub use report::{run_report, ReportSummary, REPORT_TABLES};
pub use sweep::{
    cell_dir, load_cells, load_snapshots, resolve_targets, run_mei_sweep, run_sweep, CellResult, Snapshot,
    SweepSettings, SweepSummary,
};
pub use training::{run_training_with_snapshots, TrainingSummary};

/// Seed for one (layer, neuron, method) cell: the first eight bytes of a
/// SHA-256 over the master seed and the cell coordinates. Stable across
/// platforms and releases.
pub fn derive_seed(master: u64, layer: usize, neuron: usize, method: &str) -> u64 {
    derive_seed_from(&format!("{master}/{layer}/{neuron}/{method}"))
}

pub(crate) fn derive_seed_from(label: &str) -> u64 {
    let digest = Sha256::digest(format!("spikemei-seed/{label}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `f` on a rayon pool of `workers` threads (0: one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Evaluation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Activation of one neuron as a function of the latent index.
///
/// Each call decodes the index and runs one exposure; [`calls`](Self::calls)
/// counts them so the budget can be reconciled with the optimizer's own
/// count. Wrap it in an [`ObjectiveAdapter`](crate::ObjectiveAdapter) to
/// enforce a budget.
pub struct NeuronObjective<'a> {
    net: &'a SpikingNetwork,
    generator: &'a dyn Generator,
    target: Target,
    unit: bool,
    calls: AtomicUsize,
}

impl<'a> NeuronObjective<'a> {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn target(&self) -> Target {
        self.target
    }

    /// Activation and class probabilities for an already decoded image; not
    /// counted as a call.
    pub fn inspect(&self, stimulus: &Stimulus) -> Result<(f64, Vec<f64>)> {
        let x = stimulus.to_network_input();
        let counts = self.net.counts(&x)?;
        let activation = if self.unit {
            counts[self.target.layer][self.target.neuron] as f64 / self.net.exposure as f64
        } else {
            self.net.activation_from_counts(&counts, self.target)?
        };
        let out: Vec<f64> = counts[counts.len() - 1].iter().map(|&c| c as f64).collect();
        Ok((activation, crate::snn::softmax(&out)))
    }
}

impl Objective for NeuronObjective<'_> {
    fn evaluate(&self, index: &LatentIndex) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let stimulus = self.generator.decode(index)?;
        let x = stimulus.to_network_input();
        if self.unit {
            self.net.unit_activation(&x, self.target.layer, self.target.neuron)
        } else {
            self.net.activation(&x, self.target)
        }
    }

    fn concurrent(&self) -> bool {
        self.generator.concurrent()
    }
}

/// Wires a network and a generator into the activation objective of one
/// neuron (or, with `unit`, one unit of a convolutional layer).
pub fn make_objective<'a>(
    net: &'a SpikingNetwork,
    generator: &'a dyn Generator,
    target: Target,
    unit: bool,
) -> Result<NeuronObjective<'a>> {
    let shape = generator.canvas().network_shape();
    if shape != net.input_shape {
        return Err(Error::input(format!(
            "generator produces {shape:?} (channels, height, width) images, network expects {:?}",
            net.input_shape
        )));
    }
    if unit {
        let layer = net.layers.get(target.layer).ok_or_else(|| Error::input("target layer out of range"))?;
        if target.neuron >= layer.outputs() {
            return Err(Error::input(format!("unit {} out of range for layer {}", target.neuron, target.layer)));
        }
    } else {
        net.check_target(target)?;
    }
    Ok(NeuronObjective { net, generator, target, unit, calls: AtomicUsize::new(0) })
}

/// Single-neuron network whose input current is a matched filter for
/// `template`: weights are the template minus its mean, scaled so the
/// template itself drives a current of `peak_current`. The LIF threshold
/// then turns the match into a spike count.
pub fn template_network(template: &Stimulus, peak_current: f64, exposure: usize) -> Result<SpikingNetwork> {
    let x = template.to_network_input();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let energy: f64 = centred.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(Error::input("template image is flat; nothing to match"));
    }
    let weights = centred.iter().map(|v| v * peak_current / energy).collect();
    let layer = Layer::new(Synapses::dense(1, x.len(), weights)?, DEFAULT_BETA, DEFAULT_THRESHOLD)?;
    SpikingNetwork::new(template.canvas.network_shape(), vec![layer], exposure, DEFAULT_ALPHA)
}
