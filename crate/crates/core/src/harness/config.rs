//! Experiment configuration (TOML).
//!
//! Every field has a default, so an empty file is a valid desk-scale
//! configuration. See the README for an annotated example.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{Method, ProtesConfig};
use crate::snn::toy::{self, ToyTask};
use crate::stimulus::{Canvas, ExternalGenerator, Generator, LatentGrid, Procedural};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every other seed is derived from it.
    pub seed: u64,
    /// Output directory. Left out of the manifest snapshot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and training; 0 uses every core. Does not
    /// affect results.
    #[serde(skip_serializing)]
    pub workers: usize,
    /// Objective evaluations per optimizer run.
    pub budget: usize,
    pub train: TrainSpec,
    pub network: NetworkSpec,
    pub generator: GeneratorSpec,
    pub optimizer: OptimizerSpec,
    pub targets: TargetSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out: None,
            workers: 0,
            budget: 2000,
            train: TrainSpec::default(),
            network: NetworkSpec::default(),
            generator: GeneratorSpec::default(),
            optimizer: OptimizerSpec::default(),
            targets: TargetSpec::default(),
        }
    }
}

/// Toy training run that produces the epoch snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    /// Write a checkpoint every this many epochs (epoch 0 and the last
    /// epoch always get one).
    pub snapshot_every: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub train_set: ToyTask,
    pub test_set: ToyTask,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 30,
            snapshot_every: 5,
            learning_rate: 0.05,
            batch_size: 10,
            hidden: toy::HIDDEN.to_vec(),
            train_set: ToyTask { seed: 1, ..ToyTask::default() },
            test_set: ToyTask { seed: 2, ..ToyTask::default() },
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snapshot_every == 0 {
            return Err(Error::input("snapshot_every must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning_rate must be finite and nonnegative"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::input("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// Epochs that get a checkpoint: 0, every `snapshot_every`, and the last.
    pub fn snapshot_epochs(&self) -> Vec<usize> {
        let mut e: Vec<usize> = (0..=self.epochs).step_by(self.snapshot_every).collect();
        if e.last() != Some(&self.epochs) {
            e.push(self.epochs);
        }
        e
    }
}

/// Which network snapshots a sweep visits.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    /// Checkpoint files. Empty means every `epoch_<n>.net` under
    /// `<out>/checkpoints`. The epoch is read from the file name, or taken
    /// from the position in this list when the name has none.
    pub checkpoints: Vec<PathBuf>,
    /// Restrict the sweep to these epochs; empty keeps all.
    pub epochs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Procedural,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dim: usize,
    pub points: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Program and arguments of an external generator.
    pub command: Vec<String>,
    pub timeout_secs: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            kind: GeneratorKind::Procedural,
            dim: 8,
            points: 16,
            height: toy::SIDE,
            width: toy::SIDE,
            channels: 1,
            command: Vec::new(),
            timeout_secs: 30.0,
        }
    }
}

impl GeneratorSpec {
    pub fn grid(&self) -> Result<LatentGrid> {
        LatentGrid::new(self.dim, self.points)
    }

    pub fn canvas(&self) -> Result<Canvas> {
        Canvas::new(self.height, self.width, self.channels)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.canvas()?;
        if self.kind == GeneratorKind::External && self.command.is_empty() {
            return Err(Error::input("external generator needs a command"));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::input("generator timeout must be positive"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Generator>> {
        self.validate()?;
        Ok(match self.kind {
            GeneratorKind::Procedural => Box::new(Procedural::new(self.grid()?, self.canvas()?)?),
            GeneratorKind::External => Box::new(ExternalGenerator::spawn(
                &self.command,
                self.grid()?,
                self.canvas()?,
                Duration::from_secs_f64(self.timeout_secs),
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSpec {
    pub methods: Vec<Method>,
    /// Shared PROTES settings; presets override batch, elites and
    /// quantization, and each run gets its own derived seed.
    pub protes: ProtesConfig,
    /// Evaluate each batch in parallel.
    pub parallel_batches: bool,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec { methods: Method::PROTES_PRESETS.to_vec(), protes: ProtesConfig::default(), parallel_batches: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSpec {
    /// Layers whose neurons are swept; empty means all layers.
    pub layers: Vec<usize>,
    /// Sweep only the first this many neurons of each layer.
    pub neurons_per_layer: Option<usize>,
    /// Explicit `[layer, neuron]` pairs; overrides `layers` when nonempty.
    pub neurons: Vec<[usize; 2]>,
    /// On convolutional layers, target single units instead of channel
    /// means.
    pub unit: bool,
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec { layers: Vec::new(), neurons_per_layer: Some(16), neurons: Vec::new(), unit: false }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::input("budget must be at least 1"));
        }
        self.train.validate()?;
        self.generator.validate()?;
        self.optimizer.protes.validate()?;
        if self.optimizer.methods.is_empty() {
            return Err(Error::input("at least one optimization method is required"));
        }
        for m in &self.optimizer.methods {
            let batch = m.configure(&self.optimizer.protes).batch;
            if m.is_protes() && self.budget < batch {
                return Err(Error::input(format!("budget {} is below the batch size {batch} of {m}", self.budget)));
            }
        }
        if self.targets.neurons_per_layer == Some(0) {
            return Err(Error::input("neurons_per_layer must be at least 1"));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::input("no output directory given (--out or `out` in the config)"))
    }

    /// Canonical JSON of everything that affects results.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_value(&c).expect("config serializes")
    }
}
