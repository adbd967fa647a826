//! Toy training with per-epoch checkpoints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{write_timings, RunManifest};
use super::{derive_seed_from, write_atomic, ExperimentConfig};
use crate::error::{Error, Result};
use crate::snn::{self, toy, Evaluation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub checkpoints: Vec<PathBuf>,
    pub epochs: Vec<EpochStats>,
}

impl TrainingSummary {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test.accuracy)
    }
}

/// Trains the toy network described by `config.train`, writing
/// `checkpoints/epoch_<n>.net` at the snapshot epochs and one
/// `accuracy.csv` row per trained epoch.
pub fn run_training_with_snapshots(config: &ExperimentConfig, out: &Path) -> Result<TrainingSummary> {
    let spec = &config.train;
    spec.validate()?;
    let started = Instant::now();
    let ckpt_dir = out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir)?;
    let mut manifest = RunManifest::begin(out, "train", json!({"seed": config.seed, "train": spec}))?;

    let train = toy::generate(&spec.train_set)?;
    let test = toy::generate(&spec.test_set)?;
    let mut net = toy::network_with(derive_seed_from(&format!("{}/init", config.seed)), &spec.hidden)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_from(&format!("{}/train", config.seed)));
    let snapshots = spec.snapshot_epochs();

    let mut checkpoints = Vec::new();
    let mut save = |net: &snn::SpikingNetwork, epoch: usize| -> Result<()> {
        let mut bytes = Vec::new();
        snn::write_network(net, &mut bytes)?;
        let path = ckpt_dir.join(format!("epoch_{epoch}.net"));
        write_atomic(&path, &bytes)?;
        checkpoints.push(path);
        Ok(())
    };
    save(&net, 0)?;

    let mut epochs = Vec::with_capacity(spec.epochs);
    let mut csv = String::from("epoch,train_loss,test_loss,test_accuracy\n");
    for epoch in 1..=spec.epochs {
        let train_loss = snn::train_epoch(&mut net, &train, spec.learning_rate, spec.batch_size, &mut rng)
            .map_err(|e| match e {
                Error::Divergence(msg) => Error::Divergence(format!("epoch {epoch}: {msg}")),
                other => other,
            })?;
        let eval = snn::evaluate(&net, &test)?;
        log::info!("epoch {epoch}: train loss {train_loss:.4}, test accuracy {:.3}", eval.accuracy);
        csv.push_str(&format!("{epoch},{train_loss},{},{}\n", eval.loss, eval.accuracy));
        epochs.push(EpochStats { epoch, train_loss, test: eval });
        if snapshots.contains(&epoch) {
            save(&net, epoch)?;
        }
    }
    write_atomic(&out.join("accuracy.csv"), csv.as_bytes())?;

    let summary = TrainingSummary { checkpoints, epochs };
    manifest.finish(
        out,
        &["checkpoints", "accuracy.csv"],
        true,
        json!({"epochs": spec.epochs, "snapshots": snapshots, "final_accuracy": summary.final_accuracy()}),
    )?;
    write_timings(out, "train", &json!({"total_seconds": started.elapsed().as_secs_f64()}))?;
    Ok(summary)
}
