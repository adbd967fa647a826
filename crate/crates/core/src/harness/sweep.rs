//! MEI sweeps: every snapshot x target neuron x method is one independent
//! cell, run on the worker pool and persisted in its own directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{write_timings, RunManifest};
use super::{derive_seed, make_objective, sha256_hex, write_atomic, ExperimentConfig, TargetSpec};
use crate::analysis::MeiRecord;
use crate::error::{Error, Result};
use crate::optimizer::{optimize, Method, ObjectiveAdapter, ProtesConfig};
use crate::snn::{read_network, SpikingNetwork, Target};
use crate::stimulus::{write_ppm, write_raw, Generator};

pub const CELL_SCHEMA: u32 = 1;

/// A network state to sweep, tagged with its training epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub epoch: usize,
    pub network: SpikingNetwork,
    /// SHA-256 of the checkpoint bytes (or any stable fingerprint).
    pub digest: String,
}

impl Snapshot {
    pub fn from_network(epoch: usize, network: SpikingNetwork) -> Result<Self> {
        let mut bytes = Vec::new();
        crate::snn::write_network(&network, &mut bytes)?;
        Ok(Snapshot { epoch, network, digest: sha256_hex(&bytes) })
    }
}

fn epoch_from_name(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("epoch_")?.strip_suffix(".net")?.parse().ok()
}

/// Reads the checkpoints named by `config.network`, or every
/// `epoch_<n>.net` under `<out>/checkpoints`, ordered by epoch.
pub fn load_snapshots(config: &ExperimentConfig, out: &Path) -> Result<Vec<Snapshot>> {
    let paths: Vec<PathBuf> = if config.network.checkpoints.is_empty() {
        let dir = out.join("checkpoints");
        let listing = std::fs::read_dir(&dir).map_err(|_| {
            Error::input(format!("no checkpoints in {}; run `train` first or list them in the config", dir.display()))
        })?;
        let mut found = Vec::new();
        for entry in listing {
            let p = entry?.path();
            if epoch_from_name(&p).is_some() {
                found.push(p);
            }
        }
        found
    } else {
        config.network.checkpoints.clone()
    };
    let mut snapshots = Vec::with_capacity(paths.len());
    for (pos, path) in paths.iter().enumerate() {
        let epoch = epoch_from_name(path).unwrap_or(pos);
        if !config.network.epochs.is_empty() && !config.network.epochs.contains(&epoch) {
            continue;
        }
        let bytes = std::fs::read(path)
            .map_err(|e| Error::input(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let network = read_network(bytes.as_slice())
            .map_err(|e| Error::input(format!("checkpoint {}: {e}", path.display())))?;
        snapshots.push(Snapshot { epoch, network, digest: sha256_hex(&bytes) });
    }
    snapshots.sort_by_key(|s| s.epoch);
    if snapshots.windows(2).any(|w| w[0].epoch == w[1].epoch) {
        return Err(Error::input("two checkpoints claim the same epoch"));
    }
    for e in &config.network.epochs {
        if !snapshots.iter().any(|s| s.epoch == *e) {
            return Err(Error::input(format!("no checkpoint for requested epoch {e}")));
        }
    }
    if snapshots.is_empty() {
        return Err(Error::input("no network checkpoints to sweep"));
    }
    Ok(snapshots)
}

/// Target neurons of `net` selected by `spec`, in (layer, neuron) order.
pub fn resolve_targets(net: &SpikingNetwork, spec: &TargetSpec) -> Result<Vec<Target>> {
    let count = |layer: usize| -> Result<usize> {
        let l = net.layers.get(layer).ok_or_else(|| Error::input(format!("layer {layer} does not exist")))?;
        Ok(if spec.unit { l.outputs() } else { l.num_targets() })
    };
    if !spec.neurons.is_empty() {
        return spec
            .neurons
            .iter()
            .map(|&[layer, neuron]| {
                if neuron >= count(layer)? {
                    return Err(Error::input(format!("neuron {neuron} does not exist in layer {layer}")));
                }
                Ok(Target { layer, neuron })
            })
            .collect();
    }
    let layers: Vec<usize> = if spec.layers.is_empty() { (0..net.layers.len()).collect() } else { spec.layers.clone() };
    let mut targets = Vec::new();
    for layer in layers {
        let n = count(layer)?;
        let n = spec.neurons_per_layer.map_or(n, |cap| cap.min(n));
        targets.extend((0..n).map(|neuron| Target { layer, neuron }));
    }
    if targets.is_empty() {
        return Err(Error::input("the target set is empty"));
    }
    Ok(targets)
}

/// Everything a sweep needs besides the snapshots and the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub seed: u64,
    pub budget: usize,
    pub methods: Vec<Method>,
    pub protes: ProtesConfig,
    pub targets: TargetSpec,
    pub parallel_batches: bool,
}

impl SweepSettings {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        SweepSettings {
            seed: config.seed,
            budget: config.budget,
            methods: config.optimizer.methods.clone(),
            protes: config.optimizer.protes.clone(),
            targets: config.targets.clone(),
            parallel_batches: config.optimizer.parallel_batches,
        }
    }
}

/// Contents of a finished cell's `mei.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub schema: u32,
    /// Fingerprint of every input of the cell; a cell is reused only when
    /// it matches.
    pub key: String,
    pub record: MeiRecord,
    /// Best objective value seen by the optimizer.
    pub best_value: f64,
    pub stalled: bool,
    /// Decode-and-simulate calls the objective received.
    pub objective_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub computed: usize,
    pub skipped: usize,
    pub failed: Vec<CellFailure>,
    /// Evaluations reported by the optimizers of all finished cells.
    pub evaluations: usize,
    /// Objective calls counted by all finished cells.
    pub objective_calls: usize,
}

impl SweepSummary {
    pub fn complete(&self) -> bool {
        self.failed.is_empty()
    }
}

pub fn cell_dir(out: &Path, epoch: usize, target: Target, method: Method) -> PathBuf {
    out.join("cells").join(format!("epoch_{epoch}")).join(format!("L{}_N{}_{}", target.layer, target.neuron, method))
}

struct Cell<'a> {
    snapshot: &'a Snapshot,
    target: Target,
    method: Method,
}

enum Outcome {
    Reused(CellResult),
    Computed(CellResult),
    Failed(CellFailure),
}

fn cell_key(cell: &Cell, generator: &dyn Generator, settings: &SweepSettings, protes: &ProtesConfig) -> String {
    let key = json!({
        "network": cell.snapshot.digest,
        "generator": {"id": generator.id(), "grid": generator.grid(), "canvas": generator.canvas()},
        "budget": settings.budget,
        "method": cell.method,
        "protes": protes,
        "layer": cell.target.layer,
        "neuron": cell.target.neuron,
        "unit": settings.targets.unit,
    });
    sha256_hex(key.to_string().as_bytes())
}

fn run_cell(cell: &Cell, generator: &dyn Generator, settings: &SweepSettings, out: &Path) -> Result<Outcome> {
    let Cell { snapshot, target, method } = *cell;
    let dir = cell_dir(out, snapshot.epoch, target, method);
    let mut protes = settings.protes.clone();
    protes.seed = derive_seed(settings.seed, target.layer, target.neuron, method.name());
    let key = cell_key(cell, generator, settings, &protes);
    let done = dir.join("mei.json");
    if let Ok(bytes) = std::fs::read(&done) {
        match serde_json::from_slice::<CellResult>(&bytes) {
            Ok(r) if r.key == key => return Ok(Outcome::Reused(r)),
            _ => log::warn!("{}: stale or unreadable result, recomputing", dir.display()),
        }
    }
    std::fs::create_dir_all(&dir)?;

    let attempt = || -> Result<CellResult> {
        let objective = make_objective(&snapshot.network, generator, target, settings.targets.unit)?;
        let adapter = ObjectiveAdapter::new(&objective, settings.budget)
            .with_cache(protes.cache)
            .parallel(settings.parallel_batches);
        let grid = generator.grid();
        let run = optimize(method, &adapter, &grid.shape(), &protes)?;
        let stimulus = generator.decode(&run.best_index)?;
        let (activation, class_probs) = objective.inspect(&stimulus)?;

        let mut history = Vec::new();
        run.write_history_csv(&mut history)?;
        write_atomic(&dir.join("history.csv"), &history)?;
        let canvas = stimulus.canvas;
        if matches!(canvas.channels, 1 | 3) {
            let mut ppm = Vec::new();
            write_ppm(canvas, &stimulus.pixels, &mut ppm)?;
            write_atomic(&dir.join("mei.ppm"), &ppm)?;
        }
        let mut raw = Vec::new();
        write_raw(canvas, &stimulus.pixels, &mut raw)?;
        write_atomic(&dir.join("mei.f32"), &raw)?;

        let record = MeiRecord {
            layer: target.layer,
            neuron: target.neuron,
            method: method.name().into(),
            epoch: snapshot.epoch,
            latent: grid.coordinates(&run.best_index)?,
            index: run.best_index.clone(),
            activation,
            activation_ceiling: snapshot.network.max_activation(target.layer),
            class_probs,
            evaluations: run.evaluations_used,
            seed: protes.seed,
            generator: generator.id().into(),
        };
        Ok(CellResult {
            schema: CELL_SCHEMA,
            key: key.clone(),
            record,
            best_value: run.best_value,
            stalled: run.stalled,
            objective_calls: objective.calls(),
        })
    };
    match attempt() {
        Ok(result) => {
            let mut text = serde_json::to_vec_pretty(&result)?;
            text.push(b'\n');
            write_atomic(&done, &text)?;
            let _ = std::fs::remove_file(dir.join("error.txt"));
            Ok(Outcome::Computed(result))
        }
        Err(e) if e.is_input() => Err(e),
        Err(e) => {
            let rel = dir.strip_prefix(out).unwrap_or(&dir).display().to_string();
            log::error!("{rel}: {e}");
            write_atomic(&dir.join("error.txt"), format!("{e}\n").as_bytes())?;
            Ok(Outcome::Failed(CellFailure { cell: rel, error: e.to_string() }))
        }
    }
}

/// Runs every cell not already finished under `out`. Cells run in parallel
/// on the current rayon pool; a failed cell is recorded and the rest carry
/// on.
pub fn run_sweep(
    snapshots: &[Snapshot],
    generator: &dyn Generator,
    settings: &SweepSettings,
    out: &Path,
) -> Result<SweepSummary> {
    if settings.budget == 0 {
        return Err(Error::input("budget must be at least 1"));
    }
    let mut cells = Vec::new();
    for snapshot in snapshots {
        let targets = resolve_targets(&snapshot.network, &settings.targets)?;
        for &target in &targets {
            // Surface wiring errors before any work starts.
            make_objective(&snapshot.network, generator, target, settings.targets.unit)?;
            for &method in &settings.methods {
                cells.push(Cell { snapshot, target, method });
            }
        }
    }
    let outcomes: Vec<Outcome> =
        cells.par_iter().map(|c| run_cell(c, generator, settings, out)).collect::<Result<_>>()?;
    let mut summary = SweepSummary {
        cells: cells.len(),
        computed: 0,
        skipped: 0,
        failed: Vec::new(),
        evaluations: 0,
        objective_calls: 0,
    };
    for o in outcomes {
        let r = match o {
            Outcome::Reused(r) => {
                summary.skipped += 1;
                r
            }
            Outcome::Computed(r) => {
                summary.computed += 1;
                r
            }
            Outcome::Failed(f) => {
                summary.failed.push(f);
                continue;
            }
        };
        summary.evaluations += r.record.evaluations;
        summary.objective_calls += r.objective_calls;
    }
    Ok(summary)
}

/// Loads the config's snapshots and generator, runs the sweep under `out`
/// and writes the sweep manifest.
pub fn run_mei_sweep(config: &ExperimentConfig, out: &Path) -> Result<SweepSummary> {
    config.validate()?;
    let started = Instant::now();
    let snapshots = load_snapshots(config, out)?;
    std::fs::create_dir_all(out.join("cells"))?;
    let mut manifest = RunManifest::begin(out, "sweep", config.snapshot())?;
    let generator = config.generator.build()?;
    let settings = SweepSettings::from_config(config);
    let summary = run_sweep(&snapshots, generator.as_ref(), &settings, out)?;
    drop(generator);
    manifest.finish(
        out,
        &["cells"],
        summary.complete(),
        json!({
            "cells": summary.cells,
            "completed": summary.cells - summary.failed.len(),
            "failed": summary.failed,
            "evaluations": summary.evaluations,
            "objective_calls": summary.objective_calls,
            "epochs": snapshots.iter().map(|s| s.epoch).collect::<Vec<_>>(),
        }),
    )?;
    write_timings(
        out,
        "sweep",
        &json!({
            "total_seconds": started.elapsed().as_secs_f64(),
            "computed": summary.computed,
            "skipped": summary.skipped,
        }),
    )?;
    Ok(summary)
}

/// Every finished cell under `<out>/cells`, sorted by directory.
pub fn load_cells(out: &Path) -> Result<Vec<(PathBuf, CellResult)>> {
    let root = out.join("cells");
    let mut found = Vec::new();
    let epochs = std::fs::read_dir(&root)
        .map_err(|_| Error::input(format!("no sweep results in {}", root.display())))?;
    for epoch in epochs {
        let epoch = epoch?.path();
        if !epoch.is_dir() {
            continue;
        }
        for cell in std::fs::read_dir(&epoch)? {
            let cell = cell?.path();
            let path = cell.join("mei.json");
            if path.is_file() {
                let result: CellResult = serde_json::from_slice(&std::fs::read(&path)?)
                    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
                found.push((cell, result));
            }
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(found)
}
