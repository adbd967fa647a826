//! Acceptance suite: one line per criterion, measured value against the
//! stated tolerance and time limit.
//!
//! Runs as a plain binary (`harness = false`). Every criterion is evaluated
//! and reported even when an earlier one fails. The exit status is zero
//! unless `SPIKEMEI_ACCEPTANCE_STRICT=1` is set, in which case any FAIL
//! line makes the run fail.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikemei::analysis::{
    all_verdicts, best_per_neuron, compression_complexity, latent_distances, normalized_entropy,
};
use spikemei::harness::{
    benchmark, derive_seed, load_cells, make_objective, run_mei_sweep, run_report, run_training_with_snapshots,
    template_network, BenchSettings, ExperimentConfig, RunManifest, TargetSpec,
};
use spikemei::optimizer::benchmarks::standard_suite;
use spikemei::snn::{self, Layer, LifLayer, SpikeMode, SpikingNetwork, Synapses, Target};
use spikemei::stimulus::{Canvas, Generator, LatentGrid, Procedural, Stimulus};
use spikemei::tt::TensorTrain;
use spikemei::{optimize, LatentIndex, Method, Objective, ObjectiveAdapter, ProtesConfig};

type Verdict = Result<(bool, String), String>;

struct Suite {
    failed: Vec<&'static str>,
    total: usize,
}

impl Suite {
    fn run(&mut self, name: &'static str, limit: Duration, f: impl FnOnce() -> Verdict) {
        let started = Instant::now();
        let outcome = f();
        let took = started.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = took <= limit;
        let pass = ok && in_time;
        let time = format!("{:.1}s of {}s", took.as_secs_f64(), limit.as_secs());
        let time = if in_time { time } else { format!("{time}, OVER TIME") };
        println!("[{}] {name}: {detail} ({time})", if pass { "PASS" } else { "FAIL" });
        self.total += 1;
        if !pass {
            self.failed.push(name);
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

// Tensor trains.

fn all_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in shape {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

/// Explicit sum over every rank path.
fn dense_value(tt: &TensorTrain, idx: &[usize]) -> f64 {
    let ranks = tt.ranks();
    let inner = &ranks[1..ranks.len() - 1];
    let mut total = 0.0;
    for path in all_indices(inner) {
        let mut p = 1.0;
        for (i, core) in tt.cores().iter().enumerate() {
            let a = if i == 0 { 0 } else { path[i - 1] };
            let b = if i + 1 == tt.dim() { 0 } else { path[i] };
            p *= core.get(a, idx[i], b);
        }
        total += p;
    }
    total
}

fn dense_loglik(tt: &TensorTrain, indices: &[LatentIndex]) -> f64 {
    let z: f64 = all_indices(&tt.shape()).iter().map(|i| dense_value(tt, i)).sum();
    indices.iter().map(|i| (dense_value(tt, &i.0).max(1e-12) / z.max(1e-12)).ln()).sum::<f64>()
        / indices.len() as f64
}

fn tt_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_eval: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..50 {
        let shape = loop {
            let d = rng.random_range(1..=5);
            let s: Vec<usize> = (0..d).map(|_| rng.random_range(2..=10)).collect();
            if s.iter().product::<usize>() <= 10_000 {
                break s;
            }
        };
        let rank = rng.random_range(1..=4);
        let tt = TensorTrain::random(&shape, rank, 0.0, 1.0, &mut rng).map_err(err)?;
        let mut total = 0.0;
        for idx in all_indices(&shape) {
            let want = dense_value(&tt, &idx);
            let got = tt.eval(&LatentIndex(idx)).map_err(err)?;
            worst_eval = worst_eval.max((got - want).abs() / want.abs().max(1e-300));
            total += want;
        }
        worst_sum = worst_sum.max((tt.sum() - total).abs() / total);
    }

    // Small grids only: with 10^5 samples the multinomial noise alone puts
    // the expected TV near 0.13 on a 10^4-point grid.
    let mut worst_tv: f64 = 0.0;
    for shape in [vec![3, 3], vec![2, 3, 4], vec![6, 6], vec![4, 4, 4]] {
        let tt = TensorTrain::random(&shape, 2, 0.0, 1.0, &mut rng).map_err(err)?;
        let all = all_indices(&shape);
        let exact: Vec<f64> = all.iter().map(|i| dense_value(&tt, i)).collect();
        let z: f64 = exact.iter().sum();
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for idx in tt.sample(100_000, &mut rng).map_err(err)? {
            *counts.entry(idx.0).or_default() += 1;
        }
        let tv = all
            .iter()
            .zip(&exact)
            .map(|(i, p)| (p / z - *counts.get(i).unwrap_or(&0) as f64 / 1e5).abs())
            .sum::<f64>()
            / 2.0;
        worst_tv = worst_tv.max(tv);
    }

    let mut worst_grad: f64 = 0.0;
    let h = 1e-6;
    for shape in [vec![4, 4, 4], vec![3, 4], vec![2, 3, 2], vec![5]] {
        let tt = TensorTrain::random(&shape, 3, 0.2, 1.0, &mut rng).map_err(err)?;
        let indices: Vec<LatentIndex> =
            (0..4).map(|_| LatentIndex(shape.iter().map(|&n| rng.random_range(0..n)).collect())).collect();
        let grad = tt.log_likelihood_grad(&indices).map_err(err)?;
        for c in 0..tt.dim() {
            for e in 0..tt.cores()[c].data().len() {
                let mut plus = tt.clone();
                plus.core_mut(c).data_mut()[e] += h;
                let mut minus = tt.clone();
                minus.core_mut(c).data_mut()[e] -= h;
                let fd = (dense_loglik(&plus, &indices) - dense_loglik(&minus, &indices)) / (2.0 * h);
                let an = grad.cores[c][e];
                worst_grad = worst_grad.max((an - fd).abs() / fd.abs().max(an.abs()).max(1e-3));
            }
        }
    }
    let ok = worst_eval <= 1e-10 && worst_sum <= 1e-10 && worst_tv <= 0.02 && worst_grad <= 1e-5;
    Ok((
        ok,
        format!(
            "eval rel {worst_eval:.1e} / sum rel {worst_sum:.1e} (tol 1e-10) on 50 trains; TV {worst_tv:.4} (tol 0.02) at 1e5 samples; gradient rel {worst_grad:.1e} (tol 1e-5)"
        ),
    ))
}

// Optimizer benchmark.

fn protes_benchmark() -> Verdict {
    let mut methods = Method::PROTES_PRESETS.to_vec();
    methods.push(Method::RandomSearch);
    let settings = BenchSettings { seed: 0, budget: 2000, methods, repeats: 10, protes: ProtesConfig::default() };
    let suite = standard_suite();
    let summary = benchmark(&settings, &suite).map_err(err)?;
    let mut short = Vec::new();
    let mut beats = Vec::new();
    for m in Method::PROTES_PRESETS {
        let mut wins = 0;
        for p in &suite {
            let cell = summary.cell(&p.name, m).ok_or("missing cell")?;
            let random = summary.cell(&p.name, Method::RandomSearch).ok_or("missing cell")?;
            if cell.hits < 9 {
                short.push(format!("{}/{m} {}/10", p.name, cell.hits));
            }
            if cell.median_best >= random.median_best {
                wins += 1;
            }
        }
        beats.push((m, wins));
    }
    let ok = short.is_empty() && beats.iter().all(|&(_, w)| w >= 8);
    let beats: Vec<String> = beats.iter().map(|(m, w)| format!("{m} {w}/10")).collect();
    let misses = if short.is_empty() { "none".to_string() } else { short.join(", ") };
    Ok((
        ok,
        format!(
            "cells below 9/10 hits: {misses}; median >= random search on {} (need 8/10 each)",
            beats.join(", ")
        ),
    ))
}

// Spiking dynamics.

fn lif_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let w: f64 = rng.random_range(-2.0..2.0);
        let len = rng.random_range(1..=100);
        let inputs: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..2.0)).collect();
        let layer = Layer::new(Synapses::dense(1, 1, vec![w]).map_err(err)?, 0.9, 1.0).map_err(err)?;
        let mut n = LifLayer::new(layer);
        let mut u = 0.0f64;
        for &x in &inputs {
            let s = if u > 1.0 { 1.0 } else { 0.0 };
            u = 0.9 * u + w * x - s * 1.0;
            let got = n.step(&[x]).map_err(err)?;
            if got[0] != s as u8 || n.membrane[0].to_bits() != u.to_bits() {
                mismatches += 1;
                break;
            }
        }
    }

    let mut worst_decay: f64 = 0.0;
    for u0 in [0.3, 0.97, -0.5] {
        let layer = Layer::new(Synapses::dense(1, 1, vec![1.0]).map_err(err)?, 0.9, 1.0).map_err(err)?;
        let mut n = LifLayer::new(layer);
        n.membrane[0] = u0;
        for t in 1..=60 {
            n.step(&[0.0]).map_err(err)?;
            let want = 0.9f64.powi(t) * u0;
            worst_decay = worst_decay.max((n.membrane[0] - want).abs() / want.abs());
        }
    }

    let mut out_of_range = 0;
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = rng.random_range(0.1..5.0);
        let net = SpikingNetwork::random_dense([1, 3, 3], &[6, 4], &[scale, scale], &mut rng).map_err(err)?;
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        for l in 0..2 {
            for k in 0..net.layers[l].outputs() {
                let a = net.activation(&x, Target { layer: l, neuron: k }).map_err(err)?;
                if !(0.0..=1.0).contains(&a) {
                    out_of_range += 1;
                }
            }
        }
    }
    let ok = mismatches == 0 && worst_decay <= 1e-13 && out_of_range == 0;
    Ok((
        ok,
        format!(
            "{mismatches}/1000 sequences differ from the scalar recurrence (bitwise); decay rel {worst_decay:.1e} vs beta^t; {out_of_range} activations outside [0, 1] over 300 networks"
        ),
    ))
}

fn toy_training() -> Verdict {
    let mut accuracies = Vec::new();
    for seed in 0..10 {
        let dir = tempfile::tempdir().map_err(err)?;
        let mut c = ExperimentConfig { seed, ..ExperimentConfig::default() };
        c.train.snapshot_every = 30;
        let s = run_training_with_snapshots(&c, dir.path()).map_err(err)?;
        accuracies.push(s.final_accuracy().unwrap_or(0.0));
    }
    let good = accuracies.iter().filter(|&&a| a >= 0.9).count();

    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.5)).collect::<Vec<f64>>();
        let layers = vec![
            Layer::new(Synapses::dense(4, 3, w(12)).map_err(err)?, 0.9, 1.0).map_err(err)?,
            Layer::new(Synapses::dense(3, 4, w(12)).map_err(err)?, 0.9, 1.0).map_err(err)?,
        ];
        let net = SpikingNetwork::new([1, 1, 3], layers, 5, 2.0).map_err(err)?;
        let sample = snn::LabeledSample { input: vec![0.8, 0.1, 0.5], label: (seed % 3) as usize };
        let (_, grads) = snn::loss_and_grad(&net, &sample, SpikeMode::Smooth).map_err(err)?;
        let h = 1e-6;
        for l in 0..2 {
            for i in 0..net.layers[l].synapses.weights().len() {
                let mut plus = net.clone();
                plus.layers[l].synapses.weights_mut()[i] += h;
                let mut minus = net.clone();
                minus.layers[l].synapses.weights_mut()[i] -= h;
                let lp = snn::loss_and_grad(&plus, &sample, SpikeMode::Smooth).map_err(err)?.0;
                let lm = snn::loss_and_grad(&minus, &sample, SpikeMode::Smooth).map_err(err)?.0;
                let fd = (lp - lm) / (2.0 * h);
                let an = grads.layers[l][i];
                worst = worst.max((an - fd).abs() / fd.abs().max(an.abs()).max(1e-6));
            }
        }
    }
    let accs: Vec<String> = accuracies.iter().map(|a| format!("{a:.2}")).collect();
    Ok((
        good >= 8 && worst <= 1e-3,
        format!(
            "{good}/10 seeds reach 0.9 test accuracy in 30 epochs (need 8) [{}]; BPTT vs FD rel {worst:.1e} (tol 1e-3)",
            accs.join(" ")
        ),
    ))
}

// Activation maximization.

fn wired_neuron() -> Verdict {
    let grid = LatentGrid::new(4, 8).map_err(err)?;
    let g = Procedural::new(grid, Canvas::new(8, 8, 1).map_err(err)?).map_err(err)?;
    // Vertical grating (orientation digit 0) at full contrast.
    let template = g.decode(&LatentIndex(vec![0, 3, 0, 7])).map_err(err)?;
    let net = template_network(&template, 1.5, 50).map_err(err)?;
    let target = Target { layer: 0, neuron: 0 };
    let obj = make_objective(&net, &g, target, false).map_err(err)?;
    let mut oracle = f64::MIN;
    for i in all_indices(&[8; 4]) {
        oracle = oracle.max(obj.evaluate(&LatentIndex(i)).map_err(err)?);
    }
    let mut tallies = Vec::new();
    let mut ok = true;
    for m in Method::PROTES_PRESETS {
        let mut hits = 0;
        for rep in 0..10 {
            let obj = make_objective(&net, &g, target, false).map_err(err)?;
            let adapter = ObjectiveAdapter::new(&obj, 2000);
            let config = ProtesConfig { seed: derive_seed(rep, 0, 0, m.name()), ..ProtesConfig::default() };
            let run = optimize(m, &adapter, &grid.shape(), &config).map_err(err)?;
            let mei = g.decode(&run.best_index).map_err(err)?;
            let (activation, _) = obj.inspect(&mei).map_err(err)?;
            if activation == oracle && run.best_index.0[0] == 0 {
                hits += 1;
            }
        }
        ok &= hits >= 9;
        tallies.push(format!("{m} {hits}/10"));
    }
    Ok((
        ok,
        format!(
            "MEI activation equals the 4096-point maximum {oracle} with vertical orientation digit: {} (need 9/10 each)",
            tallies.join(", ")
        ),
    ))
}

/// One-sided sign test: P(X >= k) for X ~ Binomial(n, 1/2).
fn sign_test(k: usize, n: usize) -> f64 {
    let choose = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    (k..=n).map(|j| choose(n, j)).sum::<f64>() / 2f64.powi(n as i32)
}

fn selectivity_trend() -> Verdict {
    let seeds = 5;
    let (mut entropy_wins, mut fraction_wins) = (0, 0);
    let mut rows = Vec::new();
    for seed in 0..seeds {
        let dir = tempfile::tempdir().map_err(err)?;
        let mut c = ExperimentConfig { seed, ..ExperimentConfig::default() };
        c.train.snapshot_every = c.train.epochs;
        c.targets = TargetSpec { layers: vec![0, 2], neurons_per_layer: None, ..TargetSpec::default() };
        run_training_with_snapshots(&c, dir.path()).map_err(err)?;
        let sweep = run_mei_sweep(&c, dir.path()).map_err(err)?;
        if !sweep.complete() {
            return Err(format!("seed {seed}: {} cells failed", sweep.failed.len()));
        }
        let records: Vec<_> = load_cells(dir.path()).map_err(err)?.into_iter().map(|(_, c)| c.record).collect();
        let last = c.train.epochs;
        let best = best_per_neuron(&records);
        let entropy = |layer: usize| -> Result<f64, String> {
            let hs: Vec<f64> = best
                .iter()
                .filter(|r| r.layer == layer && r.epoch == last)
                .map(|r| normalized_entropy(&r.class_probs))
                .collect::<Result<_, _>>()
                .map_err(err)?;
            Ok(hs.iter().sum::<f64>() / hs.len() as f64)
        };
        let verdicts = all_verdicts(&records).map_err(err)?;
        let fraction = |epoch: usize| {
            let v: Vec<_> = verdicts.iter().filter(|v| v.layer == 2 && v.epoch == epoch).collect();
            v.iter().filter(|v| v.selective).count() as f64 / v.len() as f64
        };
        let (h_first, h_out) = (entropy(0)?, entropy(2)?);
        let (f0, f_last) = (fraction(0), fraction(last));
        entropy_wins += (h_out < h_first) as usize;
        fraction_wins += (f_last > f0) as usize;
        rows.push(format!("H {h_out:.3}<{h_first:.3} sel {f0:.2}->{f_last:.2}"));
    }
    let (p_entropy, p_fraction) = (sign_test(entropy_wins, seeds as usize), sign_test(fraction_wins, seeds as usize));
    Ok((
        p_entropy <= 0.05 && p_fraction <= 0.05,
        format!(
            "output-layer entropy below first layer in {entropy_wins}/{seeds} seeds (sign test p={p_entropy:.3}); output selective fraction above epoch 0 in {fraction_wins}/{seeds} (p={p_fraction:.3}); need p <= 0.05 [{}]",
            rows.join("; ")
        ),
    ))
}

// Analysis.

fn analysis_oracles() -> Verdict {
    let mut p = vec![0.0; 10];
    p[0] = 0.5;
    p[1] = 0.5;
    let h = normalized_entropy(&p).map_err(err)?;
    let entropy_err = (h - 2f64.ln() / 10f64.ln()).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_dist: f64 = 0.0;
    for count in [2, 3, 5, 8, 13] {
        let vs: Vec<Vec<f64>> = (0..count).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        let got = latent_distances(&refs).map_err(err)?;
        let (mut e, mut c, mut n) = (0.0, 0.0, 0.0);
        for i in 0..count {
            for j in i + 1..count {
                let d: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let dot: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                let na: f64 = vs[i].iter().map(|a| a * a).sum::<f64>().sqrt();
                let nb: f64 = vs[j].iter().map(|a| a * a).sum::<f64>().sqrt();
                e += d;
                c += dot / (na * nb);
                n += 1.0;
            }
        }
        worst_dist = worst_dist.max((got.mean_euclidean - e / n).abs());
        worst_dist = worst_dist.max((got.mean_cosine.ok_or("no cosine mean")? - c / n).abs());
    }

    let mut ordered = 0;
    let mut triples = 0;
    for side in [16, 32, 64] {
        let grid = LatentGrid::new(4, 8).map_err(err)?;
        let canvas = Canvas::new(side, side, 1).map_err(err)?;
        let g = Procedural::new(grid, canvas).map_err(err)?;
        for _ in 0..5 {
            let flat = g.decode(&grid.centre()).map_err(err)?;
            let orientation = [0, 4][rng.random_range(0..2)];
            let idx = LatentIndex(vec![orientation, rng.random_range(0..2), rng.random_range(0..8), 7]);
            let grating = g.decode(&idx).map_err(err)?;
            let noise: Vec<f32> = (0..canvas.len()).map(|_| rng.random::<f32>()).collect();
            let noise = Stimulus::new(canvas, noise, LatentIndex(vec![0]), "noise").map_err(err)?;
            let (a, b, c) =
                (compression_complexity(&flat), compression_complexity(&grating), compression_complexity(&noise));
            ordered += (a < b && b < c) as usize;
            triples += 1;
        }
    }
    Ok((
        entropy_err <= 1e-12 && worst_dist <= 1e-12 && ordered == triples,
        format!(
            "entropy of (0.5, 0.5, 0 x 8) off by {entropy_err:.1e} (tol 1e-12); distances off by {worst_dist:.1e} (tol 1e-12); {ordered}/{triples} triples ordered constant < grating < noise"
        ),
    ))
}

// Determinism.

fn full_run(out: &Path) -> spikemei::Result<()> {
    let mut c = ExperimentConfig::from_toml(
        "seed = 17\nbudget = 300\n[train]\nepochs = 6\nsnapshot_every = 3\n[targets]\nneurons_per_layer = 3\n",
    )?;
    c.out = Some(out.to_path_buf());
    run_training_with_snapshots(&c, out)?;
    run_mei_sweep(&c, out)?;
    run_report(out)?;
    Ok(())
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    full_run(a.path()).map_err(err)?;
    // The second run on two workers: scheduling must not leak into results.
    spikemei::harness::with_workers(2, || full_run(b.path())).map_err(err)?.map_err(err)?;
    let mut differing = Vec::new();
    for cmd in ["train", "sweep", "report"] {
        let x = std::fs::read(RunManifest::path(a.path(), cmd)).map_err(err)?;
        let y = std::fs::read(RunManifest::path(b.path(), cmd)).map_err(err)?;
        if x != y {
            differing.push(cmd);
        }
    }

    let manifest = RunManifest::read(a.path(), "sweep").map_err(err)?;
    let evaluations = manifest.summary["evaluations"].as_u64().ok_or("no evaluation count")? as usize;
    let calls = manifest.summary["objective_calls"].as_u64().ok_or("no call count")? as usize;
    let cells = load_cells(a.path()).map_err(err)?;
    let mut history_rows = 0;
    let mut record_sum = 0;
    let mut at_budget = 0;
    for (dir, cell) in &cells {
        let text = std::fs::read_to_string(dir.join("history.csv")).map_err(err)?;
        history_rows += text.lines().count() - 1;
        record_sum += cell.record.evaluations;
        at_budget += (cell.record.evaluations == 300 || cell.stalled) as usize;
    }
    let reconciled =
        evaluations == calls && calls == history_rows && history_rows == record_sum && at_budget == cells.len();
    Ok((
        differing.is_empty() && reconciled,
        format!(
            "manifests differing between two clean runs: {}; {} cells: manifest {evaluations} evaluations, {calls} objective calls, {history_rows} history rows, {record_sum} in records; {at_budget} cells spent exactly their budget",
            if differing.is_empty() { "none".into() } else { differing.join(", ") },
            cells.len()
        ),
    ))
}

fn main() {
    let mut suite = Suite { failed: Vec::new(), total: 0 };
    suite.run("tt-oracles", minutes(2), tt_oracles);
    suite.run("protes-benchmark", minutes(5), protes_benchmark);
    suite.run("lif-dynamics", Duration::from_secs(30), lif_suite);
    suite.run("toy-training", minutes(5), toy_training);
    suite.run("wired-neuron-mei", minutes(3), wired_neuron);
    suite.run("selectivity-trend", minutes(10), selectivity_trend);
    suite.run("analysis-oracles", minutes(1), analysis_oracles);
    suite.run("determinism-and-budget", minutes(5), determinism);
    println!(
        "acceptance: {}/{} criteria passed{}",
        suite.total - suite.failed.len(),
        suite.total,
        if suite.failed.is_empty() { String::new() } else { format!("; failing: {}", suite.failed.join(", ")) }
    );
    let strict = std::env::var("SPIKEMEI_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !suite.failed.is_empty() {
        std::process::exit(1);
    }
}
