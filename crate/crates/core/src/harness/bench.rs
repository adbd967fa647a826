//! Optimizer benchmark: every method on every problem of the standard suite,
//! repeated with derived seeds, scored against the brute-force optimum.
//!
//! Tables written to `<out>/bench/`:
//!
//! ```text
//! runs.csv     problem,method,repeat,seed,best,optimum,hit,evaluations
//! summary.csv  problem,method,runs,hits,median_best
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{write_timings, RunManifest};
use super::{derive_seed_from, write_atomic, ExperimentConfig};
use crate::error::{Error, Result};
use crate::optimizer::benchmarks::{standard_suite, BenchmarkProblem};
use crate::optimizer::{optimize, Method, ObjectiveAdapter, ProtesConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub seed: u64,
    pub budget: usize,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub protes: ProtesConfig,
}

impl BenchSettings {
    /// The config's methods plus the random-search reference.
    pub fn from_config(config: &ExperimentConfig, repeats: usize) -> Self {
        let mut methods = config.optimizer.methods.clone();
        if !methods.contains(&Method::RandomSearch) {
            methods.push(Method::RandomSearch);
        }
        BenchSettings {
            seed: config.seed,
            budget: config.budget,
            methods,
            repeats,
            protes: config.optimizer.protes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub problem: String,
    pub method: Method,
    pub repeat: usize,
    pub seed: u64,
    pub best: f64,
    pub optimum: f64,
    pub hit: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub problem: String,
    pub method: Method,
    pub runs: usize,
    pub hits: usize,
    pub median_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub runs: Vec<BenchRun>,
    /// One entry per (problem, method), suite order then method order.
    pub cells: Vec<BenchCell>,
}

impl BenchSummary {
    pub fn cell(&self, problem: &str, method: Method) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.problem == problem && c.method == method)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Runs the benchmark in memory on the current rayon pool.
pub fn benchmark(settings: &BenchSettings, problems: &[BenchmarkProblem]) -> Result<BenchSummary> {
    if settings.repeats == 0 || settings.methods.is_empty() {
        return Err(Error::input("the benchmark needs at least one method and one repeat"));
    }
    let optima: Vec<f64> = problems.par_iter().map(|p| p.brute_force_max().1).collect();
    let mut jobs = Vec::new();
    for (pi, p) in problems.iter().enumerate() {
        for &method in &settings.methods {
            for repeat in 0..settings.repeats {
                jobs.push((pi, p, method, repeat));
            }
        }
    }
    let runs: Vec<BenchRun> = jobs
        .par_iter()
        .map(|&(pi, p, method, repeat)| {
            let seed = derive_seed_from(&format!("{}/bench/{}/{method}/{repeat}", settings.seed, p.name));
            let f = |i: &crate::tt::LatentIndex| p.value(i);
            let adapter = ObjectiveAdapter::new(&f, settings.budget);
            let config = ProtesConfig { seed, ..settings.protes.clone() };
            let r = optimize(method, &adapter, &p.shape, &config)?;
            Ok(BenchRun {
                problem: p.name.clone(),
                method,
                repeat,
                seed,
                best: r.best_value,
                optimum: optima[pi],
                hit: r.best_value >= optima[pi],
                evaluations: r.evaluations_used,
            })
        })
        .collect::<Result<_>>()?;
    let cells = runs
        .chunks(settings.repeats)
        .map(|chunk| BenchCell {
            problem: chunk[0].problem.clone(),
            method: chunk[0].method,
            runs: chunk.len(),
            hits: chunk.iter().filter(|r| r.hit).count(),
            median_best: median(chunk.iter().map(|r| r.best).collect()),
        })
        .collect();
    Ok(BenchSummary { runs, cells })
}

/// Runs the standard suite and writes the tables and the bench manifest.
pub fn run_benchmarks(settings: &BenchSettings, out: &Path) -> Result<BenchSummary> {
    let started = Instant::now();
    let dir = out.join("bench");
    std::fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest::begin(out, "bench", serde_json::to_value(settings)?)?;
    let summary = benchmark(settings, &standard_suite())?;

    let mut t = String::from("problem,method,repeat,seed,best,optimum,hit,evaluations\n");
    for r in &summary.runs {
        writeln!(t, "{},{},{},{},{},{},{},{}", r.problem, r.method, r.repeat, r.seed, r.best, r.optimum, r.hit, r.evaluations)
            .unwrap();
    }
    write_atomic(&dir.join("runs.csv"), t.as_bytes())?;
    let mut t = String::from("problem,method,runs,hits,median_best\n");
    for c in &summary.cells {
        writeln!(t, "{},{},{},{},{}", c.problem, c.method, c.runs, c.hits, c.median_best).unwrap();
    }
    write_atomic(&dir.join("summary.csv"), t.as_bytes())?;

    let hits: usize = summary.cells.iter().map(|c| c.hits).sum();
    manifest.finish(out, &["bench"], true, json!({"runs": summary.runs.len(), "hits": hits}))?;
    write_timings(out, "bench", &json!({"total_seconds": started.elapsed().as_secs_f64()}))?;
    Ok(summary)
}
