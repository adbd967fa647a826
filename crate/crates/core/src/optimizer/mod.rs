//! Black-box optimizers over discrete grids.
//!
//! Every optimizer talks to the target through an [`ObjectiveAdapter`], which
//! owns the evaluation budget. The adapter counts callback invocations and
//! refuses any call that would exceed the budget, so `evaluations_used` in an
//! [`OptimizationRecord`] is exact by construction.

mod baselines;
pub mod benchmarks;
mod protes;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tt::LatentIndex;

pub use baselines::{HillClimbState, RandomSearchState};
pub use protes::{fermi_dirac_weight, ProtesConfig, ProtesState, UpdateRule, Weighting};

/// A target function over grid indices.
pub trait Objective: Sync {
    fn evaluate(&self, index: &LatentIndex) -> Result<f64>;

    /// Whether several evaluations may run at the same time.
    fn concurrent(&self) -> bool {
        false
    }
}

impl<F> Objective for F
where
    F: Fn(&LatentIndex) -> f64 + Sync,
{
    fn evaluate(&self, index: &LatentIndex) -> Result<f64> {
        Ok(self(index))
    }

    fn concurrent(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

impl Direction {
    /// Maps a raw value to a score where larger is always better.
    pub fn score(self, raw: f64) -> f64 {
        let s = match self {
            Direction::Maximize => raw,
            Direction::Minimize => -raw,
        };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }
}

/// Additive Gaussian measurement noise, for exercising optimizers on noisy
/// targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub std: f64,
    pub seed: u64,
}

/// Budgeted, counting front for an [`Objective`].
pub struct ObjectiveAdapter<'a> {
    target: &'a dyn Objective,
    direction: Direction,
    budget: usize,
    used: AtomicUsize,
    noise: Option<Mutex<(Normal<f64>, ChaCha8Rng)>>,
    cache: Option<Mutex<HashMap<LatentIndex, f64>>>,
    parallel: bool,
}

impl<'a> ObjectiveAdapter<'a> {
    pub fn new(target: &'a dyn Objective, budget: usize) -> Self {
        ObjectiveAdapter {
            target,
            direction: Direction::Maximize,
            budget,
            used: AtomicUsize::new(0),
            noise: None,
            cache: None,
            parallel: false,
        }
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Result<Self> {
        let normal = Normal::new(0.0, noise.std).map_err(|e| Error::input(format!("noise model: {e}")))?;
        self.noise = Some(Mutex::new((normal, ChaCha8Rng::seed_from_u64(noise.seed))));
        Ok(self)
    }

    /// Remember values per index and skip repeated calls. Only sound for
    /// deterministic targets.
    pub fn with_cache(mut self, enabled: bool) -> Self {
        self.cache = enabled.then(|| Mutex::new(HashMap::new()));
        self
    }

    /// Evaluate batches in parallel when the target allows it.
    pub fn parallel(mut self, enabled: bool) -> Self {
        self.parallel = enabled;
        self
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used()
    }

    pub fn get_direction(&self) -> Direction {
        self.direction
    }

    pub fn caching(&self) -> bool {
        self.cache.is_some()
    }

    /// Number of indices in `batch` that would reach the target.
    pub fn cost_of(&self, batch: &[LatentIndex]) -> usize {
        match &self.cache {
            None => batch.len(),
            Some(cache) => {
                let cache = cache.lock().unwrap();
                let mut fresh: Vec<&LatentIndex> = batch.iter().filter(|i| !cache.contains_key(i)).collect();
                fresh.sort();
                fresh.dedup();
                fresh.len()
            }
        }
    }

    /// Evaluates every index, returning raw values in batch order together with
    /// a flag per entry telling whether it was a fresh target call.
    pub fn evaluate_batch(&self, batch: &[LatentIndex]) -> Result<Vec<(f64, bool)>> {
        let cost = self.cost_of(batch);
        let used = self.used();
        if used + cost > self.budget {
            return Err(Error::BudgetExhausted { used, budget: self.budget });
        }
        // Indices that need a real call, in first-occurrence order.
        let mut fresh: Vec<usize> = Vec::new();
        match &self.cache {
            None => fresh.extend(0..batch.len()),
            Some(cache) => {
                let cache = cache.lock().unwrap();
                let mut seen = std::collections::HashSet::new();
                for (pos, idx) in batch.iter().enumerate() {
                    if !cache.contains_key(idx) && seen.insert(idx) {
                        fresh.push(pos);
                    }
                }
            }
        }
        let call = |pos: &usize| self.target.evaluate(&batch[*pos]);
        let values: Vec<f64> = if self.parallel && self.target.concurrent() && fresh.len() > 1 {
            fresh.par_iter().map(call).collect::<Result<_>>()?
        } else {
            fresh.iter().map(call).collect::<Result<_>>()?
        };
        self.used.fetch_add(fresh.len(), Ordering::SeqCst);

        let mut noisy = values;
        if let Some(noise) = &self.noise {
            let mut guard = noise.lock().unwrap();
            let (normal, rng) = &mut *guard;
            for v in noisy.iter_mut() {
                *v += normal.sample(rng);
            }
        }

        let mut out = vec![(f64::NAN, false); batch.len()];
        for (&pos, &v) in fresh.iter().zip(&noisy) {
            out[pos] = (v, true);
        }
        if let Some(cache) = &self.cache {
            let mut cache = cache.lock().unwrap();
            for (&pos, &v) in fresh.iter().zip(&noisy) {
                cache.insert(batch[pos].clone(), v);
            }
            for (pos, slot) in out.iter_mut().enumerate() {
                if !slot.1 {
                    slot.0 = cache[&batch[pos]];
                }
            }
        }
        Ok(out)
    }
}

/// One target call as seen by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// 1-based count of target calls made so far, this one included.
    pub evaluation: usize,
    pub index: LatentIndex,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub method: String,
    pub direction: Direction,
    pub best_index: LatentIndex,
    pub best_value: f64,
    pub history: Vec<HistoryEntry>,
    pub evaluations_used: usize,
    /// Set when a cached run stopped because sampling produced nothing new.
    #[serde(default)]
    pub stalled: bool,
}

impl OptimizationRecord {
    /// Writes the per-evaluation history table.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eval_index,latent_index,raw_value,best_so_far")?;
        for h in &self.history {
            writeln!(w, "{},{},{},{}", h.evaluation, h.index, h.value, h.best_so_far)?;
        }
        Ok(())
    }

    /// Best-so-far value after `evaluations` target calls, if any were made.
    pub fn best_after(&self, evaluations: usize) -> Option<f64> {
        self.history.iter().take_while(|h| h.evaluation <= evaluations).last().map(|h| h.best_so_far)
    }
}

/// Parses a history table written by [`OptimizationRecord::write_history_csv`].
pub fn read_history_csv(text: &str) -> Result<Vec<HistoryEntry>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("eval_index,latent_index,raw_value,best_so_far") => {}
        _ => return Err(Error::Format("history table has an unexpected header".into())),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("bad history row {line:?}"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(HistoryEntry {
                evaluation: f[0].parse().map_err(|_| bad())?,
                index: LatentIndex::parse(f[1])?,
                value: f[2].parse().map_err(|_| bad())?,
                best_so_far: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Best-so-far bookkeeping shared by all optimizers.
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    direction: Direction,
    best: Option<(LatentIndex, f64)>,
    history: Vec<HistoryEntry>,
    calls: usize,
}

impl Tracker {
    pub(crate) fn new(direction: Direction) -> Self {
        Tracker { direction, best: None, history: Vec::new(), calls: 0 }
    }

    /// Records one value; `fresh` marks a real target call.
    pub(crate) fn observe(&mut self, index: &LatentIndex, raw: f64, fresh: bool) {
        let score = self.direction.score(raw);
        let improved = match &self.best {
            None => true,
            Some((_, best)) => score > self.direction.score(*best),
        };
        if improved {
            self.best = Some((index.clone(), raw));
        }
        if fresh {
            self.calls += 1;
            let best_so_far = self.best.as_ref().map(|b| b.1).unwrap_or(raw);
            self.history.push(HistoryEntry { evaluation: self.calls, index: index.clone(), value: raw, best_so_far });
        }
    }

    pub(crate) fn best_score(&self) -> Option<f64> {
        self.best.as_ref().map(|(_, v)| self.direction.score(*v))
    }

    pub(crate) fn best(&self) -> Option<&(LatentIndex, f64)> {
        self.best.as_ref()
    }

    pub(crate) fn into_record(self, method: &str, used: usize, stalled: bool) -> Result<OptimizationRecord> {
        let (best_index, best_value) =
            self.best.ok_or_else(|| Error::Evaluation("optimizer finished without any evaluation".into()))?;
        Ok(OptimizationRecord {
            method: method.to_string(),
            direction: self.direction,
            best_index,
            best_value,
            history: self.history,
            evaluations_used: used,
            stalled,
        })
    }
}

/// Consecutive steps without a fresh evaluation after which a cached run
/// gives up.
pub(crate) const MAX_STALL_STEPS: usize = 100;

/// Outcome of a single optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Exhausted,
}

/// Optimizer selection, including the three PROTES presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Batch 10, one elite, no quantization.
    Protes,
    /// Batch 5, one elite, binary mode quantization.
    ProtesS,
    /// Batch 25, five elites, binary mode quantization.
    ProtesB,
    RandomSearch,
    HillClimb,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Protes, Method::ProtesS, Method::ProtesB, Method::RandomSearch, Method::HillClimb];
    pub const PROTES_PRESETS: [Method; 3] = [Method::Protes, Method::ProtesS, Method::ProtesB];

    pub fn name(self) -> &'static str {
        match self {
            Method::Protes => "protes",
            Method::ProtesS => "protes_s",
            Method::ProtesB => "protes_b",
            Method::RandomSearch => "random_search",
            Method::HillClimb => "hill_climb",
        }
    }

    pub fn is_protes(self) -> bool {
        matches!(self, Method::Protes | Method::ProtesS | Method::ProtesB)
    }

    /// Applies the preset's batch size, elite count and quantization on top of
    /// `base`. Non-PROTES methods return `base` unchanged.
    pub fn configure(self, base: &ProtesConfig) -> ProtesConfig {
        let mut c = base.clone();
        match self {
            Method::Protes => {
                c.batch = 10;
                c.k_top = 1;
                c.quantization = None;
            }
            Method::ProtesS => {
                c.batch = 5;
                c.k_top = 1;
                c.quantization = Some(base.quantization.unwrap_or(2));
            }
            Method::ProtesB => {
                c.batch = 25;
                c.k_top = 5;
                c.quantization = Some(base.quantization.unwrap_or(2));
            }
            Method::RandomSearch | Method::HillClimb => {}
        }
        c
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::input(format!("unknown optimization method {s:?}")))
    }
}

/// Runs `method` until the adapter's budget is spent.
///
/// For PROTES presets, `config` supplies the shared hyperparameters (rate,
/// rank, gradient steps, weighting, seed); the preset overrides batch size,
/// elite count and quantization. Baselines use only `config.seed`.
pub fn optimize(
    method: Method,
    objective: &ObjectiveAdapter<'_>,
    shape: &[usize],
    config: &ProtesConfig,
) -> Result<OptimizationRecord> {
    if objective.budget() == 0 {
        return Err(Error::input("budget must be at least 1"));
    }
    if shape.is_empty() || shape.iter().any(|&n| n < 2) {
        return Err(Error::input("every grid mode needs at least 2 points"));
    }
    match method {
        Method::Protes | Method::ProtesS | Method::ProtesB => {
            let cfg = method.configure(config);
            if objective.remaining() < cfg.batch {
                return Err(Error::input(format!(
                    "budget {} is below the batch size {} of {method}",
                    objective.remaining(),
                    cfg.batch
                )));
            }
            let mut state = ProtesState::new(shape, cfg, objective.get_direction())?;
            while state.step(objective)? == StepOutcome::Continue {}
            state.into_record(method.name(), objective.used())
        }
        Method::RandomSearch => {
            let mut state = RandomSearchState::new(shape, config.seed, objective.get_direction());
            while state.step(objective)? == StepOutcome::Continue {}
            state.into_record(objective.used())
        }
        Method::HillClimb => {
            let mut state = HillClimbState::new(shape, config.seed, objective.get_direction());
            while state.step(objective)? == StepOutcome::Continue {}
            state.into_record(objective.used())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cma_es".parse::<Method>().is_err());
    }

    #[test]
    fn presets() {
        let base = ProtesConfig::default();
        let p = Method::Protes.configure(&base);
        assert_eq!((p.batch, p.k_top, p.quantization), (10, 1, None));
        let s = Method::ProtesS.configure(&base);
        assert_eq!((s.batch, s.k_top, s.quantization), (5, 1, Some(2)));
        let b = Method::ProtesB.configure(&base);
        assert_eq!((b.batch, b.k_top, b.quantization), (25, 5, Some(2)));
    }

    #[test]
    fn adapter_refuses_over_budget() {
        let f = |_: &LatentIndex| 1.0;
        let a = ObjectiveAdapter::new(&f, 2);
        let batch = vec![LatentIndex(vec![0]); 3];
        assert!(matches!(a.evaluate_batch(&batch), Err(Error::BudgetExhausted { .. })));
        assert_eq!(a.used(), 0);
        a.evaluate_batch(&batch[..2]).unwrap();
        assert_eq!(a.remaining(), 0);
    }

    #[test]
    fn cache_skips_repeats() {
        let f = |i: &LatentIndex| i.0[0] as f64;
        let a = ObjectiveAdapter::new(&f, 10).with_cache(true);
        let batch = vec![LatentIndex(vec![1]), LatentIndex(vec![1]), LatentIndex(vec![2])];
        let out = a.evaluate_batch(&batch).unwrap();
        assert_eq!(a.used(), 2);
        assert_eq!(out, vec![(1.0, true), (1.0, false), (2.0, true)]);
        a.evaluate_batch(&batch).unwrap();
        assert_eq!(a.used(), 2);
    }

    #[test]
    fn budget_zero_is_rejected() {
        let f = |_: &LatentIndex| 0.0;
        let a = ObjectiveAdapter::new(&f, 0);
        assert!(optimize(Method::RandomSearch, &a, &[4, 4], &ProtesConfig::default()).is_err());
        let a = ObjectiveAdapter::new(&f, 9);
        assert!(optimize(Method::Protes, &a, &[4, 4], &ProtesConfig::default()).is_err());
        let a = ObjectiveAdapter::new(&f, 10);
        assert!(optimize(Method::Protes, &a, &[4, 4], &ProtesConfig::default()).is_ok());
    }

    #[test]
    fn history_csv_round_trip() {
        let f = |i: &LatentIndex| (i.0[0] * 2 + i.0[1]) as f64;
        let a = ObjectiveAdapter::new(&f, 12);
        let rec = optimize(Method::RandomSearch, &a, &[3, 2], &ProtesConfig::default()).unwrap();
        let mut buf = Vec::new();
        rec.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eval_index,latent_index,raw_value,best_so_far\n"));
        assert_eq!(text.lines().count(), 13);
        assert_eq!(read_history_csv(&text).unwrap(), rec.history);
    }

    #[test]
    fn noise_is_seeded() {
        let f = |_: &LatentIndex| 0.0;
        let batch = vec![LatentIndex(vec![0]); 4];
        let run = || {
            let a = ObjectiveAdapter::new(&f, 4).with_noise(NoiseModel { std: 1.0, seed: 3 }).unwrap();
            a.evaluate_batch(&batch).unwrap()
        };
        let first = run();
        assert_eq!(first, run());
        assert!(first.iter().any(|(v, _)| *v != 0.0));
    }
}
