//! PROTES: optimization by sampling from a tensor-train density and pulling
//! that density toward the best samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Direction, ObjectiveAdapter, OptimizationRecord, StepOutcome, Tracker, MAX_STALL_STEPS};
use crate::error::{Error, Result};
use crate::tt::{LatentIndex, QuantizationMap, TensorTrain, TtGradient};

/// How batch samples enter the density update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Weighting {
    /// Equal weight on the `k_top` best samples of each batch.
    Elite,
    /// Fermi-Dirac weight on every sample. `temperature: None` picks 1% of
    /// the batch's value range.
    FermiDirac { energy: f64, temperature: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtesConfig {
    /// Samples drawn per step (K).
    pub batch: usize,
    /// Elite samples used for the update.
    pub k_top: usize,
    pub learning_rate: f64,
    pub grad_steps: usize,
    pub rank: usize,
    /// Split every mode into modes of this size.
    pub quantization: Option<usize>,
    pub weighting: Weighting,
    pub seed: u64,
    /// Relative jitter applied to the uniform initial cores.
    pub init_jitter: f64,
    pub cache: bool,
    pub update: UpdateRule,
}

/// How the log-likelihood gradient moves the cores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// `cores += lr * grad`.
    #[default]
    Plain,
    /// Adam with the usual moment decays (0.9, 0.999).
    Adam,
}

impl Default for ProtesConfig {
    fn default() -> Self {
        ProtesConfig {
            batch: 10,
            k_top: 1,
            learning_rate: 0.05,
            grad_steps: 2,
            rank: 5,
            quantization: None,
            weighting: Weighting::Elite,
            seed: 0,
            init_jitter: 0.1,
            cache: false,
            update: UpdateRule::default(),
        }
    }
}

impl ProtesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::input("batch size must be at least 1"));
        }
        if self.k_top == 0 || self.k_top > self.batch {
            return Err(Error::input(format!("k_top {} must lie in 1..={}", self.k_top, self.batch)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning rate must be positive"));
        }
        if self.rank == 0 {
            return Err(Error::input("rank must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.init_jitter) {
            return Err(Error::input("init_jitter must lie in [0, 1)"));
        }
        if let Weighting::FermiDirac { temperature: Some(t), .. } = self.weighting {
            if !(t > 0.0) {
                return Err(Error::input("Fermi-Dirac temperature must be positive"));
            }
        }
        Ok(())
    }
}

/// `1 / (exp((f - y_min - E) / T) + 1)`, saturating instead of overflowing.
pub fn fermi_dirac_weight(f_value: f64, y_min: f64, energy: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::input("temperature must be positive"));
    }
    let x = (f_value - y_min - energy) / temperature;
    Ok(if x > 700.0 {
        0.0
    } else if x < -700.0 {
        1.0
    } else {
        1.0 / (x.exp() + 1.0)
    })
}

/// Live optimizer state: density, rng and best-so-far.
#[derive(Debug, Clone)]
pub struct ProtesState {
    tt: TensorTrain,
    config: ProtesConfig,
    map: Option<QuantizationMap>,
    rng: ChaCha8Rng,
    tracker: Tracker,
    stall_steps: usize,
    stalled: bool,
    steps: usize,
    adam: Option<AdamMoments>,
}

#[derive(Debug, Clone)]
struct AdamMoments {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    t: i32,
}

impl AdamMoments {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(tt: &TensorTrain) -> Self {
        let zeros: Vec<Vec<f64>> = tt.cores().iter().map(|c| vec![0.0; c.data().len()]).collect();
        AdamMoments { first: zeros.clone(), second: zeros, t: 0 }
    }

    /// Turns a raw gradient into the bias-corrected Adam direction, in place.
    fn direction(&mut self, grad: &mut TtGradient) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((g, m), v) in grad.cores.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for ((gi, mi), vi) in g.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = Self::BETA1 * *mi + (1.0 - Self::BETA1) * *gi;
                *vi = Self::BETA2 * *vi + (1.0 - Self::BETA2) * *gi * *gi;
                *gi = (*mi / c1) / ((*vi / c2).sqrt() + Self::EPS);
            }
        }
    }
}

impl ProtesState {
    pub fn new(shape: &[usize], config: ProtesConfig, direction: Direction) -> Result<Self> {
        config.validate()?;
        let map = config.quantization.map(|q| QuantizationMap::new(shape, q)).transpose()?;
        let tt_shape = map.as_ref().map(|m| m.quantized_shape()).unwrap_or_else(|| shape.to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut tt = TensorTrain::uniform(&tt_shape, config.rank)?;
        if config.init_jitter > 0.0 {
            // Constant cores give every rank channel the same gradient, so
            // the density would never leave rank one; jitter breaks the tie.
            for i in 0..tt.dim() {
                for v in tt.core_mut(i).data_mut() {
                    *v *= 1.0 + config.init_jitter * rng.random_range(-1.0..1.0);
                }
            }
        }
        Ok(ProtesState {
            tt,
            config,
            map,
            rng,
            tracker: Tracker::new(direction),
            stall_steps: 0,
            stalled: false,
            steps: 0,
            adam: None,
        })
    }

    pub fn density(&self) -> &TensorTrain {
        &self.tt
    }

    pub fn config(&self) -> &ProtesConfig {
        &self.config
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn best(&self) -> Option<&(LatentIndex, f64)> {
        self.tracker.best()
    }

    /// Draws `count` grid indices from the current density.
    pub fn sample_indices(&mut self, count: usize) -> Result<Vec<LatentIndex>> {
        let raw = self.tt.sample(count, &mut self.rng)?;
        match &self.map {
            None => Ok(raw),
            Some(map) => raw.iter().map(|q| map.dequantize(q)).collect(),
        }
    }

    /// One sample-evaluate-update round.
    pub fn step(&mut self, objective: &ObjectiveAdapter<'_>) -> Result<StepOutcome> {
        let remaining = objective.remaining();
        if remaining == 0 || self.stalled {
            return Ok(StepOutcome::Exhausted);
        }
        let mut batch = self.sample_indices(self.config.batch)?;
        if objective.caching() {
            while objective.cost_of(&batch) > remaining {
                batch.pop();
            }
        } else {
            batch.truncate(remaining);
        }
        let values = objective.evaluate_batch(&batch)?;
        let fresh = values.iter().filter(|v| v.1).count();
        for (idx, &(v, is_fresh)) in batch.iter().zip(&values) {
            self.tracker.observe(idx, v, is_fresh);
        }
        self.steps += 1;
        if fresh == 0 {
            self.stall_steps += 1;
            if self.stall_steps >= MAX_STALL_STEPS {
                self.stalled = true;
            }
        } else {
            self.stall_steps = 0;
        }

        let direction = objective.get_direction();
        let scores: Vec<f64> = values.iter().map(|&(v, _)| direction.score(v)).collect();
        let (selected, weights) = self.select(&batch, &scores)?;
        let selected = match &self.map {
            None => selected,
            Some(map) => selected.iter().map(|i| map.quantize(i)).collect::<Result<_>>()?,
        };
        for _ in 0..self.config.grad_steps {
            let mut grad = self.tt.weighted_log_likelihood_grad(&selected, &weights)?;
            if self.config.update == UpdateRule::Adam {
                let tt = &self.tt;
                self.adam.get_or_insert_with(|| AdamMoments::new(tt)).direction(&mut grad);
            }
            self.tt.apply_gradient(&grad, self.config.learning_rate)?;
        }
        if objective.remaining() == 0 || self.stalled {
            Ok(StepOutcome::Exhausted)
        } else {
            Ok(StepOutcome::Continue)
        }
    }

    /// Chooses the samples (and their weights) that drive the update.
    fn select(&self, batch: &[LatentIndex], scores: &[f64]) -> Result<(Vec<LatentIndex>, Vec<f64>)> {
        match self.config.weighting {
            Weighting::Elite => {
                let mut order: Vec<usize> = (0..batch.len()).collect();
                // Stable sort: ties keep first-occurrence order.
                order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
                order.truncate(self.config.k_top.min(batch.len()));
                let picked = order.iter().map(|&i| batch[i].clone()).collect();
                Ok((picked, vec![1.0; order.len()]))
            }
            Weighting::FermiDirac { energy, temperature } => {
                // The weighting is stated for minimization: f = -score.
                let f: Vec<f64> = scores.iter().map(|s| -s).collect();
                let y_min = -self.tracker.best_score().unwrap_or(f64::INFINITY);
                let (lo, hi) = f
                    .iter()
                    .filter(|v| v.is_finite())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                let t = temperature.unwrap_or_else(|| {
                    let range = hi - lo;
                    if range > 0.0 && range.is_finite() {
                        0.01 * range
                    } else {
                        1.0
                    }
                });
                let w = f
                    .iter()
                    .map(|&fv| if fv.is_finite() { fermi_dirac_weight(fv, y_min, energy, t) } else { Ok(0.0) })
                    .collect::<Result<Vec<_>>>()?;
                Ok((batch.to_vec(), w))
            }
        }
    }

    pub fn into_record(self, method: &str, used: usize) -> Result<OptimizationRecord> {
        let stalled = self.stalled;
        self.tracker.into_record(method, used, stalled)
    }
}
