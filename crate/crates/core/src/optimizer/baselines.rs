//! Non-tensor baselines: uniform random search and single-coordinate hill
//! climbing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Direction, ObjectiveAdapter, OptimizationRecord, StepOutcome, Tracker, MAX_STALL_STEPS};
use crate::error::Result;
use crate::tt::LatentIndex;

fn uniform_index(shape: &[usize], rng: &mut ChaCha8Rng) -> LatentIndex {
    LatentIndex(shape.iter().map(|&n| rng.random_range(0..n)).collect())
}

#[derive(Debug, Clone)]
pub struct RandomSearchState {
    shape: Vec<usize>,
    rng: ChaCha8Rng,
    tracker: Tracker,
    stall: Stall,
}

/// Counts cached repeats so a run whose every proposal is already known
/// terminates instead of spinning without spending budget.
#[derive(Debug, Clone, Default)]
struct Stall {
    steps: usize,
    stalled: bool,
}

impl Stall {
    fn record(&mut self, fresh: bool) {
        if fresh {
            self.steps = 0;
        } else {
            self.steps += 1;
            self.stalled |= self.steps >= MAX_STALL_STEPS;
        }
    }

    fn outcome(&self, objective: &ObjectiveAdapter<'_>) -> StepOutcome {
        if objective.remaining() == 0 || self.stalled {
            StepOutcome::Exhausted
        } else {
            StepOutcome::Continue
        }
    }
}

impl RandomSearchState {
    pub fn new(shape: &[usize], seed: u64, direction: Direction) -> Self {
        RandomSearchState {
            shape: shape.to_vec(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            tracker: Tracker::new(direction),
            stall: Stall::default(),
        }
    }

    pub fn step(&mut self, objective: &ObjectiveAdapter<'_>) -> Result<StepOutcome> {
        if self.stall.outcome(objective) == StepOutcome::Exhausted {
            return Ok(StepOutcome::Exhausted);
        }
        let idx = uniform_index(&self.shape, &mut self.rng);
        let (v, fresh) = objective.evaluate_batch(std::slice::from_ref(&idx))?[0];
        self.tracker.observe(&idx, v, fresh);
        self.stall.record(fresh);
        Ok(self.stall.outcome(objective))
    }

    pub fn best(&self) -> Option<&(LatentIndex, f64)> {
        self.tracker.best()
    }

    pub fn into_record(self, used: usize) -> Result<OptimizationRecord> {
        self.tracker.into_record("random_search", used, self.stall.stalled)
    }
}

/// Mutates one coordinate of the incumbent per step and keeps the move
/// unless it makes the objective worse.
#[derive(Debug, Clone)]
pub struct HillClimbState {
    shape: Vec<usize>,
    rng: ChaCha8Rng,
    tracker: Tracker,
    direction: Direction,
    incumbent: Option<(LatentIndex, f64)>,
    stall: Stall,
}

impl HillClimbState {
    pub fn new(shape: &[usize], seed: u64, direction: Direction) -> Self {
        HillClimbState {
            shape: shape.to_vec(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            tracker: Tracker::new(direction),
            direction,
            incumbent: None,
            stall: Stall::default(),
        }
    }

    pub fn incumbent(&self) -> Option<&(LatentIndex, f64)> {
        self.incumbent.as_ref()
    }

    /// Proposes a neighbour differing in exactly one coordinate.
    fn mutate(&mut self, from: &LatentIndex) -> LatentIndex {
        let mut digits = from.0.clone();
        let pos = self.rng.random_range(0..digits.len());
        let n = self.shape[pos];
        // Uniform over the n - 1 other digits.
        let mut d = self.rng.random_range(0..n - 1);
        if d >= digits[pos] {
            d += 1;
        }
        digits[pos] = d;
        LatentIndex(digits)
    }

    pub fn step(&mut self, objective: &ObjectiveAdapter<'_>) -> Result<StepOutcome> {
        if self.stall.outcome(objective) == StepOutcome::Exhausted {
            return Ok(StepOutcome::Exhausted);
        }
        let candidate = match self.incumbent.clone() {
            None => uniform_index(&self.shape, &mut self.rng),
            Some((inc, _)) => self.mutate(&inc),
        };
        let (v, fresh) = objective.evaluate_batch(std::slice::from_ref(&candidate))?[0];
        self.tracker.observe(&candidate, v, fresh);
        self.stall.record(fresh);
        let accept = match &self.incumbent {
            None => true,
            Some((_, cur)) => self.direction.score(v) >= self.direction.score(*cur),
        };
        if accept {
            self.incumbent = Some((candidate, v));
        }
        Ok(self.stall.outcome(objective))
    }

    pub fn into_record(self, used: usize) -> Result<OptimizationRecord> {
        self.tracker.into_record("hill_climb", used, self.stall.stalled)
    }
}
