//! Optimizer contracts: budget accounting, determinism, preset behaviour and
//! the baselines' statistical guarantees.

use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikemei::optimizer::{Direction, Method, Objective, ObjectiveAdapter, ProtesConfig, ProtesState, StepOutcome};
use spikemei::tt::{LatentIndex, QuantizationMap};
use spikemei::{optimize, Result};

struct Counting<F> {
    calls: AtomicUsize,
    f: F,
}

impl<F: Fn(&LatentIndex) -> f64 + Sync> Objective for Counting<F> {
    fn evaluate(&self, index: &LatentIndex) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok((self.f)(index))
    }
}

fn counting<F: Fn(&LatentIndex) -> f64 + Sync>(f: F) -> Counting<F> {
    Counting { calls: AtomicUsize::new(0), f }
}

fn neg_distance(peak: &[usize]) -> impl Fn(&LatentIndex) -> f64 + Sync + '_ {
    move |i: &LatentIndex| {
        -i.digits().iter().zip(peak).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum::<f64>().sqrt()
    }
}

fn seeded(seed: u64) -> ProtesConfig {
    ProtesConfig { seed, ..Default::default() }
}

/// Runs until the indicator's index is first evaluated, then records the
/// exact probability of sampling it after each of `steps` further steps.
fn indicator_trace(seed: u64, steps: usize) -> Option<Vec<f64>> {
    let target = LatentIndex(vec![2, 0, 3]);
    let f = |i: &LatentIndex| if *i == target { 1.0 } else { 0.0 };
    let adapter = ObjectiveAdapter::new(&f, 5000);
    let mut state = ProtesState::new(&[4, 4, 4], seeded(seed), Direction::Maximize).unwrap();
    while state.best().map(|b| b.1) != Some(1.0) {
        if state.step(&adapter).unwrap() == StepOutcome::Exhausted {
            return None;
        }
    }
    let prob = |s: &ProtesState| s.density().log_likelihood_grad(std::slice::from_ref(&target)).unwrap().value.exp();
    let mut freq = vec![prob(&state)];
    for _ in 0..steps {
        state.step(&adapter).unwrap();
        assert_eq!(state.best().unwrap().1, 1.0);
        freq.push(prob(&state));
    }
    Some(freq)
}

#[test]
fn indicator_frequency_rises_after_discovery() {
    let freq = indicator_trace(0, 20).unwrap();
    let avg: Vec<f64> = freq.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    for w in avg.windows(2) {
        assert!(w[1] >= w[0], "moving average fell: {avg:?}");
    }
    assert!(avg[avg.len() - 1] > avg[0]);
}

#[test]
fn indicator_frequency_rises_across_seeds() {
    let rising = (0..10)
        .filter(|&seed| indicator_trace(seed, 20).is_some_and(|f| f[20] > f[0]))
        .count();
    assert!(rising >= 9, "{rising}/10");
}

#[test]
fn constant_objective_keeps_a_flat_history() {
    let f = |_: &LatentIndex| 7.5;
    let adapter = ObjectiveAdapter::new(&f, 300);
    let rec = optimize(Method::Protes, &adapter, &[4, 4, 4], &seeded(1)).unwrap();
    assert_eq!(rec.history.len(), 300);
    assert!(rec.history.iter().all(|h| h.best_so_far == 7.5));
    assert_eq!(rec.best_value, 7.5);
    // Ties keep the first observation.
    assert_eq!(rec.best_index, rec.history[0].index);
}

#[test]
fn every_preset_finds_a_hidden_peak_on_4096_points() {
    let peak = [1, 3, 0, 2, 3, 1];
    let f = neg_distance(&peak);
    for method in Method::PROTES_PRESETS {
        let hits = (0..10)
            .filter(|&seed| {
                let adapter = ObjectiveAdapter::new(&f, 2000);
                optimize(method, &adapter, &[4; 6], &seeded(seed)).unwrap().best_value == 0.0
            })
            .count();
        assert!(hits >= 9, "{method}: {hits}/10");
    }
}

#[test]
fn random_search_hit_rate_matches_binomial() {
    // 1 - (1 - 1/4096)^4096 ~ 0.632.
    let target = LatentIndex(vec![3, 1, 0, 2, 2, 1]);
    let f = |i: &LatentIndex| if *i == target { 1.0 } else { 0.0 };
    let hits = (0..100)
        .filter(|&seed| {
            let adapter = ObjectiveAdapter::new(&f, 4096);
            optimize(Method::RandomSearch, &adapter, &[4; 6], &seeded(seed)).unwrap().best_value == 1.0
        })
        .count();
    assert!((50..=75).contains(&hits), "hit rate {hits}/100");
}

#[test]
fn hill_climb_solves_separable_objectives() {
    let (d, n) = (6, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let table: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let optimum: f64 = table.iter().map(|row| row.iter().cloned().fold(f64::MIN, f64::max)).sum();
    let f = |i: &LatentIndex| i.digits().iter().zip(&table).map(|(&k, row)| row[k]).sum::<f64>();
    let solved = (0..100)
        .filter(|&seed| {
            let adapter = ObjectiveAdapter::new(&f, d * n * 10);
            let rec = optimize(Method::HillClimb, &adapter, &[n; 6], &seeded(seed)).unwrap();
            (rec.best_value - optimum).abs() <= 1e-12
        })
        .count();
    assert!(solved >= 95, "{solved}/100");
}

#[test]
fn budget_is_counted_exactly() {
    for method in Method::ALL {
        for budget in [27, 100, 257] {
            for cache in [false, true] {
                let obj = counting(neg_distance(&[0, 1, 2, 3]));
                let adapter = ObjectiveAdapter::new(&obj, budget).with_cache(cache);
                let rec = optimize(method, &adapter, &[4; 4], &seeded(5)).unwrap();
                let calls = obj.calls.load(Ordering::SeqCst);
                assert_eq!(rec.evaluations_used, calls, "{method} budget {budget} cache {cache}");
                assert!(calls <= budget);
                if !cache {
                    assert_eq!(calls, budget);
                }
                assert_eq!(rec.history.len(), calls);
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let f = neg_distance(&[5, 1, 7, 0]);
    for method in Method::ALL {
        let run = |parallel: bool| {
            let adapter = ObjectiveAdapter::new(&f, 400).parallel(parallel);
            optimize(method, &adapter, &[8; 4], &seeded(11)).unwrap()
        };
        let a = run(false);
        assert_eq!(a, run(false));
        assert_eq!(a, run(true));
    }
}

#[test]
fn maximizing_f_matches_minimizing_its_negation() {
    let f = neg_distance(&[2, 2, 0, 3, 1]);
    let g = |i: &LatentIndex| -f(i);
    for method in Method::ALL {
        let max = ObjectiveAdapter::new(&f, 300);
        let min = ObjectiveAdapter::new(&g, 300).direction(Direction::Minimize);
        let a = optimize(method, &max, &[4; 5], &seeded(2)).unwrap();
        let b = optimize(method, &min, &[4; 5], &seeded(2)).unwrap();
        let ia: Vec<_> = a.history.iter().map(|h| &h.index).collect();
        let ib: Vec<_> = b.history.iter().map(|h| &h.index).collect();
        assert_eq!(ia, ib, "{method}");
        assert_eq!(a.best_value, -b.best_value);
    }
}

#[test]
fn budget_below_batch_is_rejected() {
    let f = |_: &LatentIndex| 0.0;
    let adapter = ObjectiveAdapter::new(&f, 4);
    assert!(optimize(Method::Protes, &adapter, &[4, 4], &seeded(0)).unwrap_err().is_input());
    let adapter = ObjectiveAdapter::new(&f, 0);
    assert!(optimize(Method::RandomSearch, &adapter, &[4, 4], &seeded(0)).unwrap_err().is_input());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quantization_does_not_change_objective_values(
        exps in proptest::collection::vec(1u32..4, 1..4),
        raw in proptest::collection::vec(0usize..1000, 4),
    ) {
        let shape: Vec<usize> = exps.iter().map(|&e| 2usize.pow(e)).collect();
        let map = QuantizationMap::new(&shape, 2).unwrap();
        let f = |i: &LatentIndex| i.digits().iter().enumerate().map(|(p, &k)| ((p + 1) * k) as f64).sum::<f64>();
        let idx = LatentIndex(shape.iter().zip(&raw).map(|(&n, &r)| r % n).collect());
        let round = map.dequantize(&map.quantize(&idx).unwrap()).unwrap();
        prop_assert_eq!(f(&round), f(&idx));
    }

    #[test]
    fn history_is_monotone_and_within_budget(seed in 0u64..500, budget in 25usize..120, m in 0usize..5) {
        let method = Method::ALL[m];
        let f = |i: &LatentIndex| ((i.digits()[0] * 7 + i.digits()[1] * 3) % 11) as f64;
        let adapter = ObjectiveAdapter::new(&f, budget);
        let rec = optimize(method, &adapter, &[4, 4, 4], &seeded(seed)).unwrap();
        prop_assert!(rec.evaluations_used <= budget);
        prop_assert!(rec.history.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
    }
}
