//! Post-hoc statistics over most exciting inputs (MEIs).
//!
//! Everything here is a pure function of [`MeiRecord`]s or images.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::Method;
use crate::stimulus::Stimulus;
use crate::tt::LatentIndex;

/// Confidence and activation thresholds of the selectivity criterion, both
/// inclusive.
pub const SELECTIVITY_THRESHOLD: f64 = 0.75;

/// Tolerance on probability vectors summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Deflate level of the main complexity measure.
pub const COMPRESSION_LEVEL: u32 = 9;
/// Deflate level of the complementary, faster measure.
pub const FAST_COMPRESSION_LEVEL: u32 = 1;

/// The best input one optimizer run found for one neuron of one network
/// snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeiRecord {
    pub layer: usize,
    pub neuron: usize,
    pub method: String,
    pub epoch: usize,
    pub index: LatentIndex,
    /// Real latent coordinates of `index`.
    pub latent: Vec<f64>,
    /// Spike count over exposure, in `[0, 1]`.
    pub activation: f64,
    /// Largest activation the layer can reach; see
    /// [`SpikingNetwork::max_activation`](crate::SpikingNetwork::max_activation).
    pub activation_ceiling: f64,
    pub class_probs: Vec<f64>,
    pub evaluations: usize,
    pub seed: u64,
    pub generator: String,
}

impl MeiRecord {
    pub fn validate(&self) -> Result<()> {
        check_distribution(&self.class_probs)?;
        if !(0.0..=1.0).contains(&self.activation) {
            return Err(Error::input(format!("activation {} outside [0, 1]", self.activation)));
        }
        if !(self.activation_ceiling > 0.0 && self.activation_ceiling <= 1.0) {
            return Err(Error::input(format!("activation ceiling {} outside (0, 1]", self.activation_ceiling)));
        }
        Ok(())
    }

    /// Activation as a fraction of the reachable maximum.
    pub fn relative_activation(&self) -> f64 {
        self.activation / self.activation_ceiling
    }

    /// Most probable class; the first one on ties.
    pub fn predicted_class(&self) -> usize {
        argmax(&self.class_probs)
    }

    pub fn confidence(&self) -> f64 {
        self.class_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_distribution(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::input("empty probability vector"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::input("probabilities must be finite and nonnegative"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::input(format!("probabilities sum to {sum}")));
    }
    Ok(())
}

/// Shannon entropy divided by `ln C`. A single-class vector has entropy 0.
pub fn normalized_entropy(probs: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    if probs.len() == 1 {
        return Ok(0.0);
    }
    // H / ln C = 1 - sum p ln(pC) / ln C: both extremes come out exact, since
    // pC is exactly 1 for uniform vectors and p is exactly 1 when one-hot.
    let c = probs.len() as f64;
    let excess: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| p * (p * c).ln()).sum();
    Ok((1.0 - excess / c.ln()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectivityVerdict {
    pub layer: usize,
    pub neuron: usize,
    pub epoch: usize,
    pub selective: bool,
    /// The class every method agreed on, when they did.
    pub class: Option<usize>,
    pub stability: bool,
    pub confidence: bool,
    pub activation: bool,
}

/// Applies the three-part selectivity criterion to the records of one
/// neuron at one epoch.
///
/// Stability needs a record from each PROTES preset with the same predicted
/// class; a set missing a preset is never stable. Confidence and activation
/// must reach [`SELECTIVITY_THRESHOLD`] in every record, activation measured
/// relative to its ceiling.
pub fn selectivity_verdict(records: &[MeiRecord]) -> Result<SelectivityVerdict> {
    let first = records.first().ok_or_else(|| Error::input("selectivity needs at least one record"))?;
    for r in records {
        r.validate()?;
        if (r.layer, r.neuron, r.epoch) != (first.layer, first.neuron, first.epoch) {
            return Err(Error::input("selectivity records must share neuron and epoch"));
        }
    }
    let methods: BTreeSet<&str> = records.iter().map(|r| r.method.as_str()).collect();
    let all_presets = Method::PROTES_PRESETS.iter().all(|m| methods.contains(m.name()));
    let class = first.predicted_class();
    let stability = all_presets && records.iter().all(|r| r.predicted_class() == class);
    // A hair of slack so a ratio meant to be exactly 0.75 is not lost to rounding.
    let at_least = |v: f64| v >= SELECTIVITY_THRESHOLD - 1e-12;
    let confidence = records.iter().all(|r| at_least(r.confidence()));
    let activation = records.iter().all(|r| at_least(r.relative_activation()));
    Ok(SelectivityVerdict {
        layer: first.layer,
        neuron: first.neuron,
        epoch: first.epoch,
        selective: stability && confidence && activation,
        class: stability.then_some(class),
        stability,
        confidence,
        activation,
    })
}

/// A neuron that met the criterion for more than one class over training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabileNeuron {
    pub layer: usize,
    pub neuron: usize,
    /// Each class it was selective for, with the first epoch it was.
    pub classes: BTreeMap<usize, usize>,
}

/// Neurons selective for at least two distinct classes across the given
/// verdicts, in (layer, neuron) order.
pub fn labile_neurons(verdicts: &[SelectivityVerdict]) -> Vec<LabileNeuron> {
    let mut seen: BTreeMap<(usize, usize), BTreeMap<usize, usize>> = BTreeMap::new();
    for v in verdicts {
        if let (true, Some(class)) = (v.selective, v.class) {
            let first = seen.entry((v.layer, v.neuron)).or_default().entry(class).or_insert(v.epoch);
            *first = (*first).min(v.epoch);
        }
    }
    seen.into_iter()
        .filter(|(_, classes)| classes.len() >= 2)
        .map(|((layer, neuron), classes)| LabileNeuron { layer, neuron, classes })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentDistances {
    pub mean_euclidean: f64,
    /// Mean cosine similarity over pairs of nonzero vectors; `None` when
    /// fewer than two vectors are nonzero.
    pub mean_cosine: Option<f64>,
    pub pairs: usize,
    pub cosine_pairs: usize,
}

/// Mean pairwise Euclidean distance and cosine similarity of latent vectors.
pub fn latent_distances(vectors: &[&[f64]]) -> Result<LatentDistances> {
    if vectors.len() < 2 {
        return Err(Error::input("latent distances need at least two vectors"));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::input("latent vectors differ in length"));
    }
    let norms: Vec<f64> = vectors.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let zero = norms.iter().filter(|&&n| n == 0.0).count();
    if zero > 0 {
        log::info!("{zero} zero latent vector(s) left out of the cosine mean");
    }
    let (mut euclid, mut cosine, mut pairs, mut cos_pairs) = (0.0, 0.0, 0usize, 0usize);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let (a, b) = (vectors[i], vectors[j]);
            euclid += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            pairs += 1;
            if norms[i] > 0.0 && norms[j] > 0.0 {
                cosine += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norms[i] * norms[j]);
                cos_pairs += 1;
            }
        }
    }
    Ok(LatentDistances {
        mean_euclidean: euclid / pairs as f64,
        mean_cosine: (cos_pairs > 0).then(|| cosine / cos_pairs as f64),
        pairs,
        cosine_pairs: cos_pairs,
    })
}

/// Distances between the latent vectors of `records`.
pub fn record_distances(records: &[MeiRecord]) -> Result<LatentDistances> {
    let vectors: Vec<&[f64]> = records.iter().map(|r| r.latent.as_slice()).collect();
    latent_distances(&vectors)
}

/// 8-bit quantized image bytes, channel-last.
pub fn quantize_pixels(pixels: &[f32]) -> Vec<u8> {
    pixels.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

/// Raw-deflate size of `bytes` over their length at a given level.
pub fn compression_ratio(bytes: &[u8], level: u32) -> Result<f64> {
    if bytes.is_empty() {
        return Err(Error::input("cannot compress an empty image"));
    }
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(level.min(9)));
    enc.write_all(bytes)?;
    Ok(enc.finish()?.len() as f64 / bytes.len() as f64)
}

/// Compressed over raw size of the image at [`COMPRESSION_LEVEL`]; smaller
/// means simpler.
pub fn compression_complexity(stimulus: &Stimulus) -> f64 {
    compression_ratio(&quantize_pixels(&stimulus.pixels), COMPRESSION_LEVEL)
        .expect("a validated stimulus is nonempty and compresses in memory")
}

/// The record with the highest activation for each (layer, neuron, epoch);
/// ties go to the earlier method in [`Method::ALL`] order, then by name.
pub fn best_per_neuron(records: &[MeiRecord]) -> Vec<&MeiRecord> {
    let rank = |r: &MeiRecord| Method::ALL.iter().position(|m| m.name() == r.method).unwrap_or(usize::MAX);
    let mut best: BTreeMap<(usize, usize, usize), &MeiRecord> = BTreeMap::new();
    for r in records {
        best.entry((r.layer, r.neuron, r.epoch))
            .and_modify(|cur| {
                let better = r.activation > cur.activation
                    || (r.activation == cur.activation
                        && (rank(r), r.method.as_str()) < (rank(cur), cur.method.as_str()));
                if better {
                    *cur = r;
                }
            })
            .or_insert(r);
    }
    best.into_values().collect()
}

/// Verdicts for every (layer, neuron, epoch) present in `records`.
pub fn all_verdicts(records: &[MeiRecord]) -> Result<Vec<SelectivityVerdict>> {
    let mut groups: BTreeMap<(usize, usize, usize), Vec<MeiRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.layer, r.neuron, r.epoch)).or_default().push(r.clone());
    }
    groups.values().map(|g| selectivity_verdict(g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(method: &str, probs: Vec<f64>, activation: f64) -> MeiRecord {
        MeiRecord {
            layer: 1,
            neuron: 0,
            method: method.into(),
            epoch: 0,
            index: LatentIndex(vec![0]),
            latent: vec![-1.0],
            activation,
            activation_ceiling: 1.0,
            class_probs: probs,
            evaluations: 10,
            seed: 0,
            generator: "procedural".into(),
        }
    }

    #[test]
    fn entropy_extremes() {
        assert_eq!(normalized_entropy(&[0.1; 10]).unwrap(), 1.0);
        let mut one_hot = vec![0.0; 10];
        one_hot[3] = 1.0;
        assert_eq!(normalized_entropy(&one_hot).unwrap(), 0.0);
        assert!(normalized_entropy(&[0.5, 0.6]).is_err());
        assert!(normalized_entropy(&[1.5, -0.5]).is_err());
        assert_eq!(normalized_entropy(&[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn verdict_rule() {
        let p = |c: f64| vec![c, 1.0 - c];
        let rs = vec![record("protes", p(0.8), 0.8), record("protes_s", p(0.9), 0.8), record("protes_b", p(0.76), 0.8)];
        let v = selectivity_verdict(&rs).unwrap();
        assert!(v.selective && v.stability && v.confidence && v.activation);
        assert_eq!(v.class, Some(0));

        let mut flipped = rs.clone();
        flipped[2].class_probs = p(0.2);
        let v = selectivity_verdict(&flipped).unwrap();
        assert!(!v.selective && !v.stability && v.class.is_none());

        let mut edge = rs.clone();
        edge[0].class_probs = p(0.75);
        edge[1].activation = 0.75;
        assert!(selectivity_verdict(&edge).unwrap().selective);

        assert!(!selectivity_verdict(&rs[..2]).unwrap().stability);
        assert!(selectivity_verdict(&[]).is_err());
    }

    #[test]
    fn activation_is_judged_against_its_ceiling() {
        let mut r = vec![record("protes", vec![1.0, 0.0], 0.72), record("protes_s", vec![1.0, 0.0], 0.8)];
        r.push(record("protes_b", vec![1.0, 0.0], 0.8));
        assert!(!selectivity_verdict(&r).unwrap().activation);
        for x in r.iter_mut() {
            x.activation_ceiling = 0.96;
        }
        assert!(selectivity_verdict(&r).unwrap().activation);
    }

    #[test]
    fn labile_examples() {
        let v = |neuron: usize, epoch: usize, class: Option<usize>| SelectivityVerdict {
            layer: 2,
            neuron,
            epoch,
            selective: class.is_some(),
            class,
            stability: class.is_some(),
            confidence: true,
            activation: true,
        };
        let verdicts = vec![
            v(0, 40, Some(2)),
            v(0, 100, Some(2)),
            v(0, 300, Some(8)),
            v(1, 40, Some(2)),
            v(1, 300, Some(2)),
            v(2, 40, None),
            v(2, 300, None),
        ];
        let labile = labile_neurons(&verdicts);
        assert_eq!(labile.len(), 1);
        assert_eq!(labile[0].neuron, 0);
        assert_eq!(labile[0].classes, BTreeMap::from([(2, 40), (8, 300)]));
    }

    #[test]
    fn distance_examples() {
        let same = latent_distances(&[&[0.3, -0.2], &[0.3, -0.2]]).unwrap();
        assert_eq!(same.mean_euclidean, 0.0);
        assert!((same.mean_cosine.unwrap() - 1.0).abs() < 1e-15);
        let ortho = latent_distances(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(ortho.mean_euclidean, 2f64.sqrt());
        assert_eq!(ortho.mean_cosine, Some(0.0));
        let with_zero = latent_distances(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(with_zero.mean_cosine, None);
        assert!(latent_distances(&[&[1.0]]).is_err());
    }

    #[test]
    fn best_record_per_neuron() {
        let rs = vec![record("protes_b", vec![1.0], 0.5), record("protes", vec![1.0], 0.5), record("protes_s", vec![1.0], 0.4)];
        let best = best_per_neuron(&rs);
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].method, "protes");
    }
}
