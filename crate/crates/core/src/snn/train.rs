//! Surrogate-gradient training by backpropagation through time.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{smooth_spike, softmax, surrogate_grad, SpikingNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub input: Vec<f64>,
    pub label: usize,
}

/// How the forward pass turns membranes into spikes during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    /// Heaviside spikes; gradients use the surrogate derivative.
    Hard,
    /// Spikes replaced by the smooth surrogate itself, which makes the
    /// backward pass the exact gradient of the forward pass.
    Smooth,
}

/// Loss gradient with respect to each layer's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &SpikingNetwork) -> Self {
        Gradients { layers: net.layers.iter().map(|l| vec![0.0; l.synapses.weights().len()]).collect() }
    }

    fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

fn check_sample(net: &SpikingNetwork, s: &LabeledSample) -> Result<()> {
    if s.input.len() != net.input_len() {
        return Err(Error::input(format!("sample has {} values, network expects {}", s.input.len(), net.input_len())));
    }
    if s.label >= net.output_len() {
        return Err(Error::input(format!("label {} is out of range for {} classes", s.label, net.output_len())));
    }
    Ok(())
}

fn cross_entropy(counts: &[f64], label: usize) -> (f64, Vec<f64>) {
    let p = softmax(counts);
    let loss = -p[label].max(f64::MIN_POSITIVE).ln();
    let mut g = p;
    g[label] -= 1.0;
    (loss, g)
}

/// Cross-entropy of the spike-count softmax for one sample and its gradient
/// with respect to every weight.
pub fn loss_and_grad(net: &SpikingNetwork, sample: &LabeledSample, mode: SpikeMode) -> Result<(f64, Gradients)> {
    check_sample(net, sample)?;
    let depth = net.layers.len();
    let frames = net.exposure;
    // Per layer and frame: membrane before the update and the emitted spike.
    let mut u_rec: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(frames); depth];
    let mut s_rec: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(frames); depth];
    let mut membranes: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
    let mut currents: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
    net.layers[0].synapses.apply(&sample.input, &mut currents[0]);
    for t in 0..frames {
        for (l, layer) in net.layers.iter().enumerate() {
            if l > 0 {
                layer.synapses.apply(&s_rec[l - 1][t], &mut currents[l]);
            }
            let u = &mut membranes[l];
            let spikes: Vec<f64> = u
                .iter()
                .map(|&v| match mode {
                    SpikeMode::Hard => {
                        if v > layer.u_thr {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    SpikeMode::Smooth => smooth_spike(v, layer.u_thr, net.alpha),
                })
                .collect();
            u_rec[l].push(u.clone());
            for ((ui, &c), &s) in u.iter_mut().zip(&currents[l]).zip(&spikes) {
                *ui = layer.beta * *ui + c - s * layer.u_thr;
            }
            s_rec[l].push(spikes);
        }
    }
    let counts: Vec<f64> =
        (0..net.output_len()).map(|j| s_rec[depth - 1].iter().map(|s| s[j]).sum::<f64>()).collect();
    let (loss, g_counts) = cross_entropy(&counts, sample.label);
    if !loss.is_finite() {
        return Err(Error::Divergence("non-finite training loss".into()));
    }

    let mut grads = Gradients::zeros(net);
    // Gradients with respect to U[t + 1] (`next`) and U[t] (`cur`).
    let mut next: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
    let mut cur = next.clone();
    let mut g_spike = Vec::new();
    for t in (0..frames).rev() {
        for l in (0..depth).rev() {
            let layer = &net.layers[l];
            let input: &[f64] = if l == 0 { &sample.input } else { &s_rec[l - 1][t] };
            layer.synapses.accumulate_grad(&next[l], input, &mut grads.layers[l]);

            g_spike.clear();
            if l + 1 == depth {
                g_spike.extend_from_slice(&g_counts);
            } else {
                g_spike.resize(layer.outputs(), 0.0);
            }
            for (g, n) in g_spike.iter_mut().zip(&next[l]) {
                *g -= layer.u_thr * n;
            }
            if l + 1 < depth {
                net.layers[l + 1].synapses.apply_transpose(&next[l + 1], &mut g_spike);
            }
            for (i, c) in cur[l].iter_mut().enumerate() {
                let ds = surrogate_grad(u_rec[l][t][i], layer.u_thr, net.alpha);
                *c = layer.beta * next[l][i] + ds * g_spike[i];
            }
        }
        std::mem::swap(&mut next, &mut cur);
    }
    Ok((loss, grads))
}

/// Mean loss and accuracy with hard spikes; predictions take the first
/// class among tied maximal counts.
pub fn evaluate(net: &SpikingNetwork, data: &[LabeledSample]) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::input("evaluation set is empty"));
    }
    let per: Vec<(f64, bool)> = data
        .par_iter()
        .map(|s| {
            check_sample(net, s)?;
            let counts = net.counts(&s.input)?;
            let out: Vec<f64> = counts[counts.len() - 1].iter().map(|&c| c as f64).collect();
            let (loss, _) = cross_entropy(&out, s.label);
            let mut best = 0;
            for (j, &c) in out.iter().enumerate() {
                if c > out[best] {
                    best = j;
                }
            }
            Ok((loss, best == s.label))
        })
        .collect::<Result<_>>()?;
    let n = per.len() as f64;
    Ok(Evaluation {
        loss: per.iter().map(|p| p.0).sum::<f64>() / n,
        accuracy: per.iter().filter(|p| p.1).count() as f64 / n,
    })
}

/// One shuffled pass of minibatch SGD; returns the mean per-sample loss seen
/// during the pass.
pub fn train_epoch<R: Rng + ?Sized>(
    net: &mut SpikingNetwork,
    data: &[LabeledSample],
    learning_rate: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    if batch_size == 0 {
        return Err(Error::input("batch size must be at least 1"));
    }
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::input(format!("learning rate {learning_rate} must be finite and nonnegative")));
    }
    for s in data {
        check_sample(net, s)?;
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for batch in order.chunks(batch_size) {
        let snapshot = &*net;
        let results: Vec<(f64, Gradients)> = batch
            .par_iter()
            .map(|&i| loss_and_grad(snapshot, &data[i], SpikeMode::Hard))
            .collect::<Result<_>>()?;
        let mut sum = Gradients::zeros(net);
        for (loss, g) in &results {
            total += loss;
            sum.add(g);
        }
        let scale = learning_rate / batch.len() as f64;
        if scale != 0.0 {
            for (layer, g) in net.layers.iter_mut().zip(&sum.layers) {
                for (w, d) in layer.synapses.weights_mut().iter_mut().zip(g) {
                    *w -= scale * d;
                }
            }
            if net.layers.iter().any(|l| l.synapses.weights().iter().any(|w| !w.is_finite())) {
                return Err(Error::Divergence("training produced a non-finite weight".into()));
            }
        }
    }
    Ok(total / data.len() as f64)
}
