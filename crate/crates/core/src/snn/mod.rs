//! Discrete-time leaky integrate-and-fire networks.
//!
//! Each frame a layer first emits `S[t] = U[t] > U_thr` from its current
//! membrane, then integrates: `U[t+1] = beta * U[t] + W x[t] - S[t] * U_thr`.
//! The input to layer `l > 0` at frame `t` is the spike vector of layer
//! `l - 1` at the same frame. Membranes start at zero for every stimulus, so
//! no layer fires on frame 0.

mod io;
pub mod toy;
mod train;
mod synapses;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_network, write_network, NETWORK_FORMAT_VERSION};
pub use synapses::{ConvGeometry, Synapses};
pub use train::{evaluate, loss_and_grad, train_epoch, Evaluation, Gradients, LabeledSample, SpikeMode};

pub const DEFAULT_BETA: f64 = 0.9;
pub const DEFAULT_THRESHOLD: f64 = 1.0;
pub const DEFAULT_EXPOSURE: usize = 50;
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Derivative of the arctan surrogate
/// `S(U) = atan(pi * alpha * (U - thr)) / pi + 1/2`.
pub fn surrogate_grad(u: f64, u_thr: f64, alpha: f64) -> f64 {
    let z = std::f64::consts::PI * alpha * (u - u_thr);
    alpha / (1.0 + z * z)
}

/// The smooth spike function whose derivative is [`surrogate_grad`].
pub fn smooth_spike(u: f64, u_thr: f64, alpha: f64) -> f64 {
    (std::f64::consts::PI * alpha * (u - u_thr)).atan() / std::f64::consts::PI + 0.5
}

/// Fires on the current membrane, then applies decay, input and
/// subtractive reset, in that order.
#[inline]
pub(crate) fn lif_update(u: &mut [f64], current: &[f64], beta: f64, u_thr: f64, spikes: &mut [u8]) {
    for ((ui, &c), s) in u.iter_mut().zip(current).zip(spikes.iter_mut()) {
        let fired = *ui > u_thr;
        *s = fired as u8;
        let sf = if fired { 1.0 } else { 0.0 };
        *ui = beta * *ui + c - sf * u_thr;
    }
}

/// Connection weights plus the neuron constants of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub synapses: Synapses,
    pub beta: f64,
    pub u_thr: f64,
}

impl Layer {
    pub fn new(synapses: Synapses, beta: f64, u_thr: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::input(format!("beta {beta} must lie in (0, 1)")));
        }
        if !(u_thr > 0.0 && u_thr.is_finite()) {
            return Err(Error::input(format!("threshold {u_thr} must be positive")));
        }
        Ok(Layer { synapses, beta, u_thr })
    }

    pub fn inputs(&self) -> usize {
        self.synapses.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.synapses.outputs()
    }

    /// Number of addressable targets: neurons for dense layers, feature
    /// channels for convolutional ones.
    pub fn num_targets(&self) -> usize {
        match &self.synapses {
            Synapses::Dense { outputs, .. } => *outputs,
            Synapses::Conv { geometry, .. } => geometry.out_channels,
        }
    }
}

/// A single layer with its own membrane, stepped one frame at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct LifLayer {
    pub layer: Layer,
    pub membrane: Vec<f64>,
}

impl LifLayer {
    pub fn new(layer: Layer) -> Self {
        let n = layer.outputs();
        LifLayer { layer, membrane: vec![0.0; n] }
    }

    pub fn reset(&mut self) {
        self.membrane.iter_mut().for_each(|u| *u = 0.0);
    }

    /// One frame: returns the spikes emitted from the pre-update membrane.
    pub fn step(&mut self, x: &[f64]) -> Result<Vec<u8>> {
        if x.len() != self.layer.inputs() {
            return Err(Error::input(format!("input has {} values, layer expects {}", x.len(), self.layer.inputs())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("input holds a non-finite value"));
        }
        let mut current = vec![0.0; self.layer.outputs()];
        self.layer.synapses.apply(x, &mut current);
        let mut spikes = vec![0u8; current.len()];
        lif_update(&mut self.membrane, &current, self.layer.beta, self.layer.u_thr, &mut spikes);
        Ok(spikes)
    }
}

/// Spike record of one exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrace {
    /// `spikes[layer][frame][neuron]`, each 0 or 1.
    pub spikes: Vec<Vec<Vec<u8>>>,
    /// `counts[layer][neuron]`: frame totals.
    pub counts: Vec<Vec<u32>>,
}

impl SpikeTrace {
    pub fn spike(&self, layer: usize, neuron: usize, frame: usize) -> u8 {
        self.spikes[layer][frame][neuron]
    }
}

/// Location of a neuron (or conv channel) in a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Target {
    pub layer: usize,
    pub neuron: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingNetwork {
    /// `(channels, height, width)` of the stimulus, fed channel-major.
    pub input_shape: [usize; 3],
    pub layers: Vec<Layer>,
    /// Frames per stimulus.
    pub exposure: usize,
    pub alpha: f64,
}

impl SpikingNetwork {
    pub fn new(input_shape: [usize; 3], layers: Vec<Layer>, exposure: usize, alpha: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::input("network needs at least one layer"));
        }
        if exposure == 0 {
            return Err(Error::input("exposure must be at least one frame"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::input(format!("surrogate sharpness {alpha} must be positive")));
        }
        let mut width: usize = input_shape.iter().product();
        if width == 0 {
            return Err(Error::input("input shape must be nonempty"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.inputs() != width {
                return Err(Error::input(format!("layer {i} expects {} inputs but receives {width}", layer.inputs())));
            }
            width = layer.outputs();
        }
        Ok(SpikingNetwork { input_shape, layers, exposure, alpha })
    }

    /// Fully connected network with weights uniform in
    /// `+-gain / sqrt(fan_in)`; `gains` gives one gain per layer.
    pub fn random_dense<R: Rng + ?Sized>(
        input_shape: [usize; 3],
        widths: &[usize],
        gains: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() != gains.len() {
            return Err(Error::input("one gain per layer is required"));
        }
        let mut fan_in: usize = input_shape.iter().product();
        let mut layers = Vec::with_capacity(widths.len());
        for (&w, &g) in widths.iter().zip(gains) {
            let bound = g / (fan_in as f64).sqrt();
            let weights = (0..w * fan_in).map(|_| rng.random_range(-bound..=bound)).collect();
            layers.push(Layer::new(Synapses::dense(w, fan_in, weights)?, DEFAULT_BETA, DEFAULT_THRESHOLD)?);
            fan_in = w;
        }
        SpikingNetwork::new(input_shape, layers, DEFAULT_EXPOSURE, DEFAULT_ALPHA)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    fn check_stimulus(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::input(format!(
                "stimulus has {} values, network expects {:?}",
                x.len(),
                self.input_shape
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("stimulus holds a non-finite value"));
        }
        Ok(())
    }

    pub fn check_target(&self, target: Target) -> Result<()> {
        let layer = self
            .layers
            .get(target.layer)
            .ok_or_else(|| Error::input(format!("layer {} does not exist", target.layer)))?;
        if target.neuron >= layer.num_targets() {
            return Err(Error::input(format!(
                "neuron {} is out of range for layer {} ({} targets)",
                target.neuron,
                target.layer,
                layer.num_targets()
            )));
        }
        Ok(())
    }

    /// Runs one exposure, calling `visit(layer, frame, spikes)` for every
    /// layer and frame. Membranes live only for the duration of the call.
    fn simulate(&self, x: &[f64], mut visit: impl FnMut(usize, usize, &[u8])) {
        let mut membranes: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
        let mut spikes: Vec<Vec<u8>> = self.layers.iter().map(|l| vec![0u8; l.outputs()]).collect();
        let mut currents: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.outputs()]).collect();
        // The stimulus current is the same every frame.
        self.layers[0].synapses.apply(x, &mut currents[0]);
        let mut input = Vec::new();
        for t in 0..self.exposure {
            for (l, layer) in self.layers.iter().enumerate() {
                if l > 0 {
                    input.clear();
                    input.extend(spikes[l - 1].iter().map(|&s| s as f64));
                    layer.synapses.apply(&input, &mut currents[l]);
                }
                lif_update(&mut membranes[l], &currents[l], layer.beta, layer.u_thr, &mut spikes[l]);
                visit(l, t, &spikes[l]);
            }
        }
    }

    /// Full spike record for one stimulus.
    pub fn forward(&self, x: &[f64]) -> Result<SpikeTrace> {
        self.check_stimulus(x)?;
        let mut trace = SpikeTrace {
            spikes: self.layers.iter().map(|_| Vec::with_capacity(self.exposure)).collect(),
            counts: self.layers.iter().map(|l| vec![0u32; l.outputs()]).collect(),
        };
        self.simulate(x, |l, _, s| {
            for (c, &v) in trace.counts[l].iter_mut().zip(s) {
                *c += v as u32;
            }
            trace.spikes[l].push(s.to_vec());
        });
        Ok(trace)
    }

    /// Per-neuron spike totals without keeping the frame record.
    pub fn counts(&self, x: &[f64]) -> Result<Vec<Vec<u32>>> {
        self.check_stimulus(x)?;
        let mut counts: Vec<Vec<u32>> = self.layers.iter().map(|l| vec![0u32; l.outputs()]).collect();
        self.simulate(x, |l, _, s| {
            for (c, &v) in counts[l].iter_mut().zip(s) {
                *c += v as u32;
            }
        });
        Ok(counts)
    }

    /// Activation of a target from precomputed counts: spike count over the
    /// exposure for dense units, or the channel's mean count over positions
    /// for convolutional layers, divided by the exposure.
    pub fn activation_from_counts(&self, counts: &[Vec<u32>], target: Target) -> Result<f64> {
        self.check_target(target)?;
        let t = self.exposure as f64;
        let layer_counts = &counts[target.layer];
        match &self.layers[target.layer].synapses {
            Synapses::Dense { .. } => Ok(layer_counts[target.neuron] as f64 / t),
            Synapses::Conv { geometry, .. } => {
                let plane = geometry.height * geometry.width;
                let start = target.neuron * plane;
                let sum: u64 = layer_counts[start..start + plane].iter().map(|&c| c as u64).sum();
                Ok(sum as f64 / plane as f64 / t)
            }
        }
    }

    /// Activation in `[0, 1]` of one target for one stimulus.
    pub fn activation(&self, x: &[f64], target: Target) -> Result<f64> {
        self.check_target(target)?;
        let counts = self.counts(x)?;
        self.activation_from_counts(&counts, target)
    }

    /// Per-position activation of a single unit, for convolutional layers
    /// addressed as `channel * height * width + row * width + col`.
    pub fn unit_activation(&self, x: &[f64], layer: usize, unit: usize) -> Result<f64> {
        let l = self.layers.get(layer).ok_or_else(|| Error::input(format!("layer {layer} does not exist")))?;
        if unit >= l.outputs() {
            return Err(Error::input(format!("unit {unit} is out of range for layer {layer}")));
        }
        Ok(self.counts(x)?[layer][unit] as f64 / self.exposure as f64)
    }

    /// Softmax over output-layer spike counts.
    pub fn class_probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let counts = self.counts(x)?;
        let logits: Vec<f64> = counts[counts.len() - 1].iter().map(|&c| c as f64).collect();
        Ok(softmax(&logits))
    }

    /// Largest activation any target of `layer` can reach: the first frame
    /// never fires, and each deeper layer starts one frame later.
    pub fn max_activation(&self, layer: usize) -> f64 {
        self.exposure.saturating_sub(layer + 1) as f64 / self.exposure as f64
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
