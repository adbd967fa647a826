//! Gradient-free activation maximization for spiking neural networks.
//!
//! The crate searches a discretized latent stimulus space for the input that
//! drives a chosen neuron of a leaky integrate-and-fire network hardest. The
//! search runs PROTES, an optimizer that samples from a tensor-train density.
//!
//! - [`tt`]: tensor trains over discrete grids (evaluation, sampling, likelihood gradients)
//! - [`optimizer`]: PROTES presets, baselines and a budgeted objective adapter
//! - [`snn`]: discrete-time LIF networks, surrogate-gradient training, checkpoints
//! - [`stimulus`]: latent grids, the procedural generator, the external generator protocol
//! - [`analysis`]: entropy, selectivity, latent distances, compression complexity
//! - [`harness`]: configs, sweeps, snapshots, reports and manifests

pub mod analysis;
pub mod error;
pub mod harness;
pub mod optimizer;
pub mod snn;
pub mod stimulus;
pub mod tt;

pub use error::{Error, Result};
pub use optimizer::{optimize, Direction, Method, Objective, ObjectiveAdapter, OptimizationRecord, ProtesConfig};
pub use snn::{LabeledSample, Layer, LifLayer, SpikeTrace, SpikingNetwork, Target};
pub use stimulus::{Canvas, Generator, LatentGrid, Stimulus};
pub use tt::{LatentIndex, QuantizationMap, TensorTrain};
