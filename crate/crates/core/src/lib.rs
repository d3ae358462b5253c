//! Tempotron classifier for neutron/gamma pulse shape discrimination.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece of
//! the pipeline:
//!
//! - [`pulse`] and [`synth`]: digitized waveforms, normalization and a
//!   double-exponential pulse generator with known labels.
//! - [`encoding`]: latency encoding of samples followed by a Gaussian
//!   receptive field fan-out onto the dendrites.
//! - [`neuron`]: the PSP kernel, membrane potential and spike decision.
//! - [`learning`] and [`augment`]: the supervised training loop and the
//!   training-time noise augmentations.
//! - [`baselines`]: classical charge/shape discrimination factors, valley
//!   thresholding and figure of merit.
//! - [`metrics`]: accuracy, confusion and method agreement.
//!
//! File formats, configuration and the command line live in the companion
//! `tempotron` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod augment;
pub mod baselines;
pub mod encoding;
pub mod learning;
pub mod metrics;
pub mod neuron;
pub mod pulse;
pub mod rng;
pub mod synth;

pub use augment::{AugmentConfig, AugmentMode};
pub use baselines::{BaselineConfig, FactorSeries, Method};
pub use encoding::{Encoder, GrfBank, LatencyTrain, Spike, SpikePattern};
pub use learning::{PulseClassifier, TrainConfig, TrainLog};
pub use metrics::EvalReport;
pub use neuron::{KernelParams, MembraneTrace, TempotronModel};
pub use pulse::{Dataset, Label, Pulse};
pub use synth::SyntheticConfig;
