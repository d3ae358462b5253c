//! Supervised Tempotron training.
//!
//! An output error at pattern level moves every efficacy by the summed
//! kernel value of that dendrite's spikes preceding the potential maximum:
//! upwards for a missed gamma spike, downwards for a false one. Updates are
//! averaged over a mini-batch, scaled by a halving learning-rate schedule
//! and smoothed with momentum.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::augment::{augmented_copy, AugmentConfig, AugmentMode};
use crate::encoding::{
    EncodeError, Encoder, GrfBank, SpikePattern, DEFAULT_AMP_THRESHOLD, DEFAULT_GRF_SIGMA,
    DEFAULT_GRF_THRESHOLD,
};
use crate::neuron::{KernelParams, MembraneTrace, NeuronError, TempotronModel, DEFAULT_DT};
use crate::pulse::{Dataset, Label, Pulse, PulseError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("training needs a labeled dataset")]
    UnlabeledDataset,
    #[error("training needs pulses of both classes")]
    SingleClassDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("pattern is already classified correctly")]
    NoError,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no efficacy snapshot recorded for epoch {0}")]
    NotLogged(usize),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
}

/// Neuron constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronConfig {
    pub tau: f64,
    pub tau_s: f64,
    pub v_th: f64,
    pub v_rest: f64,
    pub dt: f64,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        NeuronConfig {
            tau: 8.4,
            tau_s: 2.1,
            v_th: 1.0,
            v_rest: 0.0,
            dt: DEFAULT_DT,
        }
    }
}

impl NeuronConfig {
    pub fn build(&self, efficacies: Vec<f64>) -> Result<TempotronModel, NeuronError> {
        TempotronModel::new(
            efficacies,
            KernelParams::new(self.tau, self.tau_s)?,
            self.v_th,
            self.v_rest,
            self.dt,
        )
    }
}

/// Encoder parameters; the field count is also the dendrite count.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingConfig {
    pub dendrites: usize,
    pub grf_sigma: f64,
    pub grf_threshold: f64,
    pub amp_threshold: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            dendrites: 25,
            grf_sigma: DEFAULT_GRF_SIGMA,
            grf_threshold: DEFAULT_GRF_THRESHOLD,
            amp_threshold: DEFAULT_AMP_THRESHOLD,
        }
    }
}

impl EncodingConfig {
    pub fn build(&self) -> Result<Encoder, EncodeError> {
        Encoder::new(
            GrfBank::new(self.dendrites, self.grf_sigma, self.grf_threshold)?,
            self.amp_threshold,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_low: f64,
    pub lr_high: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub init_low: f64,
    pub init_high: f64,
    pub validation_fraction: f64,
    pub neuron: NeuronConfig,
    pub encoding: EncodingConfig,
    pub augment: AugmentConfig,
    /// Record the efficacies after every epoch.
    pub snapshots: bool,
    /// Dataset indices whose membrane traces are recorded for the final model.
    pub probes: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            lr_low: 1e-6,
            lr_high: 1e-3,
            momentum: 0.9,
            batch_size: 16,
            seed: 0,
            init_low: -0.4,
            init_high: 0.4,
            validation_fraction: 0.2,
            neuron: NeuronConfig::default(),
            encoding: EncodingConfig::default(),
            augment: AugmentConfig::default(),
            snapshots: false,
            probes: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: &str| Err(LearnError::InvalidConfig(msg.into()));
        if !(self.lr_low > 0.0 && self.lr_low <= self.lr_high && self.lr_high.is_finite()) {
            return bad("learning rate interval must satisfy 0 < lr_low <= lr_high");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.init_low < self.init_high)
            || !self.init_low.is_finite()
            || !self.init_high.is_finite()
        {
            return bad("efficacy init range must satisfy init_low < init_high");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        self.augment
            .validate()
            .map_err(|m| LearnError::InvalidConfig(m.into()))?;
        self.encoding.build()?;
        self.neuron.build(vec![0.0; self.encoding.dendrites])?;
        Ok(())
    }
}

/// Learning rate for a 1-based epoch: starts at `lr_high`, halves every
/// 20 epochs, never drops below `lr_low`.
pub fn lr_schedule(epoch: usize, lr_low: f64, lr_high: f64) -> f64 {
    let halvings = (epoch.max(1) - 1) / 20;
    let lr = if halvings >= 1100 {
        0.0
    } else {
        lr_high / libm::pow(2.0, halvings as f64)
    };
    lr.max(lr_low)
}

/// `momentum * previous + (1 - momentum) * raw`, elementwise.
pub fn momentum_update(
    previous: &[f64],
    raw: &[f64],
    momentum: f64,
) -> Result<Vec<f64>, LearnError> {
    if previous.len() != raw.len() {
        return Err(LearnError::LengthMismatch {
            expected: previous.len(),
            found: raw.len(),
        });
    }
    Ok(previous
        .iter()
        .zip(raw)
        .map(|(p, r)| momentum * p + (1.0 - momentum) * r)
        .collect())
}

/// Adds the signed efficacy change for one pattern into `acc`: for every
/// spike strictly before `t_max`, the kernel value at `t_max` goes to its
/// dendrite.
fn accumulate_gradient(
    model: &TempotronModel,
    pattern: &SpikePattern,
    t_max: f64,
    sign: f64,
    acc: &mut [f64],
) {
    let kernel = model.kernel();
    for s in pattern.spikes() {
        if s.time >= t_max {
            break;
        }
        acc[s.dendrite as usize] += sign * kernel.eval(t_max - s.time);
    }
}

/// Time at which the error is credited. This is `t_max`, except when no
/// spike precedes it: a potential that never rises above rest peaks at
/// `t = 0`, where every efficacy has zero influence. The error is then
/// credited where the unweighted synaptic drive peaks, which is where the
/// efficacies have the most leverage on the potential.
pub fn learning_anchor(model: &TempotronModel, pattern: &SpikePattern, t_max: f64) -> f64 {
    match pattern.spikes().first() {
        Some(first) if first.time >= t_max => {
            let drive = model
                .with_efficacies(vec![1.0; model.dendrites()])
                .expect("unit efficacies are finite");
            drive.peak_unchecked(pattern).t_max
        }
        _ => t_max,
    }
}

/// Efficacy change for a misclassified pattern. Errors with
/// [`LearnError::NoError`] when the model already gets `label` right.
pub fn delta_omega(
    model: &TempotronModel,
    pattern: &SpikePattern,
    label: Label,
) -> Result<Vec<f64>, LearnError> {
    let peak = model.peak(pattern)?;
    let sign = match (model.fires(peak.v_max), label) {
        (false, Label::Gamma) => 1.0,
        (true, Label::Neutron) => -1.0,
        _ => return Err(LearnError::NoError),
    };
    let mut delta = vec![0.0; model.dendrites()];
    let anchor = learning_anchor(model, pattern, peak.t_max);
    accumulate_gradient(model, pattern, anchor, sign, &mut delta);
    Ok(delta)
}

/// Full membrane trace of one probe pattern.
pub fn psp_probe(
    model: &TempotronModel,
    pattern: &SpikePattern,
) -> Result<MembraneTrace, LearnError> {
    Ok(model.membrane_trace(pattern)?)
}

/// Encoder plus trained neuron: classifies raw pulses end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseClassifier {
    pub encoder: Encoder,
    pub neuron: TempotronModel,
}

impl PulseClassifier {
    pub fn new(encoder: Encoder, neuron: TempotronModel) -> Result<Self, LearnError> {
        if encoder.dendrites() != neuron.dendrites() {
            return Err(NeuronError::DendriteMismatch {
                expected: neuron.dendrites(),
                found: encoder.dendrites(),
            }
            .into());
        }
        Ok(PulseClassifier { encoder, neuron })
    }

    /// Normalizes (unless already normalized), encodes and classifies.
    pub fn encode_pulse(&self, pulse: &Pulse) -> Result<SpikePattern, LearnError> {
        Ok(self.encoder.encode(&pulse.normalize()?)?)
    }

    pub fn classify_pulse(&self, pulse: &Pulse) -> Result<Label, LearnError> {
        Ok(self.neuron.classify(&self.encode_pulse(pulse)?)?)
    }

    pub fn classify_pulses(&self, pulses: &[Pulse]) -> Result<Vec<Label>, LearnError> {
        let patterns = pulses
            .iter()
            .map(|p| self.encode_pulse(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.neuron.classify_batch(&patterns)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrace {
    pub index: usize,
    pub label: Label,
    pub trace: MembraneTrace,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
    pub initial_efficacies: Vec<f64>,
    /// Efficacies at the end of each epoch, when enabled.
    pub snapshots: Vec<Vec<f64>>,
    pub probes: Vec<ProbeTrace>,
    /// Pulses dropped because they could not be normalized.
    pub skipped: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    /// Mini-batches that changed the efficacies.
    pub updates: usize,
}

impl TrainLog {
    /// Efficacies after `epoch` (1-based); epoch 0 is the initialization.
    pub fn snapshot_efficacies(&self, epoch: usize) -> Result<&[f64], LearnError> {
        if epoch == 0 && !self.initial_efficacies.is_empty() {
            return Ok(&self.initial_efficacies);
        }
        self.snapshots
            .get(epoch.wrapping_sub(1))
            .map(Vec::as_slice)
            .ok_or(LearnError::NotLogged(epoch))
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch.wrapping_sub(1))
    }

    /// First epoch whose validation accuracy reaches `accuracy`.
    pub fn epochs_to_accuracy(&self, accuracy: f64) -> Option<usize> {
        self.epochs
            .iter()
            .find(|r| 1.0 - r.val_loss >= accuracy)
            .map(|r| r.epoch)
    }
}

fn error_rate(model: &TempotronModel, patterns: &[SpikePattern], labels: &[Label]) -> f64 {
    if patterns.is_empty() {
        return 0.0;
    }
    let wrong = patterns
        .iter()
        .zip(labels)
        .filter(|(p, &l)| model.fires(model.peak_unchecked(p).v_max) != (l == Label::Gamma))
        .count();
    wrong as f64 / patterns.len() as f64
}

/// Stratified seeded split into (train, validation) index lists.
fn split_indices(labels: &[Label], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::stream(seed, "split");
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in [Label::Neutron, Label::Gamma] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_val = libm::round(fraction * idx.len() as f64) as usize;
        let n_val = n_val.min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Applies one mini-batch: averages the error-driven changes over the batch,
/// scales by `lr`, filters through momentum and adds to the efficacies.
/// Returns true when the efficacies changed.
pub fn apply_batch(
    model: &mut TempotronModel,
    batch: &[(&SpikePattern, Label)],
    lr: f64,
    momentum: f64,
    velocity: &mut [f64],
) -> bool {
    let mut sum = vec![0.0; model.dendrites()];
    for (pattern, label) in batch {
        let peak = model.peak_unchecked(pattern);
        let sign = match (model.fires(peak.v_max), label) {
            (false, Label::Gamma) => 1.0,
            (true, Label::Neutron) => -1.0,
            _ => continue,
        };
        let anchor = learning_anchor(model, pattern, peak.t_max);
        accumulate_gradient(model, pattern, anchor, sign, &mut sum);
    }
    let scale = lr / batch.len().max(1) as f64;
    let mut changed = false;
    for ((w, v), g) in model
        .efficacies_mut()
        .iter_mut()
        .zip(velocity.iter_mut())
        .zip(&sum)
    {
        *v = momentum * *v + (1.0 - momentum) * (scale * g);
        if *v != 0.0 {
            *w += *v;
            changed = true;
        }
    }
    changed
}

/// Trains from uniformly drawn initial efficacies.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<(PulseClassifier, TrainLog), LearnError> {
    train_from(ds, cfg, None)
}

/// Trains starting from `initial` efficacies when given.
pub fn train_from(
    ds: &Dataset,
    cfg: &TrainConfig,
    initial: Option<Vec<f64>>,
) -> Result<(PulseClassifier, TrainLog), LearnError> {
    cfg.validate()?;
    if !ds.is_labeled() {
        return Err(LearnError::UnlabeledDataset);
    }
    let (clean, skipped) = ds.normalized();
    let labels = clean.labels().ok_or(LearnError::UnlabeledDataset)?;
    if !labels.contains(&Label::Gamma) || !labels.contains(&Label::Neutron) {
        return Err(LearnError::SingleClassDataset);
    }
    let encoder = cfg.encoding.build()?;
    let (train_idx, val_idx) = split_indices(&labels, cfg.validation_fraction, cfg.seed);

    let train_pulses: Vec<&Pulse> = train_idx.iter().map(|&i| &clean.pulses()[i]).collect();
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
    let val_labels: Vec<Label> = val_idx.iter().map(|&i| labels[i]).collect();
    let train_patterns = encoder.encode_all(train_pulses.iter().copied())?;
    let val_patterns = encoder.encode_all(val_idx.iter().map(|&i| &clean.pulses()[i]))?;

    let dendrites = cfg.encoding.dendrites;
    let initial = match initial {
        Some(w) if w.len() != dendrites => {
            return Err(LearnError::LengthMismatch {
                expected: dendrites,
                found: w.len(),
            })
        }
        Some(w) => w,
        None => {
            let mut init_rng = rng::stream(cfg.seed, "init");
            (0..dendrites)
                .map(|_| init_rng.random_range(cfg.init_low..cfg.init_high))
                .collect()
        }
    };
    let mut model = cfg.neuron.build(initial.clone())?;

    let augment_copy = |epoch: u64, i: usize| -> Result<SpikePattern, EncodeError> {
        let mut r = rng::substream(cfg.seed, "augment", &[epoch, i as u64]);
        augmented_copy(train_pulses[i], &encoder, &cfg.augment, &mut r)
    };
    let fixed_copies = if cfg.augment.mode == AugmentMode::Fixed {
        (0..train_pulses.len())
            .map(|i| augment_copy(0, i))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    let mut log = TrainLog {
        initial_efficacies: initial,
        skipped,
        train_indices: train_idx,
        val_indices: val_idx,
        ..TrainLog::default()
    };
    let mut shuffle_rng = rng::stream(cfg.seed, "shuffle");
    let mut velocity = vec![0.0; dendrites];
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=cfg.epochs {
        let lr = lr_schedule(epoch, cfg.lr_low, cfg.lr_high);
        let fresh_copies = if cfg.augment.mode == AugmentMode::PerEpoch {
            (0..train_pulses.len())
                .map(|i| augment_copy(epoch as u64, i))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        let copies: &[SpikePattern] = match cfg.augment.mode {
            AugmentMode::PerEpoch => &fresh_copies,
            AugmentMode::Fixed => &fixed_copies,
            AugmentMode::Off => &[],
        };

        let mut stream: Vec<(&SpikePattern, Label)> = train_patterns
            .iter()
            .chain(copies)
            .zip(train_labels.iter().chain(&train_labels).copied())
            .collect();
        stream.shuffle(&mut shuffle_rng);
        for batch in stream.chunks(cfg.batch_size) {
            if apply_batch(&mut model, batch, lr, cfg.momentum, &mut velocity) {
                log.updates += 1;
            }
        }

        let train_loss = error_rate(&model, &train_patterns, &train_labels);
        let val_loss = if val_patterns.is_empty() {
            train_loss
        } else {
            error_rate(&model, &val_patterns, &val_labels)
        };
        log.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        });
        if cfg.snapshots {
            log.snapshots.push(model.efficacies().to_vec());
        }
        if best.as_ref().is_none_or(|(loss, _, _)| val_loss < *loss) {
            best = Some((val_loss, epoch, model.efficacies().to_vec()));
        }
    }

    if let Some((_, epoch, weights)) = best {
        log.best_epoch = epoch;
        model = model.with_efficacies(weights)?;
    }
    let classifier = PulseClassifier::new(encoder, model)?;
    for &index in &cfg.probes {
        let pulse = clean.pulses().get(index).ok_or_else(|| {
            LearnError::InvalidConfig(alloc::format!("probe index {index} out of range"))
        })?;
        let pattern = classifier.encoder.encode(pulse)?;
        log.probes.push(ProbeTrace {
            index,
            label: labels[index],
            trace: psp_probe(&classifier.neuron, &pattern)?,
        });
    }
    Ok((classifier, log))
}
