//! Digitized detector pulses and labeled datasets.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Particle class. A Tempotron spike means gamma, silence means neutron.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Neutron = 0,
    Gamma = 1,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Neutron),
            1 => Some(Label::Gamma),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn other(self) -> Self {
        match self {
            Label::Neutron => Label::Gamma,
            Label::Gamma => Label::Neutron,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PulseError {
    #[error("pulse needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("pulse is flat after baseline removal")]
    AllZeroPulse,
    #[error("pulse {index} has {found} samples, expected {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("labels must be present on every pulse or on none (pulse {index} differs)")]
    MixedLabels { index: usize },
}

/// Fraction of leading samples averaged into the baseline estimate.
pub const DEFAULT_BASELINE_FRACTION: f64 = 0.05;

/// One digitized waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    samples: Vec<f64>,
    label: Option<Label>,
    normalized: bool,
}

impl Pulse {
    pub fn new(samples: Vec<f64>, label: Option<Label>) -> Result<Self, PulseError> {
        if samples.len() < 2 {
            return Err(PulseError::TooShort(samples.len()));
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(PulseError::NonFinite { index });
        }
        Ok(Pulse {
            samples,
            label,
            normalized: false,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    /// True for pulses produced by [`Pulse::normalize`] or [`Pulse::rescale`].
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Index of the first maximum sample.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.samples.iter().enumerate() {
            if x > self.samples[best] {
                best = i;
            }
        }
        best
    }

    /// Baseline-subtracts, clamps negatives and scales the peak to exactly 1.
    ///
    /// The baseline is the mean of the first `max(1, ceil(0.05 N))` samples.
    /// Already normalized pulses are returned unchanged.
    pub fn normalize(&self) -> Result<Pulse, PulseError> {
        self.normalize_with(DEFAULT_BASELINE_FRACTION)
    }

    pub fn normalize_with(&self, baseline_fraction: f64) -> Result<Pulse, PulseError> {
        if self.normalized {
            return Ok(self.clone());
        }
        let n = self.samples.len();
        let window = baseline_window(n, baseline_fraction);
        let baseline = self.samples[..window].iter().sum::<f64>() / window as f64;
        let shifted: Vec<f64> = self
            .samples
            .iter()
            .map(|&x| (x - baseline).max(0.0))
            .collect();
        Self::scaled(shifted, self.label)
    }

    /// Clamps negatives to zero and scales the peak to 1, without touching
    /// the baseline. Used to bring augmented copies back into range.
    pub fn rescale(&self) -> Result<Pulse, PulseError> {
        let clamped: Vec<f64> = self.samples.iter().map(|&x| x.max(0.0)).collect();
        Self::scaled(clamped, self.label)
    }

    fn scaled(mut samples: Vec<f64>, label: Option<Label>) -> Result<Pulse, PulseError> {
        let max = samples.iter().copied().fold(0.0_f64, f64::max);
        if max <= 0.0 || !max.is_finite() {
            return Err(PulseError::AllZeroPulse);
        }
        for x in samples.iter_mut() {
            *x /= max;
        }
        Ok(Pulse {
            samples,
            label,
            normalized: true,
        })
    }
}

/// Number of leading samples averaged into the baseline.
pub fn baseline_window(n: usize, fraction: f64) -> usize {
    let w = libm::ceil(fraction * n as f64) as usize;
    w.clamp(1, n.max(1))
}

/// An ordered set of equal-length pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    pulses: Vec<Pulse>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, pulses: Vec<Pulse>) -> Result<Self, PulseError> {
        if let Some(first) = pulses.first() {
            let expected = first.len();
            let labeled = first.label.is_some();
            for (index, p) in pulses.iter().enumerate() {
                if p.len() != expected {
                    return Err(PulseError::Ragged {
                        index,
                        expected,
                        found: p.len(),
                    });
                }
                if p.label.is_some() != labeled {
                    return Err(PulseError::MixedLabels { index });
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            pulses,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Sample count per pulse (0 for an empty dataset).
    pub fn sample_len(&self) -> usize {
        self.pulses.first().map_or(0, Pulse::len)
    }

    pub fn is_labeled(&self) -> bool {
        self.pulses.first().is_some_and(|p| p.label.is_some())
    }

    /// Labels in order, or `None` for an unlabeled dataset.
    pub fn labels(&self) -> Option<Vec<Label>> {
        self.pulses.iter().map(Pulse::label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.pulses
            .iter()
            .filter(|p| p.label == Some(label))
            .count()
    }

    /// Normalizes every pulse, dropping the ones that fail. Returns the
    /// cleaned dataset and the number of pulses skipped.
    pub fn normalized(&self) -> (Dataset, usize) {
        let mut skipped = 0;
        let pulses = self
            .pulses
            .iter()
            .filter_map(|p| match p.normalize() {
                Ok(n) => Some(n),
                Err(_) => {
                    skipped += 1;
                    None
                }
            })
            .collect();
        (
            Dataset {
                name: self.name.clone(),
                pulses,
            },
            skipped,
        )
    }

    /// A new dataset holding the pulses at `indices`, in that order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        Dataset {
            name: name.into(),
            pulses: indices.iter().map(|&i| self.pulses[i].clone()).collect(),
        }
    }
}
