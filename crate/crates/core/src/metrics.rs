//! Accuracy, confusion counts and agreement between methods.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::pulse::Label;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {predictions} predictions, {truth} truth labels")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("no predictions to evaluate")]
    Empty,
}

/// Accuracy of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAccuracy {
    pub name: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub accuracy: f64,
    /// Indexed `[truth][predicted]`, with neutron = 0 and gamma = 1.
    pub confusion: [[usize; 2]; 2],
    pub n: usize,
    pub splits: Vec<SplitAccuracy>,
    /// Effective configuration as `(key, value)` pairs.
    pub config: Vec<(String, String)>,
}

impl EvalReport {
    pub fn errors(&self) -> usize {
        self.confusion[0][1] + self.confusion[1][0]
    }

    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }
}

pub fn evaluate(predictions: &[Label], truth: &[Label]) -> Result<EvalReport, MetricsError> {
    if predictions.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut confusion = [[0; 2]; 2];
    for (p, t) in predictions.iter().zip(truth) {
        confusion[t.bit() as usize][p.bit() as usize] += 1;
    }
    let n = truth.len();
    Ok(EvalReport {
        method: String::new(),
        accuracy: (confusion[0][0] + confusion[1][1]) as f64 / n as f64,
        confusion,
        n,
        splits: Vec::new(),
        config: Vec::new(),
    })
}

/// Fraction of positions where the two prediction vectors agree.
pub fn agreement(a: &[Label], b: &[Label]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: a.len(),
            truth: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}
