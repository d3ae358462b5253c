//! Self-contained model file: efficacies, neuron constants and the encoder,
//! enough to reload and classify raw pulses.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use tempotron_core::encoding::{Encoder, GrfBank};
use tempotron_core::neuron::{KernelParams, TempotronModel};
use tempotron_core::PulseClassifier;

use crate::atomic;
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrfFile {
    pub count: usize,
    pub sigma: f64,
    pub theta_grf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub omega: Vec<f64>,
    pub tau: f64,
    pub tau_s: f64,
    pub v0: f64,
    pub v_th: f64,
    pub v_rest: f64,
    pub dt: f64,
    pub grf: GrfFile,
    pub theta_amp: f64,
    /// Effective run configuration that produced the model.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

/// Relative tolerance on a stored `v0` against the one implied by the time
/// constants.
const V0_TOLERANCE: f64 = 1e-9;

impl ModelFile {
    pub fn from_classifier(c: &PulseClassifier, config: BTreeMap<String, String>) -> Self {
        let n = &c.neuron;
        let bank = c.encoder.bank();
        ModelFile {
            omega: n.efficacies().to_vec(),
            tau: n.kernel().tau(),
            tau_s: n.kernel().tau_s(),
            v0: n.kernel().v0(),
            v_th: n.v_th(),
            v_rest: n.v_rest(),
            dt: n.dt(),
            grf: GrfFile {
                count: bank.count(),
                sigma: bank.sigma(),
                theta_grf: bank.threshold(),
            },
            theta_amp: c.encoder.amp_threshold(),
            config,
        }
    }

    /// Rebuilds the classifier. Inconsistent contents (bad time constants,
    /// `v0` not matching them, `omega` length different from the field
    /// count) are domain errors.
    pub fn to_classifier(&self) -> Result<PulseClassifier, Error> {
        let kernel = KernelParams::new(self.tau, self.tau_s).map_err(Error::domain)?;
        if (kernel.v0() - self.v0).abs() > V0_TOLERANCE * kernel.v0() {
            return Err(Error::domain(format!(
                "model v0 = {} does not match tau = {}, tau_s = {} (expected {})",
                self.v0,
                self.tau,
                self.tau_s,
                kernel.v0()
            )));
        }
        let neuron =
            TempotronModel::new(self.omega.clone(), kernel, self.v_th, self.v_rest, self.dt)
                .map_err(Error::domain)?;
        let bank = GrfBank::new(self.grf.count, self.grf.sigma, self.grf.theta_grf)
            .map_err(Error::domain)?;
        let encoder = Encoder::new(bank, self.theta_amp).map_err(Error::domain)?;
        PulseClassifier::new(encoder, neuron).map_err(Error::domain)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<(), Error> {
    atomic::write_atomic(path, model.to_json().as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelFile, Error> {
    let text = atomic::read_to_string(path)?;
    ModelFile::from_json(&text).map_err(|e| Error::format(path, e))
}
