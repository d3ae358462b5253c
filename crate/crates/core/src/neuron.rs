//! Leaky integrate-and-fire Tempotron neuron.
//!
//! The membrane potential is a weighted sum of normalized
//! difference-of-exponentials PSPs plus the resting potential, sampled on a
//! uniform grid `0, dt, 2 dt, ..., T`. The neuron outputs a spike (gamma)
//! when the grid maximum of the potential exceeds the threshold.

use alloc::vec::Vec;

use thiserror::Error;

use crate::encoding::SpikePattern;
use crate::pulse::Label;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuronError {
    #[error("time constants must satisfy tau > tau_s > 0 (got tau = {tau}, tau_s = {tau_s})")]
    BadTimeConstants { tau: f64, tau_s: f64 },
    #[error("pattern has {found} dendrites, model has {expected}")]
    DendriteMismatch { expected: usize, found: usize },
    #[error("pattern {index}: {source}")]
    AtPattern {
        index: usize,
        source: alloc::boxed::Box<NeuronError>,
    },
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
}

/// PSP kernel `K(s) = V0 (exp(-s/tau) - exp(-s/tau_s))` for `s >= 0`,
/// scaled so its maximum is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    tau: f64,
    tau_s: f64,
    v0: f64,
    t_peak: f64,
}

impl KernelParams {
    pub fn new(tau: f64, tau_s: f64) -> Result<Self, NeuronError> {
        if !(tau_s > 0.0 && tau > tau_s && tau.is_finite()) {
            return Err(NeuronError::BadTimeConstants { tau, tau_s });
        }
        let t_peak = tau * tau_s / (tau - tau_s) * libm::log(tau / tau_s);
        let v0 = 1.0 / (libm::exp(-t_peak / tau) - libm::exp(-t_peak / tau_s));
        Ok(KernelParams {
            tau,
            tau_s,
            v0,
            t_peak,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tau_s(&self) -> f64 {
        self.tau_s
    }

    /// Normalization factor.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Lag at which the kernel peaks.
    pub fn t_peak(&self) -> f64 {
        self.t_peak
    }

    /// Kernel value at lag `s`; zero for negative lags.
    pub fn eval(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        self.v0 * (libm::exp(-s / self.tau) - libm::exp(-s / self.tau_s))
    }
}

/// Grid maximum of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub v_max: f64,
    /// Earliest grid time attaining `v_max`.
    pub t_max: f64,
}

/// Membrane potential sampled over the whole pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneTrace {
    pub dt: f64,
    pub potentials: Vec<f64>,
    pub v_max: f64,
    pub t_max: f64,
    pub fired: bool,
}

impl MembraneTrace {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.potentials.len()).map(|g| g as f64 * self.dt)
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }
}

pub const DEFAULT_DT: f64 = 0.1;

/// Trainable classifier state.
#[derive(Debug, Clone, PartialEq)]
pub struct TempotronModel {
    efficacies: Vec<f64>,
    kernel: KernelParams,
    v_th: f64,
    v_rest: f64,
    dt: f64,
}

/// Index of the last grid point not beyond `duration`.
fn last_grid_index(duration: f64, dt: f64) -> usize {
    libm::floor(duration / dt + 1e-9) as usize
}

impl TempotronModel {
    pub fn new(
        efficacies: Vec<f64>,
        kernel: KernelParams,
        v_th: f64,
        v_rest: f64,
        dt: f64,
    ) -> Result<Self, NeuronError> {
        if efficacies.is_empty() {
            return Err(NeuronError::InvalidModel(
                "at least one efficacy is required",
            ));
        }
        if efficacies.iter().any(|w| !w.is_finite()) {
            return Err(NeuronError::InvalidModel("efficacies must be finite"));
        }
        if !(v_th > v_rest) || !v_th.is_finite() || !v_rest.is_finite() {
            return Err(NeuronError::InvalidModel(
                "threshold must exceed the resting potential",
            ));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(NeuronError::InvalidModel("grid step must be positive"));
        }
        Ok(TempotronModel {
            efficacies,
            kernel,
            v_th,
            v_rest,
            dt,
        })
    }

    pub fn efficacies(&self) -> &[f64] {
        &self.efficacies
    }

    pub(crate) fn efficacies_mut(&mut self) -> &mut [f64] {
        &mut self.efficacies
    }

    pub fn with_efficacies(&self, efficacies: Vec<f64>) -> Result<Self, NeuronError> {
        TempotronModel::new(efficacies, self.kernel, self.v_th, self.v_rest, self.dt)
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self, NeuronError> {
        TempotronModel::new(
            self.efficacies.clone(),
            self.kernel,
            self.v_th,
            self.v_rest,
            dt,
        )
    }

    pub fn dendrites(&self) -> usize {
        self.efficacies.len()
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }

    pub fn v_rest(&self) -> f64 {
        self.v_rest
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check(&self, pattern: &SpikePattern) -> Result<(), NeuronError> {
        if pattern.dendrites() != self.dendrites() {
            return Err(NeuronError::DendriteMismatch {
                expected: self.dendrites(),
                found: pattern.dendrites(),
            });
        }
        Ok(())
    }

    /// Single pass over the grid. Both exponentials of the kernel decay by a
    /// constant factor per step, so two running sums carry every earlier
    /// spike forward and each spike is touched once.
    fn sweep(&self, pattern: &SpikePattern, mut visit: impl FnMut(usize, f64)) {
        let KernelParams { tau, tau_s, v0, .. } = self.kernel;
        let decay_m = libm::exp(-self.dt / tau);
        let decay_s = libm::exp(-self.dt / tau_s);
        let spikes = pattern.spikes();
        let (mut slow, mut fast) = (0.0, 0.0);
        let mut next = 0;
        for g in 0..=last_grid_index(pattern.duration(), self.dt) {
            let t = g as f64 * self.dt;
            slow *= decay_m;
            fast *= decay_s;
            while next < spikes.len() && spikes[next].time <= t {
                let s = spikes[next];
                let w = self.efficacies[s.dendrite as usize];
                if w != 0.0 {
                    let lag = t - s.time;
                    slow += w * libm::exp(-lag / tau);
                    fast += w * libm::exp(-lag / tau_s);
                }
                next += 1;
            }
            visit(g, v0 * (slow - fast) + self.v_rest);
        }
    }

    /// Grid maximum of the potential, without storing the trace.
    pub fn peak(&self, pattern: &SpikePattern) -> Result<Peak, NeuronError> {
        self.check(pattern)?;
        Ok(self.peak_unchecked(pattern))
    }

    pub(crate) fn peak_unchecked(&self, pattern: &SpikePattern) -> Peak {
        let mut best = Peak {
            v_max: f64::NEG_INFINITY,
            t_max: 0.0,
        };
        let mut best_g = 0;
        self.sweep(pattern, |g, v| {
            if v > best.v_max {
                best.v_max = v;
                best_g = g;
            }
        });
        best.t_max = best_g as f64 * self.dt;
        best
    }

    pub fn membrane_trace(&self, pattern: &SpikePattern) -> Result<MembraneTrace, NeuronError> {
        self.check(pattern)?;
        let mut potentials = Vec::with_capacity(last_grid_index(pattern.duration(), self.dt) + 1);
        self.sweep(pattern, |_, v| potentials.push(v));
        Ok(self.finish_trace(potentials))
    }

    fn finish_trace(&self, potentials: Vec<f64>) -> MembraneTrace {
        let mut best = 0;
        for (g, &v) in potentials.iter().enumerate() {
            if v > potentials[best] {
                best = g;
            }
        }
        let v_max = potentials[best];
        MembraneTrace {
            dt: self.dt,
            t_max: best as f64 * self.dt,
            fired: self.fires(v_max),
            v_max,
            potentials,
        }
    }

    /// Strictly above threshold; equality is silence.
    pub fn fires(&self, v_max: f64) -> bool {
        v_max > self.v_th
    }

    pub fn classify(&self, pattern: &SpikePattern) -> Result<Label, NeuronError> {
        Ok(output_label(self.fires(self.peak(pattern)?.v_max)))
    }

    /// Classifies patterns in order. Dendrite counts are checked up front so a
    /// bad batch fails before any evaluation.
    pub fn classify_batch(&self, patterns: &[SpikePattern]) -> Result<Vec<Label>, NeuronError> {
        for (index, p) in patterns.iter().enumerate() {
            self.check(p).map_err(|e| NeuronError::AtPattern {
                index,
                source: alloc::boxed::Box::new(e),
            })?;
        }
        Ok(patterns
            .iter()
            .map(|p| output_label(self.fires(self.peak_unchecked(p).v_max)))
            .collect())
    }

    /// Direct evaluation of the potential: every grid point sums the kernel
    /// over every earlier spike. Quadratic in pattern size; kept as the
    /// reference the fast sweep is checked and timed against.
    pub fn membrane_trace_direct(
        &self,
        pattern: &SpikePattern,
    ) -> Result<MembraneTrace, NeuronError> {
        self.check(pattern)?;
        let potentials = (0..=last_grid_index(pattern.duration(), self.dt))
            .map(|g| {
                let t = g as f64 * self.dt;
                let mut v = self.v_rest;
                for s in pattern.spikes() {
                    if s.time <= t {
                        v += self.efficacies[s.dendrite as usize] * self.kernel.eval(t - s.time);
                    }
                }
                v
            })
            .collect();
        Ok(self.finish_trace(potentials))
    }

    /// One-pattern-at-a-time classification through the direct reference.
    pub fn classify_direct(&self, pattern: &SpikePattern) -> Result<Label, NeuronError> {
        Ok(output_label(self.membrane_trace_direct(pattern)?.fired))
    }
}

pub fn output_label(fired: bool) -> Label {
    if fired {
        Label::Gamma
    } else {
        Label::Neutron
    }
}
