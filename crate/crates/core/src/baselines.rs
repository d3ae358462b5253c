//! Classical pulse shape discrimination baselines.
//!
//! Each method reduces a normalized pulse to one discrimination factor. A
//! histogram of the factors is bimodal on separable data; the valley between
//! the two modes becomes the decision threshold.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::pulse::{Label, Pulse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("gate at sample {index} lies outside a pulse of {len} samples")]
    GateOutOfRange { index: usize, len: usize },
    #[error("pulse has no positive peak")]
    PeakNotFound,
    #[error("shaped pulse never crosses zero after its maximum")]
    NoZeroCrossing,
    #[error("all factors are equal; histogram range is empty")]
    DegenerateRange,
    #[error("histogram has a single mode; supply a threshold")]
    Unimodal,
    #[error("figure of merit needs factors from both classes")]
    SingleClass,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("factor {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid baseline config: {0}")]
    InvalidConfig(&'static str),
    #[error("pulse {index}: {source}")]
    AtPulse {
        index: usize,
        source: Box<BaselineError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Charge comparison.
    Cc,
    /// Charge integration.
    Ci,
    /// Zero crossing.
    Zc,
    /// Pulse gradient analysis.
    Pga,
    /// Frequency gradient analysis.
    Fga,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cc, Method::Zc, Method::Ci, Method::Pga, Method::Fga];

    pub fn id(self) -> &'static str {
        match self {
            Method::Cc => "cc",
            Method::Ci => "ci",
            Method::Zc => "zc",
            Method::Pga => "pga",
            Method::Fga => "fga",
        }
    }

    /// The class whose factors fall below the threshold. Slower tails raise
    /// every factor here, so it is gamma throughout.
    pub fn lower_class(self) -> Label {
        Label::Gamma
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method `{0}`; valid ids are cc, ci, zc, pga, fga")]
pub struct UnknownMethod(pub alloc::string::String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownMethod(s.into()))
    }
}

/// Gate offsets are sample counts after the pulse peak.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    /// End (exclusive) of the short gate; CI integrates from here.
    pub short_gate_end: usize,
    /// End (exclusive) of the long gate; `None` runs to the end of the pulse.
    pub long_gate_end: Option<usize>,
    /// Start of the delayed gate used by CC.
    pub delayed_gate_start: usize,
    pub pga_offset: usize,
    pub fga_k1: usize,
    pub fga_k2: usize,
    /// Time constant of every CR and RC stage, in samples.
    pub zc_shaping: f64,
    pub bins: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            short_gate_end: 10,
            long_gate_end: None,
            delayed_gate_start: 10,
            pga_offset: 20,
            fga_k1: 1,
            fga_k2: 2,
            zc_shaping: 10.0,
            bins: 100,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if self.fga_k1 == self.fga_k2 {
            return Err(BaselineError::InvalidConfig(
                "fga bins k1 and k2 must differ",
            ));
        }
        if let Some(end) = self.long_gate_end {
            if end <= self.short_gate_end.max(self.delayed_gate_start) {
                return Err(BaselineError::InvalidConfig(
                    "long gate must end after the short and delayed gates start",
                ));
            }
        }
        if !(self.zc_shaping > 0.0 && self.zc_shaping.is_finite()) {
            return Err(BaselineError::InvalidConfig(
                "zc shaping constant must be positive",
            ));
        }
        if self.bins < 2 {
            return Err(BaselineError::InvalidConfig(
                "histogram needs at least 2 bins",
            ));
        }
        Ok(())
    }
}

fn peak(samples: &[f64]) -> Result<usize, BaselineError> {
    let mut best = 0;
    for (i, &x) in samples.iter().enumerate() {
        if x > samples[best] {
            best = i;
        }
    }
    if samples[best] > 0.0 {
        Ok(best)
    } else {
        Err(BaselineError::PeakNotFound)
    }
}

/// Sum of `samples[start..end]`, both offsets from the peak.
fn gate(
    samples: &[f64],
    peak: usize,
    start: usize,
    end: Option<usize>,
) -> Result<f64, BaselineError> {
    let len = samples.len();
    let from = peak + start;
    if from >= len {
        return Err(BaselineError::GateOutOfRange { index: from, len });
    }
    let to = match end {
        Some(e) if peak + e > len => {
            return Err(BaselineError::GateOutOfRange {
                index: peak + e,
                len,
            })
        }
        Some(e) => peak + e,
        None => len,
    };
    Ok(samples[from..to].iter().sum())
}

fn cr(x: &[f64], tau: f64) -> Vec<f64> {
    let a = tau / (tau + 1.0);
    let (mut prev_x, mut prev_y) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            prev_y = a * (prev_y + v - prev_x);
            prev_x = v;
            prev_y
        })
        .collect()
}

fn rc(x: &[f64], tau: f64) -> Vec<f64> {
    let b = 1.0 / (tau + 1.0);
    let mut y = 0.0;
    x.iter()
        .map(|&v| {
            y += b * (v - y);
            y
        })
        .collect()
}

/// Bipolar shaping: two CR differentiators followed by two RC integrators.
pub fn bipolar_shape(samples: &[f64], tau: f64) -> Vec<f64> {
    rc(&rc(&cr(&cr(samples, tau), tau), tau), tau)
}

fn zero_crossing(samples: &[f64], tau: f64) -> Result<f64, BaselineError> {
    let shaped = bipolar_shape(samples, tau);
    let top = peak(&shaped)?;
    for i in top + 1..shaped.len() {
        if shaped[i] <= 0.0 {
            let (a, b) = (shaped[i - 1], shaped[i]);
            return Ok((i - 1) as f64 + a / (a - b));
        }
    }
    Err(BaselineError::NoZeroCrossing)
}

/// Magnitude of the `k`-th DFT coefficient.
pub fn dft_magnitude(samples: &[f64], k: usize) -> f64 {
    let n = samples.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &x) in samples.iter().enumerate() {
        let phase = 2.0 * PI * (k * i) as f64 / n;
        re += x * libm::cos(phase);
        im -= x * libm::sin(phase);
    }
    libm::sqrt(re * re + im * im)
}

/// Discrimination factor of one pulse.
pub fn factor(method: Method, pulse: &Pulse, cfg: &BaselineConfig) -> Result<f64, BaselineError> {
    let x = pulse.samples();
    let p = peak(x)?;
    match method {
        Method::Cc => {
            let delayed = gate(x, p, cfg.delayed_gate_start, cfg.long_gate_end)?;
            let total = gate(x, p, 0, cfg.long_gate_end)?;
            Ok(delayed / total)
        }
        Method::Ci => gate(x, p, cfg.short_gate_end, cfg.long_gate_end),
        Method::Zc => Ok(zero_crossing(x, cfg.zc_shaping)? - p as f64),
        Method::Pga => {
            let at = p + cfg.pga_offset;
            let v = *x.get(at).ok_or(BaselineError::GateOutOfRange {
                index: at,
                len: x.len(),
            })?;
            Ok(v / x[p])
        }
        Method::Fga => Ok(dft_magnitude(x, cfg.fga_k1) - dft_magnitude(x, cfg.fga_k2)),
    }
}

/// Factors for a whole dataset, optionally labeled by a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSeries {
    pub method: Method,
    pub factors: Vec<f64>,
    pub threshold: Option<f64>,
    pub predicted: Option<Vec<Label>>,
}

impl FactorSeries {
    pub fn new(method: Method, factors: Vec<f64>) -> Result<Self, BaselineError> {
        if let Some(index) = factors.iter().position(|f| !f.is_finite()) {
            return Err(BaselineError::NonFinite { index });
        }
        Ok(FactorSeries {
            method,
            factors,
            threshold: None,
            predicted: None,
        })
    }

    pub fn compute(
        method: Method,
        pulses: &[Pulse],
        cfg: &BaselineConfig,
    ) -> Result<Self, BaselineError> {
        cfg.validate()?;
        let factors = pulses
            .iter()
            .enumerate()
            .map(|(index, p)| {
                factor(method, p, cfg).map_err(|e| BaselineError::AtPulse {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        FactorSeries::new(method, factors)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over `[min, max]`; the maximum lands in the last bin.
pub fn histogram(factors: &[f64], bins: usize) -> Result<Histogram, BaselineError> {
    if bins < 2 {
        return Err(BaselineError::InvalidConfig(
            "histogram needs at least 2 bins",
        ));
    }
    if let Some(index) = factors.iter().position(|f| !f.is_finite()) {
        return Err(BaselineError::NonFinite { index });
    }
    let lo = factors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = factors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(BaselineError::DegenerateRange);
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0; bins];
    for &f in factors {
        let i = ((f - lo) / width) as usize;
        counts[i.min(bins - 1)] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Local maxima of `y`, counting a flat run once when both its neighbours
/// are lower. Returns the first index of each run.
fn peaks(y: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < y.len() {
        let mut j = i;
        while j + 1 < y.len() && y[j + 1] == y[i] {
            j += 1;
        }
        let left_lower = i == 0 || y[i - 1] < y[i];
        let right_lower = j + 1 == y.len() || y[j + 1] < y[i];
        if left_lower && right_lower && !(i == 0 && j + 1 == y.len()) {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

fn smooth(y: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Peaks lower than this fraction of the tallest one are treated as noise.
pub const MIN_MODE_FRACTION: f64 = 0.05;

fn significant_peaks(y: &[f64]) -> Vec<usize> {
    let top = y.iter().copied().fold(0.0, f64::max);
    peaks(y)
        .into_iter()
        .filter(|&i| y[i] >= MIN_MODE_FRACTION * top)
        .collect()
}

/// Counts as a valley when the lowest point between two modes drops below
/// `VALLEY_DEPTH` times the smaller mode.
pub const VALLEY_DEPTH: f64 = 0.75;

fn deep_valley(y: &[f64], a: usize, b: usize) -> bool {
    let floor = y[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
    floor < VALLEY_DEPTH * y[a].min(y[b])
}

/// Threshold at the deepest bin between the two main histogram modes.
/// The counts are smoothed with a 3-point mean until two modes with a
/// clear dip between them remain; the lower edge of the emptiest bin between them is returned,
/// preferring the lowest such bin.
pub fn valley_threshold(hist: &Histogram) -> Result<f64, BaselineError> {
    let mut y: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let mut modes = significant_peaks(&y);
    for _ in 0..10 * y.len() {
        if modes.len() < 2 || (modes.len() == 2 && deep_valley(&y, modes[0], modes[1])) {
            break;
        }
        y = smooth(&y);
        modes = significant_peaks(&y);
    }
    if modes.len() != 2 || !deep_valley(&y, modes[0], modes[1]) {
        return Err(BaselineError::Unimodal);
    }
    let (a, b) = (modes[0], modes[1]);
    let mut best = a + 1;
    for i in a + 1..b {
        if hist.counts[i] < hist.counts[best] {
            best = i;
        }
    }
    if best >= b {
        return Err(BaselineError::Unimodal);
    }
    Ok(hist.edges[best])
}

/// Labels every factor: below the threshold is the method's lower class.
/// Without a threshold, the histogram valley is used.
pub fn classify_by_valley(
    series: &FactorSeries,
    threshold: Option<f64>,
    bins: usize,
) -> Result<FactorSeries, BaselineError> {
    let t = match threshold {
        Some(t) => t,
        None => valley_threshold(&histogram(&series.factors, bins)?)?,
    };
    let lower = series.method.lower_class();
    let predicted = series
        .factors
        .iter()
        .map(|&f| if f < t { lower } else { lower.other() })
        .collect();
    Ok(FactorSeries {
        threshold: Some(t),
        predicted: Some(predicted),
        ..series.clone()
    })
}

/// Full width at half maximum of a normal distribution, per unit std.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Spread below this fraction of the factor scale is rounding, not signal.
const SPREAD_FLOOR: f64 = 1e-9;

/// Peak separation over summed FWHMs, from per-class moments. Equal means
/// give 0; zero spread with distinct means gives `+inf`.
pub fn figure_of_merit(factors: &[f64], labels: &[Label]) -> Result<f64, BaselineError> {
    if factors.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            expected: factors.len(),
            found: labels.len(),
        });
    }
    let pick = |c: Label| -> Vec<f64> {
        factors
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(&f, _)| f)
            .collect()
    };
    let (g, n) = (pick(Label::Gamma), pick(Label::Neutron));
    if g.is_empty() || n.is_empty() {
        return Err(BaselineError::SingleClass);
    }
    let ((m1, s1), (m2, s2)) = (mean_std(&g), mean_std(&n));
    let gap = (m1 - m2).abs();
    if gap == 0.0 {
        return Ok(0.0);
    }
    let width = FWHM_PER_SIGMA * (s1 + s2);
    let scale = m1.abs().max(m2.abs());
    Ok(if width <= SPREAD_FLOOR * scale {
        f64::INFINITY
    } else {
        gap / width
    })
}
