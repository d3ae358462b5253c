//! Two-stage spike encoding of normalized pulses.
//!
//! Every sample owns a unit-width window; window `k` (0-based) spans
//! `[k, k + 1]`. The latency stage places one spike per sample at
//! `k + 1 - x`, so larger amplitudes fire earlier. The receptive field stage
//! fans each latency spike out over `J` dendrites: the in-window offset `f`
//! is scored by each Gaussian field, and a response `r >= threshold` becomes
//! a spike at `k + (1 - r)` on that field's dendrite.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};
use core::str::FromStr;

use thiserror::Error;

use crate::pulse::{Dataset, Pulse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("sample {index} = {value} is outside [0, 1]; normalize the pulse first")]
    NotNormalized { index: usize, value: f64 },
    #[error("invalid receptive field bank: {0}")]
    InvalidBank(&'static str),
    #[error("invalid amplitude threshold {0}")]
    InvalidThreshold(f64),
    #[error("pulse {index}: {source}")]
    AtPulse {
        index: usize,
        source: Box<EncodeError>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("spike on dendrite {dendrite} but the pattern has {dendrites}")]
    DendriteOutOfRange { dendrite: usize, dendrites: usize },
    #[error("spike in window {window} but the pattern has {windows}")]
    WindowOutOfRange { window: usize, windows: usize },
    #[error("spike time {time} is outside window {window}")]
    OutsideWindow { window: usize, time: f64 },
    #[error("two spikes on dendrite {dendrite} in window {window}")]
    DuplicateSlot { dendrite: usize, window: usize },
    #[error("malformed pattern dump: {0}")]
    Parse(String),
}

/// Output of the latency stage: one optional spike time per sample window.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyTrain {
    times: Vec<Option<f64>>,
}

impl LatencyTrain {
    /// Entry `k` is the spike in window `[k, k + 1]`, if any.
    pub fn times(&self) -> &[Option<f64>] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn spike_count(&self) -> usize {
        self.times.iter().flatten().count()
    }
}

/// Latency stage. Samples below `amp_threshold` produce no spike.
pub fn encode_latency(pulse: &Pulse, amp_threshold: f64) -> Result<LatencyTrain, EncodeError> {
    let times = pulse
        .samples()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            if !(0.0..=1.0).contains(&x) {
                return Err(EncodeError::NotNormalized { index: k, value: x });
            }
            Ok((x >= amp_threshold).then(|| (k + 1) as f64 - x))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LatencyTrain { times })
}

/// `J` Gaussian receptive fields with means spread evenly over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfBank {
    sigma: f64,
    threshold: f64,
    means: Vec<f64>,
    // responses below threshold imply z^2 above this bound
    z2_cutoff: f64,
}

impl GrfBank {
    pub fn new(count: usize, sigma: f64, threshold: f64) -> Result<Self, EncodeError> {
        if count < 2 {
            return Err(EncodeError::InvalidBank(
                "at least 2 receptive fields are required",
            ));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(EncodeError::InvalidBank("sigma must be positive"));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(EncodeError::InvalidBank(
                "response threshold must lie in (0, 1)",
            ));
        }
        let step = 1.0 / (count - 1) as f64;
        let means = (0..count)
            .map(|j| if j + 1 == count { 1.0 } else { j as f64 * step })
            .collect();
        Ok(GrfBank {
            sigma,
            threshold,
            means,
            z2_cutoff: -2.0 * libm::log(threshold) * (1.0 + 1e-9),
        })
    }

    pub fn count(&self) -> usize {
        self.means.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Peak-normalized response of field `j` to in-window offset `f`.
    pub fn response(&self, j: usize, f: f64) -> f64 {
        let z = (f - self.means[j]) / self.sigma;
        libm::exp(-0.5 * z * z)
    }

    /// Spike offsets within the window for every field that responds to `f`.
    fn fan_out(&self, f: f64, mut emit: impl FnMut(usize, f64)) {
        for (j, &mu) in self.means.iter().enumerate() {
            let z = (f - mu) / self.sigma;
            let z2 = z * z;
            if z2 > self.z2_cutoff {
                continue;
            }
            let r = libm::exp(-0.5 * z2);
            if r >= self.threshold {
                emit(j, 1.0 - r);
            }
        }
    }
}

/// One input spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    pub time: f64,
    pub dendrite: u32,
    /// 0-based window index; the spike lies in `[window, window + 1]`.
    pub window: u32,
}

/// Spatiotemporal input of the Tempotron: at most one spike per
/// (dendrite, window) slot. Spikes are kept sorted by time, then dendrite.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikePattern {
    dendrites: usize,
    windows: usize,
    spikes: Vec<Spike>,
}

fn spike_order(a: &Spike, b: &Spike) -> core::cmp::Ordering {
    a.time
        .total_cmp(&b.time)
        .then(a.dendrite.cmp(&b.dendrite))
        .then(a.window.cmp(&b.window))
}

impl SpikePattern {
    /// Validates and sorts an arbitrary spike list.
    pub fn from_spikes(
        dendrites: usize,
        windows: usize,
        mut spikes: Vec<Spike>,
    ) -> Result<Self, PatternError> {
        let mut occupied = vec![false; dendrites * windows];
        for s in &spikes {
            let (d, w) = (s.dendrite as usize, s.window as usize);
            if d >= dendrites {
                return Err(PatternError::DendriteOutOfRange {
                    dendrite: d,
                    dendrites,
                });
            }
            if w >= windows {
                return Err(PatternError::WindowOutOfRange { window: w, windows });
            }
            if !(s.time >= w as f64 && s.time <= (w + 1) as f64) {
                return Err(PatternError::OutsideWindow {
                    window: w,
                    time: s.time,
                });
            }
            let slot = &mut occupied[d * windows + w];
            if *slot {
                return Err(PatternError::DuplicateSlot {
                    dendrite: d,
                    window: w,
                });
            }
            *slot = true;
        }
        spikes.sort_by(spike_order);
        Ok(SpikePattern {
            dendrites,
            windows,
            spikes,
        })
    }

    /// Caller guarantees the slot and containment invariants.
    pub(crate) fn from_valid_spikes(
        dendrites: usize,
        windows: usize,
        mut spikes: Vec<Spike>,
    ) -> Self {
        spikes.sort_by(spike_order);
        SpikePattern {
            dendrites,
            windows,
            spikes,
        }
    }

    pub fn dendrites(&self) -> usize {
        self.dendrites
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    /// Pattern length in window units.
    pub fn duration(&self) -> f64 {
        self.windows as f64
    }

    /// All spikes in time order.
    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn spike_count(&self) -> usize {
        self.spikes.len()
    }

    /// Spike times on one dendrite, in time order.
    pub fn dendrite_times(&self, dendrite: usize) -> impl Iterator<Item = f64> + '_ {
        self.spikes
            .iter()
            .filter(move |s| s.dendrite as usize == dendrite)
            .map(|s| s.time)
    }

    /// Dense `dendrites x windows` grid of optional spike times.
    pub fn to_grid(&self) -> Vec<Option<f64>> {
        let mut grid = vec![None; self.dendrites * self.windows];
        for s in &self.spikes {
            grid[s.dendrite as usize * self.windows + s.window as usize] = Some(s.time);
        }
        grid
    }

    pub fn get(&self, dendrite: usize, window: usize) -> Option<f64> {
        self.spikes
            .iter()
            .find(|s| s.dendrite as usize == dendrite && s.window as usize == window)
            .map(|s| s.time)
    }

    /// Same spikes with dendrites relabeled: spike on `d` moves to `perm[d]`.
    pub fn permute_dendrites(&self, perm: &[usize]) -> SpikePattern {
        let spikes = self
            .spikes
            .iter()
            .map(|s| Spike {
                dendrite: perm[s.dendrite as usize] as u32,
                ..*s
            })
            .collect();
        SpikePattern::from_valid_spikes(self.dendrites, self.windows, spikes)
    }
}

/// Text dump: one line per dendrite, one token per window. A present spike
/// is written `idx:time` with the 1-based window index, an empty slot `-`.
impl fmt::Display for SpikePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let grid = self.to_grid();
        for d in 0..self.dendrites {
            let mut line = String::new();
            for w in 0..self.windows {
                if w > 0 {
                    line.push(' ');
                }
                match grid[d * self.windows + w] {
                    Some(t) => write!(line, "{}:{}", w + 1, t)?,
                    None => line.push('-'),
                }
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for SpikePattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| PatternError::Parse(msg);
        let mut spikes = Vec::new();
        let mut windows = None;
        let mut dendrites = 0;
        for (d, line) in s.lines().enumerate() {
            let tokens: Vec<&str> = line.split(' ').collect();
            match windows {
                None => windows = Some(tokens.len()),
                Some(n) if n != tokens.len() => {
                    return Err(bad(alloc::format!(
                        "line {} has {} tokens, expected {n}",
                        d + 1,
                        tokens.len()
                    )))
                }
                _ => {}
            }
            for (w, tok) in tokens.iter().enumerate() {
                if *tok == "-" {
                    continue;
                }
                let (idx, time) = tok
                    .split_once(':')
                    .ok_or_else(|| bad(alloc::format!("token {tok:?}")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| bad(alloc::format!("window index {idx:?}")))?;
                if idx != w + 1 {
                    return Err(bad(alloc::format!("token {tok:?} in column {}", w + 1)));
                }
                let time: f64 = time
                    .parse()
                    .map_err(|_| bad(alloc::format!("time {time:?}")))?;
                spikes.push(Spike {
                    time,
                    dendrite: d as u32,
                    window: w as u32,
                });
            }
            dendrites = d + 1;
        }
        SpikePattern::from_spikes(dendrites, windows.unwrap_or(0), spikes)
    }
}

/// Receptive field stage.
pub fn encode_grf(train: &LatencyTrain, bank: &GrfBank) -> SpikePattern {
    let mut spikes = Vec::new();
    for (k, time) in train.times.iter().enumerate() {
        let Some(s) = *time else { continue };
        let start = k as f64;
        let f = (s - start).clamp(0.0, 1.0);
        bank.fan_out(f, |j, offset| {
            spikes.push(Spike {
                time: start + offset,
                dendrite: j as u32,
                window: k as u32,
            })
        });
    }
    SpikePattern::from_valid_spikes(bank.count(), train.len(), spikes)
}

/// Both encoding stages with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    bank: GrfBank,
    amp_threshold: f64,
}

/// With the default threshold a field responds within 0.32 of its mean, so a
/// mid-window spike reaches 15 of 25 fields.
pub const DEFAULT_GRF_SIGMA: f64 = 0.15;
pub const DEFAULT_GRF_THRESHOLD: f64 = 0.1;
pub const DEFAULT_AMP_THRESHOLD: f64 = 0.01;

impl Encoder {
    pub fn new(bank: GrfBank, amp_threshold: f64) -> Result<Self, EncodeError> {
        if !(0.0..=1.0).contains(&amp_threshold) {
            return Err(EncodeError::InvalidThreshold(amp_threshold));
        }
        Ok(Encoder {
            bank,
            amp_threshold,
        })
    }

    /// `dendrites` fields with the default width and thresholds.
    pub fn with_dendrites(dendrites: usize) -> Result<Self, EncodeError> {
        Encoder::new(
            GrfBank::new(dendrites, DEFAULT_GRF_SIGMA, DEFAULT_GRF_THRESHOLD)?,
            DEFAULT_AMP_THRESHOLD,
        )
    }

    pub fn bank(&self) -> &GrfBank {
        &self.bank
    }

    pub fn amp_threshold(&self) -> f64 {
        self.amp_threshold
    }

    pub fn dendrites(&self) -> usize {
        self.bank.count()
    }

    pub fn encode(&self, pulse: &Pulse) -> Result<SpikePattern, EncodeError> {
        Ok(encode_grf(
            &encode_latency(pulse, self.amp_threshold)?,
            &self.bank,
        ))
    }

    /// Encodes pulses in order; the first failure reports its index.
    pub fn encode_all<'a>(
        &self,
        pulses: impl IntoIterator<Item = &'a Pulse>,
    ) -> Result<Vec<SpikePattern>, EncodeError> {
        pulses
            .into_iter()
            .enumerate()
            .map(|(index, p)| {
                self.encode(p).map_err(|e| EncodeError::AtPulse {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    pub fn encode_dataset(&self, ds: &Dataset) -> Result<Vec<SpikePattern>, EncodeError> {
        self.encode_all(ds.pulses())
    }
}

/// Patterns laid out as a `(dendrites, pulses, windows)` tensor, row-major,
/// with `NaN` marking empty slots.
#[derive(Debug, Clone)]
pub struct DenseTensor {
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn from_patterns(patterns: &[SpikePattern]) -> DenseTensor {
        let dendrites = patterns.first().map_or(0, SpikePattern::dendrites);
        let windows = patterns.first().map_or(0, SpikePattern::windows);
        let n = patterns.len();
        let mut data = vec![f64::NAN; dendrites * n * windows];
        for (p, pattern) in patterns.iter().enumerate() {
            for s in pattern.spikes() {
                data[(s.dendrite as usize * n + p) * windows + s.window as usize] = s.time;
            }
        }
        DenseTensor {
            shape: [dendrites, n, windows],
            data,
        }
    }

    pub fn get(&self, dendrite: usize, pulse: usize, window: usize) -> Option<f64> {
        let [_, n, w] = self.shape;
        let v = self.data[(dendrite * n + pulse) * w + window];
        (!v.is_nan()).then_some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn normalized(xs: &[f64]) -> Pulse {
        Pulse::new(xs.to_vec(), None).unwrap()
    }

    #[test]
    fn latency_times_follow_amplitude() {
        let train = encode_latency(&normalized(&[0.0, 0.5, 1.0, 0.25]), 0.01).unwrap();
        assert_eq!(train.times(), &[None, Some(1.5), Some(2.0), Some(3.75)]);
    }

    #[test]
    fn peak_sample_fires_at_window_start() {
        let train = encode_latency(&normalized(&[0.2, 0.3, 1.0]), 0.01).unwrap();
        // 1-based window 3 is 0-based window 2
        assert_eq!(train.times()[2], Some(2.0));
    }

    #[test]
    fn weak_samples_are_silent() {
        let train = encode_latency(&normalized(&[1.0, 0.5, 0.0, 0.0, 0.0]), 0.01).unwrap();
        assert_eq!(train.times()[4], None);
        assert_eq!(train.spike_count(), 2);
    }

    #[test]
    fn latency_rejects_unnormalized_input() {
        assert!(matches!(
            encode_latency(&normalized(&[0.0, 1.5]), 0.01),
            Err(EncodeError::NotNormalized { index: 1, .. })
        ));
    }

    #[test]
    fn bank_means_span_unit_interval() {
        let bank = GrfBank::new(25, 0.15, 0.1).unwrap();
        assert_eq!(bank.means()[0], 0.0);
        assert_eq!(bank.means()[24], 1.0);
        for w in bank.means().windows(2) {
            assert!((w[1] - w[0] - 1.0 / 24.0).abs() < 1e-15);
        }
        assert!(GrfBank::new(1, 0.15, 0.1).is_err());
        assert!(GrfBank::new(5, 0.0, 0.1).is_err());
        assert!(GrfBank::new(5, 0.1, 1.0).is_err());
    }

    fn single_spike_train(offset: f64, window: usize) -> LatencyTrain {
        let mut times = vec![None; window + 1];
        times[window] = Some(window as f64 + offset);
        LatencyTrain { times }
    }

    #[test]
    fn field_centred_on_offset_fires_at_window_start() {
        let bank = GrfBank::new(5, 0.15, 0.1).unwrap();
        let pattern = encode_grf(&single_spike_train(0.25, 3), &bank);
        assert_eq!(pattern.get(1, 3), Some(3.0));
    }

    #[test]
    fn distant_fields_stay_silent() {
        let bank = GrfBank::new(5, 0.15, 0.1).unwrap();
        let pattern = encode_grf(&single_spike_train(0.0, 0), &bank);
        assert_eq!(pattern.get(4, 0), None);
        assert!(pattern.get(0, 0).is_some());
    }

    #[test]
    fn default_bank_fan_out() {
        // response >= 0.1 within sigma * sqrt(2 ln 10) = 0.3219 of each mean
        let enc = Encoder::with_dendrites(25).unwrap();
        let fired = |f: f64| encode_grf(&single_spike_train(f, 0), enc.bank()).spike_count();
        assert_eq!(fired(0.5), 15);
        assert_eq!(fired(0.0), 8);
        assert_eq!(fired(1.0), 8);
        for k in 0..=20 {
            let f = 0.33 + 0.0165 * k as f64;
            assert!((15..=16).contains(&fired(f)), "offset {f}");
        }
    }

    #[test]
    fn three_field_fan_out() {
        // J = 3, sigma = 0.5, f = 0.5: responses e^-0.5, 1, e^-0.5
        let bank = GrfBank::new(3, 0.5, 0.1).unwrap();
        let pattern = encode_grf(&single_spike_train(0.5, 4), &bank);
        let side = 1.0 - 0.606_530_659_712_633_4;
        let expected = [4.0 + side, 4.0, 4.0 + side];
        for (d, want) in expected.iter().enumerate() {
            let got = pattern.get(d, 4).unwrap();
            assert!((got - want).abs() < 1e-12, "dendrite {d}: {got} vs {want}");
        }
        assert!((4.0 + side - 4.393_469_340_287_367).abs() < 1e-12);
    }

    #[test]
    fn pattern_validation() {
        let ok = Spike {
            time: 1.5,
            dendrite: 0,
            window: 1,
        };
        assert!(SpikePattern::from_spikes(2, 3, vec![ok]).is_ok());
        assert!(matches!(
            SpikePattern::from_spikes(2, 3, vec![Spike { window: 0, ..ok }]),
            Err(PatternError::OutsideWindow { .. })
        ));
        assert!(matches!(
            SpikePattern::from_spikes(2, 3, vec![ok, Spike { time: 1.7, ..ok }]),
            Err(PatternError::DuplicateSlot { .. })
        ));
        assert!(matches!(
            SpikePattern::from_spikes(2, 3, vec![Spike { dendrite: 2, ..ok }]),
            Err(PatternError::DendriteOutOfRange { .. })
        ));
    }

    #[test]
    fn dump_round_trips() {
        let enc = Encoder::with_dendrites(6).unwrap();
        let p = enc
            .encode(&normalized(&[0.0, 0.3, 1.0, 0.6, 0.05, 0.0]))
            .unwrap();
        let text = p.to_string();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().all(|l| l.split(' ').count() == 6));
        let back: SpikePattern = text.parse().unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn dump_format_is_stable() {
        let p = SpikePattern::from_spikes(
            2,
            3,
            vec![
                Spike {
                    time: 0.25,
                    dendrite: 0,
                    window: 0,
                },
                Spike {
                    time: 2.0,
                    dendrite: 1,
                    window: 2,
                },
            ],
        )
        .unwrap();
        assert_eq!(p.to_string(), "1:0.25 - -\n- - 3:2\n");
    }

    #[test]
    fn dense_tensor_layout() {
        let enc = Encoder::with_dendrites(4).unwrap();
        let pulses = [normalized(&[0.0, 1.0, 0.5]), normalized(&[1.0, 0.2, 0.0])];
        let patterns = enc.encode_all(&pulses).unwrap();
        let t = DenseTensor::from_patterns(&patterns);
        assert_eq!(t.shape, [4, 2, 3]);
        for (p, pattern) in patterns.iter().enumerate() {
            for d in 0..4 {
                for w in 0..3 {
                    assert_eq!(t.get(d, p, w), pattern.get(d, w));
                }
            }
        }
    }

    #[test]
    fn dataset_errors_carry_the_pulse_index() {
        let enc = Encoder::with_dendrites(4).unwrap();
        let pulses = [normalized(&[0.0, 1.0]), normalized(&[0.0, 2.0])];
        match enc.encode_all(&pulses) {
            Err(EncodeError::AtPulse { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn higher_amplitude_fires_earlier(a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
            prop_assume!(a != b);
            let train = encode_latency(&normalized(&[a, b]), 0.01).unwrap();
            let fa = train.times()[0].unwrap();
            let fb = train.times()[1].unwrap() - 1.0;
            prop_assert_eq!(a > b, fa < fb);
        }

        #[test]
        fn fan_out_respects_bounds(xs in prop::collection::vec(0.0f64..=1.0, 2..40), sigma in 0.05f64..0.5) {
            let bank = GrfBank::new(9, sigma, 0.1).unwrap();
            let train = encode_latency(&normalized(&xs), 0.01).unwrap();
            let pattern = encode_grf(&train, &bank);
            prop_assert!(pattern.spike_count() <= 9 * train.spike_count());
            for s in pattern.spikes() {
                let w = s.window as f64;
                prop_assert!(s.time >= w && s.time <= w + 1.0);
                prop_assert!(train.times()[s.window as usize].is_some());
            }
            prop_assert!(pattern.spikes().windows(2).all(|p| p[0].time <= p[1].time));
        }

        #[test]
        fn tiny_threshold_reaches_every_field(f in 0.0f64..=1.0) {
            let bank = GrfBank::new(7, 0.3, 1e-12).unwrap();
            let pattern = encode_grf(&single_spike_train(f, 0), &bank);
            prop_assert_eq!(pattern.spike_count(), 7);
        }
    }
}
