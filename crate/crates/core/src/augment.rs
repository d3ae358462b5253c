//! Training-time noise augmentation.
//!
//! Three perturbations, applied to training copies only: Gaussian noise on
//! the signal samples, Gaussian jitter of encoded spike times, and random
//! spike adding & missing per (dendrite, window) slot.

use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::encoding::{Spike, SpikePattern};
use crate::pulse::Pulse;

/// When augmented copies are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AugmentMode {
    /// A fresh copy of every training pulse each epoch.
    #[default]
    PerEpoch,
    /// One copy per training pulse, drawn once before training.
    Fixed,
    Off,
}

impl AugmentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentMode::PerEpoch => "per_epoch",
            AugmentMode::Fixed => "fixed",
            AugmentMode::Off => "off",
        }
    }
}

impl FromStr for AugmentMode {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_epoch" => Ok(AugmentMode::PerEpoch),
            "fixed" => Ok(AugmentMode::Fixed),
            "off" => Ok(AugmentMode::Off),
            _ => Err("expected one of per_epoch, fixed, off"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub gaussian_sigma: f64,
    pub jitter_sigma: f64,
    pub add_miss_p: f64,
    pub mode: AugmentMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            gaussian_sigma: 1e-4,
            jitter_sigma: 1e-4,
            add_miss_p: 1e-4,
            mode: AugmentMode::PerEpoch,
        }
    }
}

impl AugmentConfig {
    pub fn off() -> Self {
        AugmentConfig {
            gaussian_sigma: 0.0,
            jitter_sigma: 0.0,
            add_miss_p: 0.0,
            mode: AugmentMode::Off,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err("aug.gaussian_sigma must be finite and non-negative");
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err("aug.jitter_sigma must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.add_miss_p) {
            return Err("aug.add_miss_p must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn enabled(&self) -> bool {
        self.mode != AugmentMode::Off
    }
}

/// Adds independent `Normal(0, sigma)` noise to every sample and rescales
/// the result back to a unit peak. A copy that ends up flat (only possible
/// for pathological draws) falls back to the input.
pub fn augment_gaussian<R: Rng + ?Sized>(pulse: &Pulse, sigma: f64, rng: &mut R) -> Pulse {
    if sigma == 0.0 {
        return pulse.clone();
    }
    let samples = add_gaussian_noise(pulse.samples(), sigma, rng);
    Pulse::new(samples, pulse.label())
        .and_then(|p| p.rescale())
        .unwrap_or_else(|_| pulse.clone())
}

fn add_gaussian_noise<R: Rng + ?Sized>(samples: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    samples.iter().map(|&x| x + noise.sample(rng)).collect()
}

/// Shifts every spike by `Normal(0, sigma)`, clamped to its own window.
pub fn augment_jitter<R: Rng + ?Sized>(
    pattern: &SpikePattern,
    sigma: f64,
    rng: &mut R,
) -> SpikePattern {
    if sigma == 0.0 {
        return pattern.clone();
    }
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let spikes = pattern
        .spikes()
        .iter()
        .map(|s| {
            let start = s.window as f64;
            Spike {
                time: (s.time + noise.sample(rng)).clamp(start, start + 1.0),
                ..*s
            }
        })
        .collect();
    SpikePattern::from_valid_spikes(pattern.dendrites(), pattern.windows(), spikes)
}

/// Flips every (dendrite, window) slot with probability `p`: a present spike
/// is deleted, an empty slot gains a spike at a uniform time in its window.
/// At `p = 1` the result is the exact occupancy complement.
pub fn augment_add_miss<R: Rng + ?Sized>(
    pattern: &SpikePattern,
    p: f64,
    rng: &mut R,
) -> SpikePattern {
    if p == 0.0 {
        return pattern.clone();
    }
    let (dendrites, windows) = (pattern.dendrites(), pattern.windows());
    let grid = pattern.to_grid();
    let mut spikes = Vec::with_capacity(pattern.spike_count());
    for d in 0..dendrites {
        for w in 0..windows {
            let flip = rng.random::<f64>() < p;
            match (grid[d * windows + w], flip) {
                (Some(time), false) => spikes.push(Spike {
                    time,
                    dendrite: d as u32,
                    window: w as u32,
                }),
                (None, true) => spikes.push(Spike {
                    time: w as f64 + rng.random::<f64>(),
                    dendrite: d as u32,
                    window: w as u32,
                }),
                _ => {}
            }
        }
    }
    SpikePattern::from_valid_spikes(dendrites, windows, spikes)
}

/// Gaussian signal noise, then encoding, then jitter and adding & missing.
pub fn augmented_copy<R: Rng + ?Sized>(
    pulse: &Pulse,
    encoder: &crate::encoding::Encoder,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<SpikePattern, crate::encoding::EncodeError> {
    let noisy = augment_gaussian(pulse, cfg.gaussian_sigma, rng);
    let pattern = encoder.encode(&noisy)?;
    let pattern = augment_jitter(&pattern, cfg.jitter_sigma, rng);
    Ok(augment_add_miss(&pattern, cfg.add_miss_p, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Encoder;
    use crate::rng;
    use alloc::vec;
    use proptest::prelude::*;

    fn sample_pattern() -> SpikePattern {
        let pulse = Pulse::new(
            vec![0.0, 0.2, 1.0, 0.7, 0.4, 0.2, 0.1, 0.05, 0.0, 0.0],
            None,
        )
        .unwrap();
        Encoder::with_dendrites(8).unwrap().encode(&pulse).unwrap()
    }

    #[test]
    fn zero_intensity_is_identity() {
        let mut r = rng::stream(1, "t");
        let pulse = Pulse::new(vec![0.0, 1.0, 0.5], None)
            .unwrap()
            .normalize()
            .unwrap();
        assert_eq!(augment_gaussian(&pulse, 0.0, &mut r), pulse);
        let p = sample_pattern();
        assert_eq!(augment_jitter(&p, 0.0, &mut r), p);
        assert_eq!(augment_add_miss(&p, 0.0, &mut r), p);
    }

    #[test]
    fn gaussian_noise_is_unbiased() {
        let sigma = 1e-2;
        let n = 100_000;
        let original = vec![0.5; n];
        let mut r = rng::stream(3, "gauss");
        // the additive step, before rescaling
        let noisy = add_gaussian_noise(&original, sigma, &mut r);
        let mean = noisy.iter().zip(&original).map(|(a, b)| a - b).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "{mean}");
        let pulse = Pulse::new(original, None).unwrap();
        let out = augment_gaussian(&pulse, sigma, &mut r);
        assert_eq!(out.samples().iter().copied().fold(0.0, f64::max), 1.0);
        assert!(out.samples().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn complement_at_certainty() {
        let p = sample_pattern();
        let mut r = rng::stream(5, "am");
        let c = augment_add_miss(&p, 1.0, &mut r);
        let (g0, g1) = (p.to_grid(), c.to_grid());
        assert_eq!(
            p.spike_count() + c.spike_count(),
            p.dendrites() * p.windows()
        );
        for (a, b) in g0.iter().zip(&g1) {
            assert_ne!(a.is_some(), b.is_some());
        }
    }

    #[test]
    fn flip_rate_matches_probability() {
        let p = SpikePattern::from_spikes(100, 100, vec![]).unwrap();
        let mut r = rng::stream(11, "rate");
        let out = augment_add_miss(&p, 0.3, &mut r);
        let rate = out.spike_count() as f64 / 10_000.0;
        assert!((rate - 0.3).abs() <= 0.015, "{rate}");
    }

    #[test]
    fn mode_names() {
        for m in [AugmentMode::PerEpoch, AugmentMode::Fixed, AugmentMode::Off] {
            assert_eq!(m.as_str().parse::<AugmentMode>(), Ok(m));
        }
        assert!("sometimes".parse::<AugmentMode>().is_err());
    }

    #[test]
    fn config_bounds() {
        assert!(AugmentConfig::default().validate().is_ok());
        let bad = AugmentConfig {
            add_miss_p: 1.5,
            ..AugmentConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn jitter_keeps_count_and_windows(sigma in 0.0f64..5.0, seed in any::<u64>()) {
            let p = sample_pattern();
            let mut r = rng::stream(seed, "jit");
            let j = augment_jitter(&p, sigma, &mut r);
            prop_assert_eq!(j.spike_count(), p.spike_count());
            prop_assert_eq!(j.dendrites(), p.dendrites());
            for s in j.spikes() {
                let w = s.window as f64;
                prop_assert!(s.time >= w && s.time <= w + 1.0);
            }
            let slots = |q: &SpikePattern| q.to_grid().iter().map(Option::is_some).collect::<Vec<_>>();
            prop_assert_eq!(slots(&j), slots(&p));
        }

        #[test]
        fn add_miss_keeps_shape(prob in 0.0f64..=1.0, seed in any::<u64>()) {
            let p = sample_pattern();
            let mut r = rng::stream(seed, "am");
            let out = augment_add_miss(&p, prob, &mut r);
            prop_assert_eq!((out.dendrites(), out.windows()), (p.dendrites(), p.windows()));
            for s in out.spikes() {
                let w = s.window as f64;
                prop_assert!(s.time >= w && s.time <= w + 1.0);
            }
        }

        #[test]
        fn same_seed_same_copy(seed in any::<u64>()) {
            let enc = Encoder::with_dendrites(8).unwrap();
            let pulse = Pulse::new(vec![0.0, 0.3, 1.0, 0.6, 0.2, 0.0], None).unwrap();
            let cfg = AugmentConfig { gaussian_sigma: 0.05, jitter_sigma: 0.1, add_miss_p: 0.2, mode: AugmentMode::PerEpoch };
            let a = augmented_copy(&pulse, &enc, &cfg, &mut rng::stream(seed, "x")).unwrap();
            let b = augmented_copy(&pulse, &enc, &cfg, &mut rng::stream(seed, "x")).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
