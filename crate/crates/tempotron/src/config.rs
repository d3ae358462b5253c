//! Run configuration: built-in defaults, then an optional `key = value`
//! file, then command-line flags.
//!
//! Keys are dotted (`aug.jitter_sigma`). Two shorthand keys set several
//! values at once and are not echoed: `train.lr = low:high` and
//! `aug.all = x` (all three augmentation intensities).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use tempotron_core::learning::TrainConfig;
use tempotron_core::{AugmentMode, BaselineConfig, Method, SyntheticConfig};

use crate::atomic;
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{key} = {value:?}: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
}

/// Input and output locations; all relative to the working directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub snapshots: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Global seed; generation and training derive their streams from it.
    pub seed: u64,
    pub synth: SyntheticConfig,
    pub train: TrainConfig,
    pub baseline: BaselineConfig,
    pub methods: Vec<Method>,
    /// Fixed factor threshold; `None` picks the histogram valley.
    pub threshold: Option<f64>,
    /// Whether input CSVs carry a label column.
    pub labels: bool,
    /// Grid step used by `eval` instead of the model's own.
    pub eval_dt: Option<f64>,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SyntheticConfig::default();
        let seed = synth.seed;
        RunConfig {
            seed,
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            synth,
            baseline: BaselineConfig::default(),
            methods: Method::ALL.to_vec(),
            threshold: None,
            labels: true,
            eval_dt: None,
            paths: Paths::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

fn parse_range(key: &str, value: &str) -> Result<(f64, f64), ConfigError> {
    let (lo, hi) = value.split_once(':').ok_or_else(|| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: "expected low:high".into(),
    })?;
    Ok((parse(key, lo.trim())?, parse(key, hi.trim())?))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let t = &mut self.train;
        let s = &mut self.synth;
        let b = &mut self.baseline;
        match key {
            "seed" => {
                self.seed = parse(key, v)?;
                t.seed = self.seed;
                s.seed = self.seed;
            }
            "synth.n_per_class" => s.n_per_class = parse(key, v)?,
            "synth.length" => s.length = parse(key, v)?,
            "synth.onset" => s.onset = parse(key, v)?,
            "synth.rise" => s.rise = parse(key, v)?,
            "synth.fast_decay" => s.fast_decay = parse(key, v)?,
            "synth.slow_decay" => s.slow_decay = parse(key, v)?,
            "synth.gamma_slow_fraction" => s.gamma_slow_fraction = parse(key, v)?,
            "synth.neutron_slow_fraction" => s.neutron_slow_fraction = parse(key, v)?,
            "synth.amplitude_jitter" => s.amplitude_jitter = parse(key, v)?,
            "synth.noise_sigma" => s.noise_sigma = parse(key, v)?,
            "neuron.tau" => t.neuron.tau = parse(key, v)?,
            "neuron.tau_s" => t.neuron.tau_s = parse(key, v)?,
            "neuron.v_th" => t.neuron.v_th = parse(key, v)?,
            "neuron.v_rest" => t.neuron.v_rest = parse(key, v)?,
            "neuron.dt" => t.neuron.dt = parse(key, v)?,
            "encoding.dendrites" => t.encoding.dendrites = parse(key, v)?,
            "encoding.grf_sigma" => t.encoding.grf_sigma = parse(key, v)?,
            "encoding.grf_threshold" => t.encoding.grf_threshold = parse(key, v)?,
            "encoding.amp_threshold" => t.encoding.amp_threshold = parse(key, v)?,
            "train.epochs" => t.epochs = parse(key, v)?,
            "train.lr" => (t.lr_low, t.lr_high) = parse_range(key, v)?,
            "train.lr_low" => t.lr_low = parse(key, v)?,
            "train.lr_high" => t.lr_high = parse(key, v)?,
            "train.momentum" => t.momentum = parse(key, v)?,
            "train.batch_size" => t.batch_size = parse(key, v)?,
            "train.init" => (t.init_low, t.init_high) = parse_range(key, v)?,
            "train.init_low" => t.init_low = parse(key, v)?,
            "train.init_high" => t.init_high = parse(key, v)?,
            "train.validation_fraction" => t.validation_fraction = parse(key, v)?,
            "train.snapshots" => t.snapshots = parse_bool(key, v)?,
            "train.probes" => {
                t.probes = list(v).map(|x| parse(key, x)).collect::<Result<_, _>>()?
            }
            "aug.all" => {
                let x: f64 = parse(key, v)?;
                t.augment.gaussian_sigma = x;
                t.augment.jitter_sigma = x;
                t.augment.add_miss_p = x;
            }
            "aug.gaussian_sigma" => t.augment.gaussian_sigma = parse(key, v)?,
            "aug.jitter_sigma" => t.augment.jitter_sigma = parse(key, v)?,
            "aug.add_miss_p" => t.augment.add_miss_p = parse(key, v)?,
            "aug.mode" => t.augment.mode = parse::<AugmentModeArg>(key, v)?.0,
            "baseline.methods" => {
                self.methods = list(v).map(|m| parse(key, m)).collect::<Result<_, _>>()?;
                if self.methods.is_empty() {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        value: v.into(),
                        reason: "no methods given".into(),
                    });
                }
            }
            "baseline.threshold" => {
                self.threshold = if v == "auto" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "baseline.short_gate_end" => b.short_gate_end = parse(key, v)?,
            "baseline.long_gate_end" => {
                b.long_gate_end = if v == "end" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "baseline.delayed_gate_start" => b.delayed_gate_start = parse(key, v)?,
            "baseline.pga_offset" => b.pga_offset = parse(key, v)?,
            "baseline.fga_k1" => b.fga_k1 = parse(key, v)?,
            "baseline.fga_k2" => b.fga_k2 = parse(key, v)?,
            "baseline.zc_shaping" => b.zc_shaping = parse(key, v)?,
            "baseline.bins" => b.bins = parse(key, v)?,
            "eval.dt" => {
                self.eval_dt = if v == "model" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "io.labels" => self.labels = parse_bool(key, v)?,
            "io.input" => self.paths.input = optional_path(v),
            "io.output" => self.paths.output = optional_path(v),
            "io.model" => self.paths.model = optional_path(v),
            "io.log" => self.paths.log = optional_path(v),
            "io.snapshots" => self.paths.snapshots = optional_path(v),
            "io.traces" => self.paths.traces = optional_path(v),
            "io.predictions" => self.paths.predictions = optional_path(v),
            "io.patterns" => self.paths.patterns = optional_path(v),
            "io.reports" => self.paths.reports = list(v).map(PathBuf::from).collect(),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies every `key = value` line. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: line.into(),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: line.into(),
                });
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = atomic::read_to_string(path)?;
        self.apply_text(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Every key with its effective value, in a fixed order. Feeding these
    /// back through [`RunConfig::set`] reproduces the configuration.
    pub fn entries(&self) -> Vec<(String, String)> {
        let t = &self.train;
        let s = &self.synth;
        let b = &self.baseline;
        let p = &self.paths;
        let join = |xs: Vec<String>| xs.join(",");
        let pairs: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("synth.n_per_class", s.n_per_class.to_string()),
            ("synth.length", s.length.to_string()),
            ("synth.onset", s.onset.to_string()),
            ("synth.rise", s.rise.to_string()),
            ("synth.fast_decay", s.fast_decay.to_string()),
            ("synth.slow_decay", s.slow_decay.to_string()),
            (
                "synth.gamma_slow_fraction",
                s.gamma_slow_fraction.to_string(),
            ),
            (
                "synth.neutron_slow_fraction",
                s.neutron_slow_fraction.to_string(),
            ),
            ("synth.amplitude_jitter", s.amplitude_jitter.to_string()),
            ("synth.noise_sigma", s.noise_sigma.to_string()),
            ("neuron.tau", t.neuron.tau.to_string()),
            ("neuron.tau_s", t.neuron.tau_s.to_string()),
            ("neuron.v_th", t.neuron.v_th.to_string()),
            ("neuron.v_rest", t.neuron.v_rest.to_string()),
            ("neuron.dt", t.neuron.dt.to_string()),
            ("encoding.dendrites", t.encoding.dendrites.to_string()),
            ("encoding.grf_sigma", t.encoding.grf_sigma.to_string()),
            (
                "encoding.grf_threshold",
                t.encoding.grf_threshold.to_string(),
            ),
            (
                "encoding.amp_threshold",
                t.encoding.amp_threshold.to_string(),
            ),
            ("train.epochs", t.epochs.to_string()),
            ("train.lr_low", t.lr_low.to_string()),
            ("train.lr_high", t.lr_high.to_string()),
            ("train.momentum", t.momentum.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.init_low", t.init_low.to_string()),
            ("train.init_high", t.init_high.to_string()),
            (
                "train.validation_fraction",
                t.validation_fraction.to_string(),
            ),
            ("train.snapshots", t.snapshots.to_string()),
            (
                "train.probes",
                join(t.probes.iter().map(|x| x.to_string()).collect()),
            ),
            ("aug.gaussian_sigma", t.augment.gaussian_sigma.to_string()),
            ("aug.jitter_sigma", t.augment.jitter_sigma.to_string()),
            ("aug.add_miss_p", t.augment.add_miss_p.to_string()),
            ("aug.mode", t.augment.mode.as_str().to_string()),
            (
                "baseline.methods",
                join(self.methods.iter().map(|m| m.id().to_string()).collect()),
            ),
            (
                "baseline.threshold",
                self.threshold.map_or("auto".into(), |x| x.to_string()),
            ),
            ("baseline.short_gate_end", b.short_gate_end.to_string()),
            (
                "baseline.long_gate_end",
                b.long_gate_end.map_or("end".into(), |x| x.to_string()),
            ),
            (
                "baseline.delayed_gate_start",
                b.delayed_gate_start.to_string(),
            ),
            ("baseline.pga_offset", b.pga_offset.to_string()),
            ("baseline.fga_k1", b.fga_k1.to_string()),
            ("baseline.fga_k2", b.fga_k2.to_string()),
            ("baseline.zc_shaping", b.zc_shaping.to_string()),
            ("baseline.bins", b.bins.to_string()),
            (
                "eval.dt",
                self.eval_dt.map_or("model".into(), |x| x.to_string()),
            ),
            ("io.labels", self.labels.to_string()),
            ("io.input", show_path(&p.input)),
            ("io.output", show_path(&p.output)),
            ("io.model", show_path(&p.model)),
            ("io.log", show_path(&p.log)),
            ("io.snapshots", show_path(&p.snapshots)),
            ("io.traces", show_path(&p.traces)),
            ("io.predictions", show_path(&p.predictions)),
            ("io.patterns", show_path(&p.patterns)),
            (
                "io.reports",
                join(p.reports.iter().map(|r| r.display().to_string()).collect()),
            ),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Entries whose key starts with one of `prefixes`.
    pub fn entries_for(&self, prefixes: &[&str]) -> Vec<(String, String)> {
        self.entries()
            .into_iter()
            .filter(|(k, _)| k == "seed" || prefixes.iter().any(|p| k.starts_with(p)))
            .collect()
    }

    /// `key = value` text accepted by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// `FromStr` adapter with a displayable error.
struct AugmentModeArg(AugmentMode);

impl FromStr for AugmentModeArg {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(AugmentModeArg)
    }
}
