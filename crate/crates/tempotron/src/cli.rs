//! `tempotron` command line.
//!
//! Settings are resolved in order: built-in defaults, the `--config` file,
//! named flags, then `--set KEY=VALUE` pairs. Every named flag is a
//! shorthand for one config key, listed in its help text.
//!
//! Exit codes: 0 success, 2 config, 3 I/O or unreadable input, 4 domain
//! precondition.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use tempotron_core::baselines::{self, BaselineError, FactorSeries};
use tempotron_core::learning::{self, LearnError};
use tempotron_core::metrics::{self, SplitAccuracy};
use tempotron_core::synth::{self, SynthError};
use tempotron_core::{Dataset, Label, Method, Pulse, PulseClassifier, SpikePattern};

use crate::atomic::{self, write_atomic};
use crate::config::RunConfig;
use crate::dataset_csv;
use crate::dump::{self, DumpEntry};
use crate::error::Error;
use crate::export::{self, BaselineSummary, Fom};
use crate::model_json::{self, ModelFile};
use crate::parallel;

#[derive(Debug, Parser)]
#[command(
    name = "tempotron",
    version,
    about = "Tempotron neutron/gamma pulse shape discrimination"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a labeled synthetic pulse dataset
    Generate(GenerateArgs),
    /// Encode pulses into spike patterns (text dump)
    Encode(EncodeArgs),
    /// Train a Tempotron on a labeled dataset
    Train(TrainArgs),
    /// Classify a dataset or spike dump with a trained model
    Eval(EvalArgs),
    /// Run the classical discrimination-factor methods
    Baseline(BaselineArgs),
    /// Merge evaluation and baseline summaries into one comparison table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Config file of `key = value` lines
    #[arg(short = 'c', long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Set any config key (repeatable); applied after the named flags
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Global seed [seed]
    #[arg(long)]
    seed: Option<String>,
}

/// Named flags paired with the config key each one sets.
type Overrides = Vec<(&'static str, Option<String>)>;

macro_rules! keys {
    ($s:ident; $($field:ident => $key:literal),* $(,)?) => {
        vec![$(($key, $s.$field.clone())),*]
    };
}

fn flag(on: bool, key: &'static str, value: &str) -> (&'static str, Option<String>) {
    (key, on.then(|| value.to_string()))
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Output CSV [io.output]
    #[arg(short, long)]
    output: Option<String>,
    /// Pulses per class [synth.n_per_class]
    #[arg(long)]
    n_per_class: Option<String>,
    /// Samples per pulse [synth.length]
    #[arg(long)]
    length: Option<String>,
    /// Start sample of each pulse [synth.onset]
    #[arg(long)]
    onset: Option<String>,
    /// Rise constant in samples [synth.rise]
    #[arg(long)]
    rise: Option<String>,
    /// Fast decay constant in samples [synth.fast_decay]
    #[arg(long)]
    fast_decay: Option<String>,
    /// Slow decay constant in samples [synth.slow_decay]
    #[arg(long)]
    slow_decay: Option<String>,
    /// Slow-component fraction of gamma pulses [synth.gamma_slow_fraction]
    #[arg(long)]
    gamma_fraction: Option<String>,
    /// Slow-component fraction of neutron pulses [synth.neutron_slow_fraction]
    #[arg(long)]
    neutron_fraction: Option<String>,
    /// Relative amplitude spread [synth.amplitude_jitter]
    #[arg(long)]
    amplitude_jitter: Option<String>,
    /// Baseline noise standard deviation [synth.noise_sigma]
    #[arg(long)]
    noise: Option<String>,
}

impl GenerateArgs {
    fn overrides(&self) -> Overrides {
        keys!(self;
            output => "io.output",
            n_per_class => "synth.n_per_class",
            length => "synth.length",
            onset => "synth.onset",
            rise => "synth.rise",
            fast_decay => "synth.fast_decay",
            slow_decay => "synth.slow_decay",
            gamma_fraction => "synth.gamma_slow_fraction",
            neutron_fraction => "synth.neutron_slow_fraction",
            amplitude_jitter => "synth.amplitude_jitter",
            noise => "synth.noise_sigma",
        )
    }
}

#[derive(Debug, Args)]
struct EncoderFlags {
    /// Dendrites, one receptive field each [encoding.dendrites]
    #[arg(long)]
    dendrites: Option<String>,
    /// Receptive field width [encoding.grf_sigma]
    #[arg(long)]
    grf_sigma: Option<String>,
    /// Minimum receptive field response [encoding.grf_threshold]
    #[arg(long)]
    grf_threshold: Option<String>,
    /// Minimum sample amplitude that emits a spike [encoding.amp_threshold]
    #[arg(long)]
    amp_threshold: Option<String>,
}

impl EncoderFlags {
    fn overrides(&self) -> Overrides {
        keys!(self;
            dendrites => "encoding.dendrites",
            grf_sigma => "encoding.grf_sigma",
            grf_threshold => "encoding.grf_threshold",
            amp_threshold => "encoding.amp_threshold",
        )
    }
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    encoder: EncoderFlags,
    /// Input pulse CSV [io.input]
    #[arg(short, long)]
    input: Option<String>,
    /// Output spike dump [io.output]
    #[arg(short, long)]
    output: Option<String>,
    /// Input has no label column [io.labels = false]
    #[arg(long)]
    no_labels: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    encoder: EncoderFlags,
    /// Labeled pulse CSV [io.input]
    #[arg(short, long)]
    input: Option<String>,
    /// Output model JSON [io.model]
    #[arg(short, long)]
    model: Option<String>,
    /// Training log CSV; defaults to the model path with `.log.csv` [io.log]
    #[arg(long)]
    log: Option<String>,
    /// Write per-epoch efficacy snapshots to this CSV [io.snapshots]
    #[arg(long)]
    snapshots: Option<String>,
    /// Directory for membrane traces of probe pulses [io.traces]
    #[arg(long)]
    traces: Option<String>,
    /// Comma-separated probe pulse indices [train.probes]
    #[arg(long)]
    probes: Option<String>,
    /// Membrane time constant [neuron.tau]
    #[arg(long)]
    tau: Option<String>,
    /// Synaptic time constant [neuron.tau_s]
    #[arg(long)]
    tau_s: Option<String>,
    /// Threshold potential [neuron.v_th]
    #[arg(long)]
    vth: Option<String>,
    /// Resting potential [neuron.v_rest]
    #[arg(long)]
    vrest: Option<String>,
    /// Time grid step [neuron.dt]
    #[arg(long)]
    dt: Option<String>,
    /// Epochs [train.epochs]
    #[arg(long)]
    epochs: Option<String>,
    /// Learning rate interval low:high [train.lr]
    #[arg(long)]
    lr: Option<String>,
    /// Momentum factor [train.momentum]
    #[arg(long)]
    momentum: Option<String>,
    /// Mini-batch size [train.batch_size]
    #[arg(long)]
    batch: Option<String>,
    /// Efficacy init interval low:high [train.init]
    #[arg(long)]
    init: Option<String>,
    /// Validation fraction [train.validation_fraction]
    #[arg(long)]
    validation: Option<String>,
    /// All three augmentation intensities [aug.all]
    #[arg(long)]
    aug: Option<String>,
    /// Signal Gaussian noise sigma [aug.gaussian_sigma]
    #[arg(long)]
    aug_gaussian: Option<String>,
    /// Spike time jitter sigma [aug.jitter_sigma]
    #[arg(long)]
    aug_jitter: Option<String>,
    /// Spike add & miss probability [aug.add_miss_p]
    #[arg(long)]
    aug_add_miss: Option<String>,
    /// per_epoch, fixed or off [aug.mode]
    #[arg(long)]
    aug_mode: Option<String>,
    /// Input has no label column (training then fails) [io.labels = false]
    #[arg(long)]
    no_labels: bool,
}

impl TrainArgs {
    fn overrides(&self) -> Overrides {
        let mut o = keys!(self;
            input => "io.input",
            model => "io.model",
            log => "io.log",
            snapshots => "io.snapshots",
            traces => "io.traces",
            probes => "train.probes",
            tau => "neuron.tau",
            tau_s => "neuron.tau_s",
            vth => "neuron.v_th",
            vrest => "neuron.v_rest",
            dt => "neuron.dt",
            epochs => "train.epochs",
            lr => "train.lr",
            momentum => "train.momentum",
            batch => "train.batch_size",
            init => "train.init",
            validation => "train.validation_fraction",
            aug => "aug.all",
            aug_gaussian => "aug.gaussian_sigma",
            aug_jitter => "aug.jitter_sigma",
            aug_add_miss => "aug.add_miss_p",
            aug_mode => "aug.mode",
        );
        o.extend(self.encoder.overrides());
        o.push(flag(self.no_labels, "io.labels", "false"));
        o
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Model JSON [io.model]
    #[arg(short, long)]
    model: Option<String>,
    /// Pulse CSV to classify [io.input]
    #[arg(short, long)]
    input: Option<String>,
    /// Spike dump to classify instead of a pulse CSV [io.patterns]
    #[arg(long)]
    patterns: Option<String>,
    /// Evaluation report JSON [io.output]
    #[arg(short, long)]
    output: Option<String>,
    /// Per-pulse predictions CSV [io.predictions]
    #[arg(long)]
    predictions: Option<String>,
    /// Grid step overriding the model's [eval.dt]
    #[arg(long)]
    dt: Option<String>,
    /// Input has no label column [io.labels = false]
    #[arg(long)]
    no_labels: bool,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: Common,
    /// Pulse CSV [io.input]
    #[arg(short, long)]
    input: Option<String>,
    /// Output prefix; writes PREFIX_<method>.csv, .json and _hist.csv [io.output]
    #[arg(short, long)]
    output: Option<String>,
    /// Comma-separated methods: cc, ci, zc, pga, fga [baseline.methods]
    #[arg(long)]
    methods: Option<String>,
    /// Fixed factor threshold, or `auto` for the histogram valley [baseline.threshold]
    #[arg(long)]
    threshold: Option<String>,
    /// Histogram bins [baseline.bins]
    #[arg(long)]
    bins: Option<String>,
    /// Short gate end, samples after the peak [baseline.short_gate_end]
    #[arg(long)]
    short_gate_end: Option<String>,
    /// Long gate end after the peak, or `end` [baseline.long_gate_end]
    #[arg(long)]
    long_gate_end: Option<String>,
    /// Delayed gate start after the peak [baseline.delayed_gate_start]
    #[arg(long)]
    delayed_gate_start: Option<String>,
    /// Pulse gradient offset after the peak [baseline.pga_offset]
    #[arg(long)]
    pga_offset: Option<String>,
    /// First frequency bin [baseline.fga_k1]
    #[arg(long)]
    fga_k1: Option<String>,
    /// Second frequency bin [baseline.fga_k2]
    #[arg(long)]
    fga_k2: Option<String>,
    /// Zero-crossing shaping constant in samples [baseline.zc_shaping]
    #[arg(long)]
    zc_shaping: Option<String>,
    /// Input has no label column [io.labels = false]
    #[arg(long)]
    no_labels: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Evaluation reports or baseline summaries (JSON) [io.reports]
    #[arg(value_name = "REPORT")]
    reports: Vec<String>,
    /// Write the table here as well as to stdout [io.output]
    #[arg(short, long)]
    output: Option<String>,
}

fn resolve(common: &Common, overrides: Overrides) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    let seed = ("seed", common.seed.clone());
    for (key, value) in std::iter::once(seed).chain(overrides) {
        if let Some(v) = value {
            cfg.set(key, &v).map_err(Error::config)?;
        }
    }
    for pair in &common.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set {pair:?}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v).map_err(Error::config)?;
    }
    Ok(cfg)
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str, flag: &str) -> Result<&'a Path, Error> {
    path.as_deref()
        .ok_or_else(|| Error::config(format!("{key} is required (flag {flag})")))
}

fn echo_map(echo: &[(String, String)]) -> BTreeMap<String, String> {
    echo.iter().cloned().collect()
}

fn learn_error(e: LearnError) -> Error {
    match e {
        LearnError::InvalidConfig(_) => Error::config(e),
        _ => Error::domain(e),
    }
}

fn synth_error(e: SynthError) -> Error {
    match e {
        SynthError::InvalidConfig { field, reason } => {
            Error::config(format!("synth.{field}: {reason}"))
        }
        other => Error::domain(other),
    }
}

/// Normalizes every pulse, keeping the original index of each survivor.
fn normalize_kept(ds: &Dataset) -> (Vec<Pulse>, Vec<usize>, usize) {
    let mut kept = Vec::with_capacity(ds.len());
    let mut indices = Vec::with_capacity(ds.len());
    for (i, p) in ds.pulses().iter().enumerate() {
        if let Ok(n) = p.normalize() {
            kept.push(n);
            indices.push(i);
        }
    }
    let skipped = ds.len() - kept.len();
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} pulse(s) that could not be normalized");
    }
    (kept, indices, skipped)
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Error> {
    let cfg = resolve(&args.common, args.overrides())?;
    let out = required(&cfg.paths.output, "io.output", "-o")?;
    let ds = synth::generate(&cfg.synth).map_err(synth_error)?;
    dataset_csv::save_dataset(&ds, out)?;
    let echo = cfg.entries_for(&["synth.", "io.output"]);
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".config");
    write_atomic(Path::new(&sidecar), export::with_echo(&echo, "").as_bytes())?;
    println!(
        "wrote {} pulses ({} neutron, {} gamma), N = {} to {}",
        ds.len(),
        ds.count(Label::Neutron),
        ds.count(Label::Gamma),
        ds.sample_len(),
        out.display()
    );
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), Error> {
    let mut o = args.encoder.overrides();
    o.extend(keys!(args; input => "io.input", output => "io.output"));
    o.push(flag(args.no_labels, "io.labels", "false"));
    let cfg = resolve(&args.common, o)?;
    let input = required(&cfg.paths.input, "io.input", "-i")?;
    let out = required(&cfg.paths.output, "io.output", "-o")?;
    let encoder = cfg.train.encoding.build().map_err(Error::config)?;
    let ds = dataset_csv::load_dataset(input, cfg.labels)?;
    let (pulses, indices, _) = normalize_kept(&ds);
    let patterns = parallel::encode_all(&encoder, &pulses).map_err(Error::domain)?;
    let entries: Vec<DumpEntry> = patterns
        .into_iter()
        .zip(&indices)
        .map(|(pattern, &i)| DumpEntry {
            index: i,
            label: ds.pulses()[i].label(),
            pattern,
        })
        .collect();
    let echo = cfg.entries_for(&["encoding.", "io.input", "io.output", "io.labels"]);
    write_atomic(
        out,
        export::with_echo(&echo, &dump::format_dump(&entries)).as_bytes(),
    )?;
    let spikes: usize = entries.iter().map(|e| e.pattern.spike_count()).sum();
    println!(
        "encoded {} pulses onto {} dendrites x {} windows ({spikes} spikes) to {}",
        entries.len(),
        encoder.dendrites(),
        ds.sample_len(),
        out.display()
    );
    Ok(())
}

fn accuracy_on(classifier: &PulseClassifier, pulses: &[Pulse]) -> Result<f64, Error> {
    let patterns = parallel::encode_all(&classifier.encoder, pulses).map_err(Error::domain)?;
    let predicted = parallel::classify_all(&classifier.neuron, &patterns).map_err(Error::domain)?;
    let truth: Vec<Label> = pulses.iter().map(|p| p.label().expect("labeled")).collect();
    Ok(metrics::evaluate(&predicted, &truth)
        .map_err(Error::domain)?
        .accuracy)
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let mut cfg = resolve(&args.common, args.overrides())?;
    let input = required(&cfg.paths.input, "io.input", "-i")?.to_path_buf();
    let model_path = required(&cfg.paths.model, "io.model", "-m")?.to_path_buf();
    if cfg.paths.snapshots.is_some() {
        cfg.train.snapshots = true;
    }
    cfg.train.validate().map_err(learn_error)?;
    let ds = dataset_csv::load_dataset(&input, cfg.labels)?;
    if cfg.paths.traces.is_some() && cfg.train.probes.is_empty() {
        // one pulse of each class
        let first = |c| ds.pulses().iter().position(|p| p.label() == Some(c));
        cfg.train.probes = [Label::Gamma, Label::Neutron]
            .into_iter()
            .filter_map(first)
            .collect();
    }
    let (classifier, log) = learning::train(&ds, &cfg.train).map_err(learn_error)?;
    if log.skipped > 0 {
        eprintln!(
            "warning: skipped {} pulse(s) that could not be normalized",
            log.skipped
        );
    }

    let echo = cfg.entries_for(&["neuron.", "encoding.", "train.", "aug.", "io."]);
    model_json::save_model(
        &ModelFile::from_classifier(&classifier, echo_map(&echo)),
        &model_path,
    )?;
    let log_path = cfg
        .paths
        .log
        .clone()
        .unwrap_or_else(|| model_path.with_extension("log.csv"));
    write_atomic(
        &log_path,
        export::with_echo(&echo, &export::train_log_csv(&log)).as_bytes(),
    )?;
    if let Some(path) = &cfg.paths.snapshots {
        write_atomic(
            path,
            export::with_echo(&echo, &export::snapshots_csv(&log)).as_bytes(),
        )?;
    }
    if let Some(dir) = &cfg.paths.traces {
        for probe in &log.probes {
            let path = dir.join(format!("trace_{}.csv", probe.index));
            write_atomic(
                &path,
                export::with_echo(&echo, &export::trace_csv(&probe.trace)).as_bytes(),
            )?;
        }
    }

    let best = log.best().expect("at least one epoch");
    let (clean, _) = ds.normalized();
    let overall = accuracy_on(&classifier, clean.pulses())?;
    println!(
        "best epoch {} of {}: train accuracy {}, validation accuracy {}, all pulses {}",
        log.best_epoch,
        log.epochs.len(),
        export::format_accuracy(1.0 - best.train_loss),
        export::format_accuracy(1.0 - best.val_loss),
        export::format_accuracy(overall)
    );
    println!(
        "model written to {}, log to {}",
        model_path.display(),
        log_path.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let mut o = keys!(args;
        model => "io.model",
        input => "io.input",
        patterns => "io.patterns",
        output => "io.output",
        predictions => "io.predictions",
        dt => "eval.dt",
    );
    o.push(flag(args.no_labels, "io.labels", "false"));
    let cfg = resolve(&args.common, o)?;
    let model_path = required(&cfg.paths.model, "io.model", "-m")?;
    let file = model_json::load_model(model_path)?;
    let mut classifier = file.to_classifier()?;
    if let Some(dt) = cfg.eval_dt {
        classifier.neuron = classifier.neuron.with_dt(dt).map_err(Error::config)?;
    }

    let (name, indices, patterns, truth) = match (&cfg.paths.input, &cfg.paths.patterns) {
        (Some(input), None) => {
            let ds = dataset_csv::load_dataset(input, cfg.labels)?;
            let (pulses, indices, _) = normalize_kept(&ds);
            let patterns =
                parallel::encode_all(&classifier.encoder, &pulses).map_err(Error::domain)?;
            let truth = ds.is_labeled().then(|| {
                indices
                    .iter()
                    .map(|&i| ds.pulses()[i].label().unwrap())
                    .collect()
            });
            (dataset_csv::dataset_name(input), indices, patterns, truth)
        }
        (None, Some(path)) => {
            let text = atomic::read_to_string(path)?;
            let entries = dump::parse_dump(&text).map_err(|e| Error::format(path, e))?;
            let labels: Option<Vec<Label>> = entries.iter().map(|e| e.label).collect();
            let truth = labels.filter(|_| cfg.labels);
            let indices = entries.iter().map(|e| e.index).collect();
            let patterns: Vec<SpikePattern> = entries.into_iter().map(|e| e.pattern).collect();
            (dataset_csv::dataset_name(path), indices, patterns, truth)
        }
        _ => {
            return Err(Error::config(
                "give exactly one of io.input (-i) and io.patterns (--patterns)",
            ))
        }
    };
    let predicted = parallel::classify_all(&classifier.neuron, &patterns).map_err(Error::domain)?;

    let echo = cfg.entries_for(&["eval.", "io."]);
    let write_predictions = |path: &Path| {
        write_atomic(
            path,
            export::with_echo(&echo, &export::predictions_csv(&indices, &predicted)).as_bytes(),
        )
    };
    match truth {
        Some(truth) => {
            let out = required(&cfg.paths.output, "io.output", "-o")?;
            let mut report = metrics::evaluate(&predicted, &truth)
                .map_err(Error::domain)?
                .with_method("tempotron");
            report.splits.push(SplitAccuracy {
                name,
                accuracy: report.accuracy,
            });
            report.config = echo.clone();
            write_atomic(out, export::report_json(&report).as_bytes())?;
            if let Some(p) = &cfg.paths.predictions {
                write_predictions(p)?;
            }
            let c = report.confusion;
            println!(
                "accuracy {} on {} pulses (neutron {}/{}, gamma {}/{})",
                export::format_accuracy(report.accuracy),
                report.n,
                c[0][0],
                c[0][0] + c[0][1],
                c[1][1],
                c[1][0] + c[1][1]
            );
        }
        None => {
            let out = cfg
                .paths
                .predictions
                .as_deref()
                .or(cfg.paths.output.as_deref())
                .ok_or_else(|| {
                    Error::config("io.predictions (--predictions) or io.output (-o) is required")
                })?;
            write_predictions(out)?;
            let gammas = predicted.iter().filter(|&&l| l == Label::Gamma).count();
            println!(
                "classified {} pulses: {gammas} gamma, {} neutron",
                predicted.len(),
                predicted.len() - gammas
            );
        }
    }
    Ok(())
}

fn baseline_error(method: Method, e: BaselineError) -> Error {
    match e {
        BaselineError::InvalidConfig(_) => Error::config(e),
        other => Error::domain(format!("{method}: {other}")),
    }
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), Error> {
    let mut o = keys!(args;
        input => "io.input",
        output => "io.output",
        methods => "baseline.methods",
        threshold => "baseline.threshold",
        bins => "baseline.bins",
        short_gate_end => "baseline.short_gate_end",
        long_gate_end => "baseline.long_gate_end",
        delayed_gate_start => "baseline.delayed_gate_start",
        pga_offset => "baseline.pga_offset",
        fga_k1 => "baseline.fga_k1",
        fga_k2 => "baseline.fga_k2",
        zc_shaping => "baseline.zc_shaping",
    );
    o.push(flag(args.no_labels, "io.labels", "false"));
    let cfg = resolve(&args.common, o)?;
    cfg.baseline.validate().map_err(Error::config)?;
    let input = required(&cfg.paths.input, "io.input", "-i")?;
    let prefix = cfg
        .paths
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("baseline"));
    let ds = dataset_csv::load_dataset(input, cfg.labels)?;
    let (pulses, indices, skipped) = normalize_kept(&ds);
    if pulses.is_empty() {
        return Err(Error::domain("no pulse could be normalized"));
    }
    let truth: Option<Vec<Label>> = pulses.iter().map(Pulse::label).collect();
    let echo = cfg.entries_for(&["baseline.", "io."]);
    let named = |suffix: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(suffix);
        PathBuf::from(p)
    };

    for &method in &cfg.methods {
        let factors: Vec<Result<f64, BaselineError>> = pulses
            .par_iter()
            .map(|p| baselines::factor(method, p, &cfg.baseline))
            .collect();
        let factors = factors
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| BaselineError::AtPulse {
                    index: indices[i],
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| baseline_error(method, e))?;
        let series = FactorSeries::new(method, factors).map_err(|e| baseline_error(method, e))?;
        let labeled = baselines::classify_by_valley(&series, cfg.threshold, cfg.baseline.bins)
            .map_err(|e| baseline_error(method, e))?;
        let predicted = labeled.predicted.as_deref().expect("classified");
        let threshold = labeled.threshold.expect("classified");
        let (accuracy, fom) = match &truth {
            Some(t) => (
                Some(
                    metrics::evaluate(predicted, t)
                        .map_err(Error::domain)?
                        .accuracy,
                ),
                baselines::figure_of_merit(&series.factors, t)
                    .ok()
                    .map(Fom::from_f64),
            ),
            None => (None, None),
        };

        let id = method.id();
        let csv = export::factors_csv(&indices, &series.factors, predicted, truth.as_deref());
        write_atomic(
            &named(&format!("_{id}.csv")),
            export::with_echo(&echo, &csv).as_bytes(),
        )?;
        if let Ok(h) = baselines::histogram(&series.factors, cfg.baseline.bins) {
            let hist = export::histogram_csv(&h);
            write_atomic(
                &named(&format!("_{id}_hist.csv")),
                export::with_echo(&echo, &hist).as_bytes(),
            )?;
        }
        let summary = BaselineSummary {
            method: id.into(),
            accuracy,
            fom,
            threshold,
            n: pulses.len(),
            skipped,
            config: echo_map(&echo),
        };
        write_atomic(
            &named(&format!("_{id}.json")),
            export::baseline_summary_json(&summary).as_bytes(),
        )?;
        let acc = accuracy.map_or("-".into(), export::format_accuracy);
        let fom = match fom {
            Some(Fom::Value(x)) => format!("{x:.4}"),
            Some(Fom::Separated) => "separated".into(),
            None => "-".into(),
        };
        println!(
            "{:<4} accuracy {acc}  fom {fom}  threshold {threshold}",
            export::display_name(id)
        );
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Error> {
    let joined = (!args.reports.is_empty()).then(|| args.reports.join(","));
    let cfg = resolve(
        &args.common,
        vec![("io.reports", joined), ("io.output", args.output.clone())],
    )?;
    if cfg.paths.reports.is_empty() {
        return Err(Error::config(
            "no reports given (positional REPORT arguments or io.reports)",
        ));
    }
    let rows = cfg
        .paths
        .reports
        .iter()
        .map(|p| {
            export::parse_report_row(&atomic::read_to_string(p)?).map_err(|e| Error::format(p, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = export::comparison_table(&rows);
    print!("{table}");
    if let Some(out) = &cfg.paths.output {
        let echo = cfg.entries_for(&["io.reports", "io.output"]);
        write_atomic(out, export::with_echo(&echo, &table).as_bytes())?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // help and version are successful exits
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = parallel::pool_from_env().and_then(|pool| pool.install(|| dispatch(cli.command)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
