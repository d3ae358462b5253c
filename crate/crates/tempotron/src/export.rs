//! Plot-ready CSV and JSON artifacts and their readers.
//!
//! CSV files carry a single header row. Artifacts written by the command
//! line start with `# key = value` lines echoing the effective config;
//! every reader here skips lines starting with `#`.
//!
//! JSON report schema (keys in this order):
//!
//! - evaluation: `method`, `accuracy`, `confusion` (`[truth][predicted]`,
//!   neutron = 0, gamma = 1), `n`, `splits` (`[{name, accuracy}]`),
//!   `config` (object of strings)
//! - baseline summary: `method`, `accuracy`, `fom`, `threshold`, `n`,
//!   `skipped`, `config`. `accuracy` and `fom` are `null` for unlabeled
//!   input; an infinite figure of merit (zero-width classes) is written as
//!   the string `"separated"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tempotron_core::baselines::Histogram;
use tempotron_core::learning::EpochRecord;
use tempotron_core::metrics::SplitAccuracy;
use tempotron_core::{EvalReport, Label, MembraneTrace, TrainLog};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReadError {
    #[error("line {line}: expected header {expected:?}, found {found:?}")]
    Header {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] JsonError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct JsonError(pub String);

/// Accuracy as printed in tables and summaries.
pub fn format_accuracy(accuracy: f64) -> String {
    format!("{accuracy:.4}")
}

/// `# key = value` lines followed by `body`.
pub fn with_echo(echo: &[(String, String)], body: &str) -> String {
    let mut out = String::new();
    for (k, v) in echo {
        writeln!(out, "# {k} = {v}").unwrap();
    }
    out.push_str(body);
    out
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.starts_with('#') && !l.is_empty())
}

/// Splits a CSV with the given header into rows of fields.
fn read_csv<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>, ReadError> {
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((line, h)) => {
            return Err(ReadError::Header {
                line,
                expected: header.into(),
                found: h.into(),
            })
        }
        None => {
            return Err(ReadError::Header {
                line: 1,
                expected: header.into(),
                found: String::new(),
            })
        }
    }
    let width = header.split(',').count();
    lines
        .map(|(line, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != width {
                return Err(ReadError::Row {
                    line,
                    message: format!("{} fields, expected {width}", fields.len()),
                });
            }
            Ok((line, fields))
        })
        .collect()
}

fn field<T: std::str::FromStr>(line: usize, text: &str) -> Result<T, ReadError> {
    text.parse().map_err(|_| ReadError::Row {
        line,
        message: format!("cannot parse {text:?}"),
    })
}

pub const TRAIN_LOG_HEADER: &str = "epoch,lr,train_loss,val_loss";

pub fn train_log_csv(log: &TrainLog) -> String {
    let mut out = format!("{TRAIN_LOG_HEADER}\n");
    for r in &log.epochs {
        writeln!(out, "{},{},{},{}", r.epoch, r.lr, r.train_loss, r.val_loss).unwrap();
    }
    out
}

pub fn parse_train_log(text: &str) -> Result<Vec<EpochRecord>, ReadError> {
    read_csv(text, TRAIN_LOG_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(EpochRecord {
                epoch: field(line, f[0])?,
                lr: field(line, f[1])?,
                train_loss: field(line, f[2])?,
                val_loss: field(line, f[3])?,
            })
        })
        .collect()
}

/// One row per logged epoch, `epoch,w0,...`; epoch 0 is the initialization.
pub fn snapshots_csv(log: &TrainLog) -> String {
    let j = log.initial_efficacies.len();
    let mut out = String::from("epoch");
    for d in 0..j {
        write!(out, ",w{d}").unwrap();
    }
    out.push('\n');
    let rows = std::iter::once(&log.initial_efficacies).chain(&log.snapshots);
    for (epoch, w) in rows.enumerate() {
        write!(out, "{epoch}").unwrap();
        for x in w {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_snapshots(text: &str) -> Result<Vec<(usize, Vec<f64>)>, ReadError> {
    let header = data_lines(text).next().map(|(_, h)| h).unwrap_or("");
    read_csv(text, header)?
        .into_iter()
        .map(|(line, f)| {
            let w = f[1..]
                .iter()
                .map(|x| field(line, x))
                .collect::<Result<_, _>>()?;
            Ok((field(line, f[0])?, w))
        })
        .collect()
}

pub const TRACE_HEADER: &str = "t,V";

pub fn trace_csv(trace: &MembraneTrace) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for (t, v) in trace.times().zip(&trace.potentials) {
        writeln!(out, "{t},{v}").unwrap();
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<(f64, f64)>, ReadError> {
    read_csv(text, TRACE_HEADER)?
        .into_iter()
        .map(|(line, f)| Ok((field(line, f[0])?, field(line, f[1])?)))
        .collect()
}

pub const HISTOGRAM_HEADER: &str = "lower,upper,count";

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(out, "{},{},{c}", h.edges[i], h.edges[i + 1]).unwrap();
    }
    out
}

pub fn parse_histogram(text: &str) -> Result<Histogram, ReadError> {
    let rows = read_csv(text, HISTOGRAM_HEADER)?;
    let mut edges = Vec::with_capacity(rows.len() + 1);
    let mut counts = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        if edges.is_empty() {
            edges.push(field(line, f[0])?);
        }
        edges.push(field(line, f[1])?);
        counts.push(field(line, f[2])?);
    }
    Ok(Histogram { edges, counts })
}

pub const FACTOR_HEADER: &str = "pulse_idx,factor,predicted,truth";

/// One row per scored pulse. `indices` maps rows back to the input file;
/// `truth` is left empty for unlabeled input.
pub fn factors_csv(
    indices: &[usize],
    factors: &[f64],
    predicted: &[Label],
    truth: Option<&[Label]>,
) -> String {
    let mut out = format!("{FACTOR_HEADER}\n");
    for (row, (&idx, &f)) in indices.iter().zip(factors).enumerate() {
        let t = truth.map(|t| t[row].bit().to_string()).unwrap_or_default();
        writeln!(out, "{idx},{f},{},{t}", predicted[row].bit()).unwrap();
    }
    out
}

/// Parsed factor row: index, factor, predicted, optional truth.
pub type FactorRow = (usize, f64, Label, Option<Label>);

fn label_field(line: usize, text: &str) -> Result<Label, ReadError> {
    field::<u8>(line, text)
        .ok()
        .and_then(Label::from_bit)
        .ok_or_else(|| ReadError::Row {
            line,
            message: format!("bad label {text:?}"),
        })
}

pub fn parse_factors(text: &str) -> Result<Vec<FactorRow>, ReadError> {
    read_csv(text, FACTOR_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let truth = if f[3].is_empty() {
                None
            } else {
                Some(label_field(line, f[3])?)
            };
            Ok((
                field(line, f[0])?,
                field(line, f[1])?,
                label_field(line, f[2])?,
                truth,
            ))
        })
        .collect()
}

pub const PREDICTIONS_HEADER: &str = "pulse_idx,predicted";

pub fn predictions_csv(indices: &[usize], predicted: &[Label]) -> String {
    let mut out = format!("{PREDICTIONS_HEADER}\n");
    for (idx, p) in indices.iter().zip(predicted) {
        writeln!(out, "{idx},{}", p.bit()).unwrap();
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<Vec<(usize, Label)>, ReadError> {
    read_csv(text, PREDICTIONS_HEADER)?
        .into_iter()
        .map(|(line, f)| Ok((field(line, f[0])?, label_field(line, f[1])?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplitFile {
    name: String,
    accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvalReportFile {
    method: String,
    accuracy: f64,
    confusion: [[usize; 2]; 2],
    n: usize,
    splits: Vec<SplitFile>,
    config: BTreeMap<String, String>,
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_json(r: &EvalReport) -> String {
    to_json_line(&EvalReportFile {
        method: r.method.clone(),
        accuracy: r.accuracy,
        confusion: r.confusion,
        n: r.n,
        splits: r
            .splits
            .iter()
            .map(|s| SplitFile {
                name: s.name.clone(),
                accuracy: s.accuracy,
            })
            .collect(),
        config: r.config.iter().cloned().collect(),
    })
}

pub fn parse_report(text: &str) -> Result<EvalReport, ReadError> {
    let f: EvalReportFile = serde_json::from_str(text).map_err(|e| JsonError(e.to_string()))?;
    Ok(EvalReport {
        method: f.method,
        accuracy: f.accuracy,
        confusion: f.confusion,
        n: f.n,
        splits: f
            .splits
            .into_iter()
            .map(|s| SplitAccuracy {
                name: s.name,
                accuracy: s.accuracy,
            })
            .collect(),
        config: f.config.into_iter().collect(),
    })
}

/// Figure of merit; `Separated` stands for an infinite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fom {
    Value(f64),
    Separated,
}

impl Fom {
    pub fn from_f64(x: f64) -> Self {
        if x.is_infinite() {
            Fom::Separated
        } else {
            Fom::Value(x)
        }
    }
}

impl Serialize for Fom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Fom::Value(x) => s.serialize_f64(*x),
            Fom::Separated => s.serialize_str("separated"),
        }
    }
}

impl<'de> Deserialize<'de> for Fom {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "separated" => Ok(Fom::Separated),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(Fom::Value)
                .ok_or_else(|| serde::de::Error::custom("bad number")),
            other => Err(serde::de::Error::custom(format!("bad fom {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub method: String,
    pub accuracy: Option<f64>,
    pub fom: Option<Fom>,
    pub threshold: f64,
    pub n: usize,
    /// Pulses dropped because they could not be normalized.
    pub skipped: usize,
    pub config: BTreeMap<String, String>,
}

pub fn baseline_summary_json(s: &BaselineSummary) -> String {
    to_json_line(s)
}

pub fn parse_baseline_summary(text: &str) -> Result<BaselineSummary, ReadError> {
    Ok(serde_json::from_str(text).map_err(|e| JsonError(e.to_string()))?)
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub accuracy: f64,
}

/// Reads `method` and `accuracy` from an evaluation report or a baseline
/// summary.
pub fn parse_report_row(text: &str) -> Result<ReportRow, ReadError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| JsonError(e.to_string()))?;
    let method = v
        .get("method")
        .and_then(|m| m.as_str())
        .ok_or_else(|| JsonError("missing string field `method`".into()))?;
    let accuracy = v
        .get("accuracy")
        .and_then(|a| a.as_f64())
        .ok_or_else(|| JsonError(format!("`{method}` has no numeric `accuracy`")))?;
    Ok(ReportRow {
        method: method.into(),
        accuracy,
    })
}

/// Name shown in tables: baseline ids upper-cased, `tempotron` capitalized.
pub fn display_name(method: &str) -> String {
    match method {
        "tempotron" => "Tempotron".into(),
        m if m.parse::<tempotron_core::Method>().is_ok() => m.to_uppercase(),
        m => m.into(),
    }
}

/// Methods per row pair.
pub const TABLE_COLUMNS: usize = 6;

/// Tab-separated comparison: a `Method` row and an `Accuracy` row for each
/// group of up to six methods.
pub fn comparison_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for chunk in rows.chunks(TABLE_COLUMNS) {
        out.push_str("Method");
        for r in chunk {
            write!(out, "\t{}", display_name(&r.method)).unwrap();
        }
        out.push_str("\nAccuracy");
        for r in chunk {
            write!(out, "\t{}", format_accuracy(r.accuracy)).unwrap();
        }
        out.push('\n');
    }
    out
}
