//! Multi-pattern spike dump written by `encode`.
//!
//! Each pattern starts with a `pulse <idx> label <0|1|->` line followed by
//! the pattern's text form (one line per dendrite, `idx:time` tokens with
//! `-` for an empty window) and a blank line.

use std::fmt::Write as _;

use thiserror::Error;

use tempotron_core::encoding::PatternError;
use tempotron_core::{Label, SpikePattern};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DumpError {
    #[error("line {line}: expected `pulse <idx> label <0|1|->`, found {text:?}")]
    Header { line: usize, text: String },
    #[error("pattern starting at line {line}: {source}")]
    Pattern { line: usize, source: PatternError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpEntry {
    pub index: usize,
    pub label: Option<Label>,
    pub pattern: SpikePattern,
}

pub fn format_dump(entries: &[DumpEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let label = e.label.map_or("-".to_string(), |l| l.bit().to_string());
        writeln!(out, "pulse {} label {label}", e.index).unwrap();
        write!(out, "{}", e.pattern).unwrap();
        out.push('\n');
    }
    out
}

fn parse_header(line: usize, text: &str) -> Result<(usize, Option<Label>), DumpError> {
    let bad = || DumpError::Header {
        line,
        text: text.into(),
    };
    let parts: Vec<&str> = text.split_whitespace().collect();
    match parts.as_slice() {
        ["pulse", idx, "label", label] => {
            let index = idx.parse().map_err(|_| bad())?;
            let label = match *label {
                "-" => None,
                l => Some(l.parse().ok().and_then(Label::from_bit).ok_or_else(bad)?),
            };
            Ok((index, label))
        }
        _ => Err(bad()),
    }
}

pub fn parse_dump(text: &str) -> Result<Vec<DumpEntry>, DumpError> {
    let mut entries = Vec::new();
    let mut current: Option<(usize, usize, Option<Label>, String)> = None;
    let mut finish = |cur: Option<(usize, usize, Option<Label>, String)>| -> Result<(), DumpError> {
        if let Some((line, index, label, body)) = cur {
            let pattern = body
                .parse::<SpikePattern>()
                .map_err(|source| DumpError::Pattern { line, source })?;
            entries.push(DumpEntry {
                index,
                label,
                pattern,
            });
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.starts_with('#') {
            continue;
        }
        if raw.trim().is_empty() {
            finish(current.take())?;
            continue;
        }
        match current.as_mut() {
            Some((_, _, _, body)) => {
                body.push_str(raw);
                body.push('\n');
            }
            None => {
                let (index, label) = parse_header(line, raw)?;
                current = Some((line, index, label, String::new()));
            }
        }
    }
    finish(current.take())?;
    Ok(entries)
}
