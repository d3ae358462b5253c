//! Pulse CSV: one pulse per line, comma separated, no header. With labels,
//! column 0 holds the class (0 neutron, 1 gamma).

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use tempotron_core::pulse::PulseError;
use tempotron_core::{Dataset, Label, Pulse};

use crate::atomic;
use crate::error::Error;

/// Significant digits written per sample.
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("row {row}, column {col}: cannot read {text:?} as a finite number")]
    Parse {
        row: usize,
        col: usize,
        text: String,
    },
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: label {text:?} is not 0 or 1")]
    BadLabel { row: usize, text: String },
    #[error("row {row}: {source}")]
    Pulse { row: usize, source: PulseError },
    #[error("file holds no pulses")]
    Empty,
}

/// Decimal notation rounded to `digits` significant digits, trailing zeros
/// dropped.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exponent = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exponent).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn parse_dataset(text: &str, name: &str, has_labels: bool) -> Result<Dataset, CsvError> {
    let mut pulses = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(expected) if expected != fields.len() => {
                return Err(CsvError::RaggedRows {
                    row,
                    expected,
                    found: fields.len(),
                })
            }
            _ => {}
        }
        let (label, samples) = if has_labels {
            let label = match fields[0] {
                "0" => Label::Neutron,
                "1" => Label::Gamma,
                other => {
                    return Err(CsvError::BadLabel {
                        row,
                        text: other.into(),
                    })
                }
            };
            (Some(label), &fields[1..])
        } else {
            (None, &fields[..])
        };
        let offset = fields.len() - samples.len();
        let samples = samples
            .iter()
            .enumerate()
            .map(|(j, f)| match f.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(CsvError::Parse {
                    row,
                    col: offset + j + 1,
                    text: (*f).into(),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        pulses.push(Pulse::new(samples, label).map_err(|source| CsvError::Pulse { row, source })?);
    }
    if pulses.is_empty() {
        return Err(CsvError::Empty);
    }
    // row widths and label presence are uniform by construction
    Ok(Dataset::new(name, pulses).expect("uniform rows"))
}

pub fn format_dataset(ds: &Dataset) -> String {
    let mut out = String::new();
    for p in ds.pulses() {
        let mut first = true;
        if let Some(l) = p.label() {
            write!(out, "{}", l.bit()).unwrap();
            first = false;
        }
        for &x in p.samples() {
            if !first {
                out.push(',');
            }
            out.push_str(&format_significant(x, SIGNIFICANT_DIGITS));
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Dataset name used in reports: the file stem.
pub fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

pub fn load_dataset(path: &Path, has_labels: bool) -> Result<Dataset, Error> {
    let text = atomic::read_to_string(path)?;
    parse_dataset(&text, &dataset_name(path), has_labels).map_err(|e| Error::format(path, e))
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), Error> {
    atomic::write_atomic(path, format_dataset(ds).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn labeled_rows() {
        let ds = parse_dataset("0,0.0,0.5,1.0,0.2\n1,0.0,0.9,1.0,0.1", "t", true).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels().unwrap(), vec![Label::Neutron, Label::Gamma]);
        assert_eq!(ds.pulses()[1].samples(), &[0.0, 0.9, 1.0, 0.1]);
    }

    #[test]
    fn unlabeled_rows_keep_every_column() {
        let ds = parse_dataset("0,0.5,1\n1,0.5,0\n", "t", false).unwrap();
        assert!(!ds.is_labeled());
        assert_eq!(ds.sample_len(), 3);
    }

    #[test]
    fn ragged_rows() {
        let long = vec!["0.5"; 280].join(",");
        let short = vec!["0.5"; 279].join(",");
        let err = parse_dataset(&format!("{long}\n{short}\n"), "t", false).unwrap_err();
        assert_eq!(
            err,
            CsvError::RaggedRows {
                row: 2,
                expected: 280,
                found: 279
            }
        );
    }

    #[test]
    fn errors_name_row_and_column() {
        assert_eq!(
            parse_dataset("0,1,2\n1,3,x\n", "t", true).unwrap_err(),
            CsvError::Parse {
                row: 2,
                col: 3,
                text: "x".into()
            }
        );
        assert!(matches!(
            parse_dataset("0,1,nan\n", "t", false),
            Err(CsvError::Parse { col: 3, .. })
        ));
        assert_eq!(
            parse_dataset("2,0.1,0.2\n", "t", true).unwrap_err(),
            CsvError::BadLabel {
                row: 1,
                text: "2".into()
            }
        );
        assert!(matches!(
            parse_dataset("0,0.1\n", "t", true),
            Err(CsvError::Pulse { row: 1, .. })
        ));
        assert_eq!(parse_dataset("\n", "t", true).unwrap_err(), CsvError::Empty);
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.0, 9), "0");
        assert_eq!(format_significant(1.0, 9), "1");
        assert_eq!(format_significant(0.5, 9), "0.5");
        assert_eq!(format_significant(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_significant(-1234.56789012, 9), "-1234.56789");
        assert_eq!(format_significant(2.5e-7, 9), "0.00000025");
        assert_eq!(format_significant(9.9999999996, 9), "10");
        assert_eq!(format_significant(-1e-12, 3), "-0.000000000001");
    }

    fn dataset() -> impl Strategy<Value = Dataset> {
        (2usize..20, any::<bool>()).prop_flat_map(|(n, labeled)| {
            proptest::collection::vec(
                (proptest::collection::vec(-10.0f64..10.0, n), any::<bool>()),
                100,
            )
            .prop_map(move |rows| {
                let pulses = rows
                    .into_iter()
                    .map(|(s, g)| {
                        let label =
                            labeled.then_some(if g { Label::Gamma } else { Label::Neutron });
                        Pulse::new(s, label).unwrap()
                    })
                    .collect();
                Dataset::new("r", pulses).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn save_load_round_trip(ds in dataset()) {
            let text = format_dataset(&ds);
            let back = parse_dataset(&text, "r", ds.is_labeled()).unwrap();
            prop_assert_eq!(format_dataset(&back), text);
            prop_assert_eq!(back.labels(), ds.labels());
            for (a, b) in ds.pulses().iter().zip(back.pulses()) {
                for (x, y) in a.samples().iter().zip(b.samples()) {
                    prop_assert!((x - y).abs() <= 5e-9 * x.abs().max(1e-300));
                }
            }
            let again = parse_dataset(&format_dataset(&back), "r", ds.is_labeled()).unwrap();
            prop_assert_eq!(again, back);
        }
    }
}
