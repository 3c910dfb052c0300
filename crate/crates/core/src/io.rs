//! Distribution files and machine-readable run reports.
//!
//! A distribution file is UTF-8 text:
//!
//! ```text
//! # comments and blank lines are ignored
//! X: x0 x1
//! Y: erased y0 y1
//! 0.35 0.15 0.00
//! 0.35 0.00 0.15
//! ```
//!
//! Row `i` holds `P_XY(x_i, .)` in the column order of the `Y:` header.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prob::JointDistribution;

/// Allowed deviation of the total file mass from 1 before renormalizing.
pub const FILE_MASS_TOL: f64 = 1e-6;

pub const SCHEMA_VERSION: u32 = 1;

fn parse_header(line: &str, lineno: usize, key: &str) -> Result<Vec<String>> {
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.trim_start().strip_prefix(':'))
        .ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("expected header `{key}: <labels>`"),
        })?;
    let labels: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
    if labels.is_empty() {
        return Err(Error::Parse {
            line: lineno,
            message: format!("no {key} labels"),
        });
    }
    let mut seen = BTreeSet::new();
    for l in &labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("duplicate {key} label {l:?}"),
            });
        }
    }
    Ok(labels)
}

/// Parses distribution text. Masses within [`FILE_MASS_TOL`] of 1 are
/// renormalized; zero-mass symbols are dropped by [`JointDistribution::new`].
pub fn parse_distribution_str(text: &str) -> Result<JointDistribution> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (xl, xline) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let x_labels = parse_header(xline, xl, "X")?;
    let (yl, yline) = lines.next().ok_or(Error::Parse {
        line: xl,
        message: "missing `Y:` header".into(),
    })?;
    let y_labels = parse_header(yline, yl, "Y")?;

    let mut rows = Vec::with_capacity(x_labels.len());
    for (lineno, line) in lines {
        if rows.len() == x_labels.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("more than {} rows", x_labels.len()),
            });
        }
        let row_label = &x_labels[rows.len()];
        let mut row = Vec::with_capacity(y_labels.len());
        for (c, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("not a number: {tok:?}"),
            })?;
            if !v.is_finite() || v < 0.0 {
                let col = y_labels.get(c).map_or("?", String::as_str);
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("entry {v} at row {row_label:?}, column {col:?} is not a nonnegative number"),
                });
            }
            row.push(v);
        }
        if row.len() != y_labels.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("row {row_label:?} has {} entries, expected {}", row.len(), y_labels.len()),
            });
        }
        rows.push(row);
    }
    if rows.len() != x_labels.len() {
        return Err(Error::Invalid(format!(
            "expected {} rows, found {}",
            x_labels.len(),
            rows.len()
        )));
    }
    let total: f64 = rows.iter().flatten().sum();
    if (total - 1.0).abs() > FILE_MASS_TOL {
        return Err(Error::Invalid(format!(
            "total mass {total} is not within {FILE_MASS_TOL} of 1"
        )));
    }
    for v in rows.iter_mut().flatten() {
        *v /= total;
    }
    JointDistribution::new(rows, x_labels, y_labels)
}

pub fn parse_distribution(path: &Path) -> Result<JointDistribution> {
    parse_distribution_str(&std::fs::read_to_string(path)?)
}

/// Writes `j` in the file format read by [`parse_distribution_str`].
pub fn format_distribution(j: &JointDistribution) -> String {
    let mut out = format!("X: {}\nY: {}\n", j.x_labels().join(" "), j.y_labels().join(" "));
    for x in 0..j.nx() {
        let row: Vec<String> = j.row(x).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// `sha256:<hex>` of the raw input bytes.
pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut out = String::from("sha256:");
    for b in hash {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// A number with its unit and the tolerance it was computed to.
pub fn quantity(value: impl Serialize, unit: &str, tol: f64) -> Value {
    json!({ "value": value, "unit": unit, "tol": tol })
}

pub fn bits(value: f64, tol: f64) -> Value {
    quantity(value, "bits", tol)
}

/// A table for the CSV projection of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: String,
    pub input: InputRef,
    pub seed: Option<u64>,
    /// Tolerances in effect, by name. Sorted for stable output.
    pub tolerances: Map<String, Value>,
    pub results: Map<String, Value>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub table: Option<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRef {
    /// File name without directories, so reports do not depend on the working directory.
    pub name: String,
    pub digest: String,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    /// The report's table if it has one, otherwise one `key,value,unit,tol`
    /// row per leaf quantity of `results`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let res: csv::Result<()> = (|| {
            if let Some(t) = &self.table {
                w.write_record(&t.columns)?;
                for row in &t.rows {
                    w.write_record(row.iter().map(|v| v.to_string()))?;
                }
            } else {
                w.write_record(["key", "value", "unit", "tol"])?;
                let mut flat = Vec::new();
                flatten("", &Value::Object(self.results.clone()), &mut flat);
                for (k, v, unit, tol) in flat {
                    w.write_record([k, v, unit, tol])?;
                }
            }
            Ok(())
        })();
        res.expect("writing CSV to memory cannot fail");
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String, String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) if m.contains_key("value") && m.contains_key("unit") => {
            let unit = scalar(&m["unit"]);
            let tol = m.get("tol").map(scalar).unwrap_or_default();
            match &m["value"] {
                Value::Array(items) => {
                    for (i, item) in items.iter().enumerate() {
                        flatten_value(&format!("{prefix}.{i}"), item, &unit, &tol, out);
                    }
                }
                other => out.push((prefix.to_string(), scalar(other), unit, tol)),
            }
        }
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&join(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), item, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other), String::new(), String::new())),
    }
}

fn flatten_value(prefix: &str, v: &Value, unit: &str, tol: &str, out: &mut Vec<(String, String, String, String)>) {
    match v {
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten_value(&format!("{prefix}.{i}"), item, unit, tol, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other), unit.to_string(), tol.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_labels() {
        let j = parse_distribution_str("# bsc\n\nX: a b\nY: u v\n0.45 0.05  # first\n0.05 0.45\n").unwrap();
        assert_eq!(j.x_labels(), ["a", "b"]);
        assert_eq!(j.y_labels(), ["u", "v"]);
        assert!((j.get(1, 1) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let j = parse_distribution_str("X: a b\nY: u v\n0.2500005 0.25\n0.25 0.25\n").unwrap();
        let total: f64 = j.as_flat().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_files() {
        let err = parse_distribution_str("X: a b\nY: u v\n0.6 -0.1\n0.25 0.25\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("\"a\"") && msg.contains("\"v\""), "{msg}");
        assert!(matches!(err, Error::Parse { line: 3, .. }));

        let err = parse_distribution_str("X: a b\nY: u v\n0.24 0.25\n0.24 0.25\n").unwrap_err();
        assert!(err.to_string().contains("total mass"));

        let err = parse_distribution_str("X: a b\nY: u v\n0.5 0.25\n0.25\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));

        assert!(parse_distribution_str("X: a a\nY: u v\n0.5 0\n0 0.5\n").is_err());
        assert!(parse_distribution_str("Y: u v\nX: a b\n0.5 0\n0 0.5\n").is_err());
        assert!(parse_distribution_str("X: a b\nY: u v\n0.5 0\n").is_err());
        assert!(parse_distribution_str("X: a b\nY: u v\n0.5 x\n0 0.5\n").is_err());
        assert!(parse_distribution_str("").is_err());
    }

    #[test]
    fn drops_zero_columns() {
        let j = parse_distribution_str("X: a b\nY: u v w\n0.5 0 0\n0 0.5 0\n").unwrap();
        assert_eq!(j.ny(), 2);
        assert_eq!(j.dropped_y_labels(), ["w"]);
    }

    #[test]
    fn round_trip() {
        let text = "X: a b c\nY: u v\n0.1 0.2\n0.3 0.1\n0.25 0.05\n";
        let j = parse_distribution_str(text).unwrap();
        let back = parse_distribution_str(&format_distribution(&j)).unwrap();
        assert_eq!(j, back);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            digest(b"abc"),
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_projection_flattens_quantities() {
        let mut results = Map::new();
        results.insert("utility".into(), bits(0.5, 1e-9));
        results.insert("filter".into(), quantity(vec![vec![1.0, 0.0]], "probability", 1e-9));
        let r = RunReport {
            schema: SCHEMA_VERSION,
            command: "g0".into(),
            input: InputRef {
                name: "a.dist".into(),
                digest: digest(b""),
            },
            seed: None,
            tolerances: Map::new(),
            results,
            warnings: vec![],
            table: None,
        };
        let csv = r.to_csv();
        assert!(csv.starts_with("key,value,unit,tol\n"));
        assert!(csv.contains("filter.0.1,0.0,probability,1e-9\n"), "{csv}");
        assert!(csv.contains("utility,0.5,bits,1e-9\n"));
    }
}
