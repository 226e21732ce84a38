//! Deterministic JSON reports and CSV tables.
//!
//! Floats are written with 17 significant digits in exponent form, so a
//! report is a pure function of its inputs. Non-finite floats become `null`.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: &str = "1";

/// Which side of the tolerance a check value must fall on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// value ≤ tolerance
    Upper,
    /// value ≥ tolerance
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// The checked quantity; for lower-bound checks this is a minimum.
    pub max_residual: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl CheckRecord {
    pub fn upper(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_residual: value,
            tolerance,
            bound: Bound::Upper,
            pass: value <= tolerance,
        }
    }

    pub fn lower(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_residual: value,
            tolerance,
            bound: Bound::Lower,
            pass: value >= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: String,
    pub problem_hash: String,
    pub checks: Vec<CheckRecord>,
    pub environment: Value,
    pub summary: Value,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, problem_hash: String, environment: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            problem_hash,
            checks: Vec::new(),
            environment,
            summary: Value::Object(Map::new()),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Marks the report failed without a numeric check (e.g. divergence).
    pub fn fail(&mut self, note: impl Into<String>) {
        self.pass = false;
        self.note(note);
    }

    pub fn set_summary(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        if let Value::Object(map) = &mut self.summary {
            map.insert(key.to_string(), v);
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        to_json(&serde_json::to_value(self).expect("report is plain data"))
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // one spelling for both signed zeros
        return format!("{:.16e}", 0.0);
    }
    format!("{v:.16e}")
}

/// Pretty JSON with fixed float formatting and sorted object keys.
pub fn to_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.push_str(&"  ".repeat(d));
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                match n.as_f64() {
                    Some(f) if f.is_finite() => out.push_str(&format_float(f)),
                    _ => out.push_str("null"),
                }
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            if items.iter().all(|v| v.is_number() || v.is_null()) {
                out.push('[');
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, v, depth);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, v) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, v, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, v)) in map.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, v, depth + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Hex SHA-256 of the problem file bytes.
pub fn problem_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Comma-separated table with a header line and `\n` line endings.
pub fn csv<S: AsRef<str>>(header: &[S], rows: &[Vec<f64>]) -> String {
    let mut out = header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
