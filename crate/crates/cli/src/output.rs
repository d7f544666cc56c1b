//! Report envelope, number rounding and JSON/CSV emission.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use bct_core::{Alphabet, ContextTree, LogWeight};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Rounds to `digits` significant digits; non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

/// Rounds every float in a JSON tree to [`SIGNIFICANT_DIGITS`].
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"), SIGNIFICANT_DIGITS);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// CSV rendering of a float with 12 significant digits; empty for non-finite.
pub fn csv_float(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let r = round_sig(x, SIGNIFICANT_DIGITS);
    if r == 0.0 || (1e-4..1e12).contains(&r.abs()) {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

/// Probability in linear, natural-log and log10 scale. Zero has null logs.
pub fn log_prob(w: LogWeight) -> Value {
    json!({
        "probability": w.value(),
        "ln": w.ln(),
        "log10": w.log10(),
    })
}

pub fn tree_leaves(tree: &ContextTree, alphabet: &Alphabet) -> Value {
    json!(tree.render_leaves(alphabet))
}

pub fn tree_label(tree: &ContextTree, alphabet: &Alphabet) -> String {
    tree.render_leaves(alphabet).join(" ")
}

/// Header plus rows, all already formatted.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(data)?;
        for row in &self.rows {
            w.write_record(row).map_err(data)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

/// One command's outcome: JSON result plus its flat CSV view.
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub seed: Value,
    pub generator: Option<&'static str>,
    pub result: Value,
    pub table: Table,
}

impl Report {
    pub fn envelope(&self) -> Value {
        let mut map = Map::new();
        map.insert("tool".into(), json!("bct"));
        map.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        map.insert("command".into(), json!(self.command));
        map.insert("config".into(), self.config.clone());
        map.insert("seed".into(), self.seed.clone());
        map.insert("generator".into(), json!(self.generator));
        map.insert("result".into(), self.result.clone());
        round_json(Value::Object(map))
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.envelope()).map_err(data)?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => self.table.to_csv(),
        }
    }
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(data)
        }
    }
}
