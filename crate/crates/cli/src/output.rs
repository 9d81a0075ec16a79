//! Run manifests and the CSV/JSON files that carry them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use ptr_accountant::math::format_sig12;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Marker opening the first line of every CSV output.
pub const CSV_MANIFEST_PREFIX: &str = "# manifest: ";

/// Everything needed to rerun a command. `params` is the fully resolved
/// parameter set, so a replay never rereads the original inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub timestamp: String,
}

/// RFC 3339 time, taken from `SOURCE_DATE_EPOCH` when set.
pub fn timestamp() -> CliResult<String> {
    let now = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(raw) => {
            let secs: i64 = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("SOURCE_DATE_EPOCH must be an integer, got {raw:?}")))?;
            DateTime::from_timestamp(secs, 0)
                .ok_or_else(|| CliError::Usage(format!("SOURCE_DATE_EPOCH out of range: {secs}")))?
        }
        Err(_) => Utc::now(),
    };
    Ok(now.to_rfc3339_opts(SecondsFormat::Secs, true))
}

/// A CSV table with preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, manifest: &RunManifest) -> String {
        let mut out = String::new();
        out.push_str(CSV_MANIFEST_PREFIX);
        out.push_str(&serde_json::to_string(manifest).expect("manifest serializes"));
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// CSV cell for a number.
pub fn num(x: f64) -> String {
    format_sig12(x)
}

/// CSV cell for an optional number; empty when absent.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(format_sig12).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Csv(Table),
    Json(Map<String, Value>),
}

impl Payload {
    pub fn render(&self, manifest: &RunManifest) -> String {
        match self {
            Payload::Csv(table) => table.render(manifest),
            Payload::Json(fields) => {
                let mut doc = Map::new();
                doc.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
                doc.extend(fields.clone());
                let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json serializes");
                text.push('\n');
                text
            }
        }
    }
}

/// Main payload plus the per-iteration trace of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub main: Payload,
    pub trace: Option<Table>,
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

/// Default trace location next to a summary file: `run.json` gives
/// `run.trace.csv`.
pub fn trace_path_for(summary: &Path) -> PathBuf {
    summary.with_extension("trace.csv")
}

/// Reads the manifest embedded in a CSV or JSON output file.
pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let origin = path.display().to_string();
    let value: Value = if let Some(rest) = text.strip_prefix(CSV_MANIFEST_PREFIX) {
        let line = rest.lines().next().unwrap_or_default();
        serde_json::from_str(line).map_err(|e| CliError::Usage(format!("{origin}: bad manifest line: {e}")))?
    } else {
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{origin}: not a CSV or JSON output: {e}")))?;
        doc.get("manifest")
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("{origin}: no manifest field")))?
    };
    crate::error::from_value(value, &origin)
}

/// The output with its manifest removed, for payload comparisons.
#[cfg(test)]
fn strip_manifest(text: &str) -> CliResult<String> {
    if text.starts_with(CSV_MANIFEST_PREFIX) {
        return Ok(text.split_once('\n').map(|(_, rest)| rest).unwrap_or_default().to_string());
    }
    let mut doc: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("not a CSV or JSON output: {e}")))?;
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("manifest");
    }
    Ok(serde_json::to_string_pretty(&doc).expect("json serializes"))
}
