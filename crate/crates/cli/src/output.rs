//! Artifact writers. All emitted numerics carry 6 significant digits and JSON
//! key order follows struct declaration order, so outputs are byte-stable.

use std::fs;
use std::path::{Path, PathBuf};

use cvqkd_core::protocol::fmt_sig;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Round every number in a JSON tree to 6 significant digits.
fn round_numbers(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if n.is_f64() {
                    let rounded: f64 = fmt_sig(x).parse().unwrap_or(x);
                    if let Some(num) = serde_json::Number::from_f64(rounded) {
                        *value = Value::Number(num);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Serialize to pretty JSON with rounded numerics and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut tree = serde_json::to_value(value)
        .map_err(|e| CliError::runtime(format!("serialization failed: {e}")))?;
    round_numbers(&mut tree);
    let mut text = serde_json::to_string_pretty(&tree)
        .map_err(|e| CliError::runtime(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let text = to_json_string(value)?;
    write_file(dir, name, &text)
}

/// Assemble a CSV from a header and rows of already-formatted fields.
pub fn csv_string(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Shorthand for formatting an f64 cell.
pub fn cell(x: f64) -> String {
    fmt_sig(x)
}
