//! Canonical JSON, hashing and atomic file output.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Rounds `x` to 12 significant digits. Non-finite values become the strings
/// `"inf"`, `"-inf"` and `"nan"`, since JSON has no literal for them.
pub fn number(x: f64) -> Value {
    if x.is_nan() {
        return Value::String("nan".into());
    }
    if x.is_infinite() {
        return Value::String(if x > 0.0 { "inf" } else { "-inf" }.into());
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    // avoid "-0.0" in reports
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    Value::Number(Number::from_f64(rounded).expect("finite"))
}

/// Applies [`number`] to every float inside `value`. Object keys come out
/// sorted because `serde_json::Map` is a `BTreeMap` here.
pub fn canonical(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => number(n.as_f64().expect("f64")),
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonical(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn render(value: Value) -> String {
    let mut text = serde_json::to_string_pretty(&canonical(value)).expect("JSON values always serialize");
    text.push('\n');
    text
}

/// Lowercase hex SHA-256 of the compact form of `value`, floats at full
/// precision.
pub fn hash(value: &Value) -> String {
    let text = serde_json::to_string(value).expect("JSON values always serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Same rounding as [`number`], for CSV cells.
pub fn cell(x: f64) -> String {
    match number(x) {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    let wrap = |source: std::io::Error| CliError::Write { path: path.clone(), source };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(contents.as_bytes()).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(&path).map_err(|e| wrap(e.error))?;
    Ok(())
}
