//! Number formatting and small JSON helpers for the output artifacts.

use serde::Serialize;

/// Scientific notation with 17 significant digits (round-trips any `f64`).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
