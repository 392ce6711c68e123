//! File-format helpers shared by the library and the command-line tool.

use crate::error::{Error, Result};
use std::path::Path;

/// Serde adapter writing infinities as the strings `"inf"` / `"-inf"`.
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| serde::de::Error::custom("bad number")),
            serde_json::Value::String(s) => super::parse_extended(&s).map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom("expected a number or \"inf\"")),
        }
    }
}

/// Parses a decimal, a rational `a/b`, or `inf`.
pub fn parse_extended(s: &str) -> Result<f64> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => return Ok(f64::INFINITY),
        "-inf" | "-infinity" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    parse_rational(t)
}

/// Parses `a/b` with integer `a`, `b` (or a plain decimal); `1/32` is exact.
pub fn parse_rational(s: &str) -> Result<f64> {
    let t = s.trim();
    if let Some((a, b)) = t.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| Error::invalid(format!("bad rational '{s}'")))?;
        let b: i64 = b.trim().parse().map_err(|_| Error::invalid(format!("bad rational '{s}'")))?;
        if b == 0 {
            return Err(Error::invalid(format!("zero denominator in '{s}'")));
        }
        return Ok(a as f64 / b as f64);
    }
    let v: f64 = t.parse().map_err(|_| Error::invalid(format!("cannot parse number '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("number '{s}' is not finite")));
    }
    Ok(v)
}

/// Comma-separated list of rationals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(parse_rational).collect()
}

/// Formats with 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.11e}")
    }
}

/// Reads numeric CSV rows, skipping blank lines and a non-numeric header.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    parse_csv_rows(&text)
}

pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if n == 0 || rows.is_empty() => continue,
            Err(_) => return Err(Error::invalid(format!("non-numeric CSV field on line {}", n + 1))),
        }
    }
    Ok(rows)
}
