//! Dense feature files and label tables.
//!
//! Feature files are little-endian: the 4-byte magic `VVFT`, `u32` rows,
//! `u32` cols, then `rows·cols` `f32` values in row-major order. Label
//! tables are CSV with the header `index,label`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VVFT";

pub fn decode(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing VVFT header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("VVFT dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "VVFT body has {} bytes, header promises {expected}",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    if cols == 0 {
        return Ok(vec![Vec::new(); rows]);
    }
    Ok(values.chunks_exact(cols).map(<[f64]>::to_vec).collect())
}

/// Encode rows as VVFT. Values are narrowed to `f32`.
pub fn encode(rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format("ragged rows cannot be written as VVFT".into()));
    }
    let mut out = Vec::with_capacity(12 + rows.len() * cols * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn write_features(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, encode(rows)?).map_err(|e| Error::io(path, e))
}

/// Parse an `index,label` table. Indices must be `0..n` in any order.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(str::trim) {
        Some("index,label") => {}
        other => {
            return Err(Error::Format(format!(
                "label table must start with `index,label`, found {other:?}"
            )))
        }
    }
    let mut pairs = Vec::new();
    for (n, line) in lines.enumerate() {
        let mut fields = line.split(',').map(str::trim);
        let parse = |f: Option<&str>| -> Result<usize> {
            f.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad label row {}: {line:?}", n + 2)))
        };
        let index = parse(fields.next())?;
        let label = parse(fields.next())?;
        pairs.push((index, label));
    }
    let mut labels = vec![None; pairs.len()];
    for (index, label) in pairs {
        match labels.get_mut(index) {
            Some(slot @ None) => *slot = Some(label),
            _ => return Err(Error::Format(format!("label index {index} missing or repeated"))),
        }
    }
    Ok(labels.into_iter().map(|l| l.unwrap()).collect())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
}
