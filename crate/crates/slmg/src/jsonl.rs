//! JSON Lines reading with line-numbered errors, and float formatting for
//! lossless round-trips.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Read one deserializable value per non-empty line.
pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn write_string(path: &Path, content: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(content.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Format with 17 significant digits, enough to reproduce any f64 exactly.
pub(crate) fn f64_sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `[a,b,c]` with every element at 17 significant digits.
pub(crate) fn f64_array_sig17(xs: &[f64]) -> String {
    let mut s = String::with_capacity(xs.len() * 24 + 2);
    s.push('[');
    for (i, &x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&f64_sig17(x));
    }
    s.push(']');
    s
}
