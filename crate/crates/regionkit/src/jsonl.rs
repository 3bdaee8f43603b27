//! JSON-Lines files.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn to_string<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn write<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_string(items).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
