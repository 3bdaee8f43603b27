//! `OSPE` embedding tables.
//!
//! ```text
//! "OSPE" | version u32 | count u32 | dim u32
//! per entry: label_len u32 | label utf-8 | dim × f32
//! ```

use std::path::Path;

use regionkit_core::EmbeddingTable;

use crate::binio::{read_f32s, read_string, read_u32, Cursor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OSPE";
pub const VERSION: u32 = 1;

pub fn to_bytes(table: &EmbeddingTable) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(table.len() as u32).to_le_bytes());
    out.extend_from_slice(&(table.dim() as u32).to_le_bytes());
    for (i, label) in table.labels().iter().enumerate() {
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label.as_bytes());
        for v in table.vector_at(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> std::result::Result<EmbeddingTable, String> {
    let mut c = Cursor::new(bytes);
    if c.take(4)? != MAGIC {
        return Err("not an OSPE file (bad magic)".into());
    }
    let version = read_u32(&mut c)?;
    if version != VERSION {
        return Err(format!("unsupported OSPE version {version}"));
    }
    let count = read_u32(&mut c)?;
    let dim = read_u32(&mut c)?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let label = read_string(&mut c)?;
        let v = read_f32s(&mut c, u64::from(dim))?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(format!("non-finite value in vector for {label:?}"));
        }
        entries.push((label, v));
    }
    if !c.is_empty() {
        return Err(format!("{} trailing bytes", c.remaining()));
    }
    EmbeddingTable::new(entries).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> Result<EmbeddingTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write(table: &EmbeddingTable, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(table)).map_err(|e| Error::io(path, e))
}
