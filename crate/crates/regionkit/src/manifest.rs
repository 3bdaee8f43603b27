//! Run manifests and run-stamped output directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of the canonical JSON form of the config. Input paths and the output
/// directory are left out: inputs enter the manifest by content digest, and
/// where a run is written does not change what it writes.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.paths = Default::default();
    sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
}

/// Everything needed to reproduce a run. Contains no timestamps or worker
/// counts, so reruns produce the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    /// Input role → sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the run directory) → sha256.
    pub outputs: BTreeMap<String, String>,
}

pub struct Run {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    /// Creates `output_dir/<command>-<stamp>`, the stamp hashing the command,
    /// the config hash, the seeds and the input digests.
    pub fn start(cfg: &RunConfig, command: &str, inputs: &[(&str, &Path)], seeds: &[(&str, u64)]) -> Result<Self> {
        let mut digests = BTreeMap::new();
        for (role, p) in inputs {
            digests.insert(role.to_string(), file_digest(p)?);
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash(cfg),
            seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            inputs: digests,
            outputs: BTreeMap::new(),
        };
        let stamp_src = serde_json::to_string(&manifest).expect("manifest serializes");
        let stamp = &sha256_hex(stamp_src.as_bytes())[..12];
        let dir = cfg.paths.output_dir.join(format!("{}-{stamp}", command.replace(' ', "-")));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir, manifest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes an output file and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.dir)
    }
}
