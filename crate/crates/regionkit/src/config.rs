//! Run configuration: a TOML file plus `section.key=value` overrides.

use std::path::{Path, PathBuf};

use regionkit_core::extractor::{ExtractorDims, PoolingMode, LEVELS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::ClientConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// COCO-style instances JSON (COCO, LVIS or PACO).
    pub annotations: Option<PathBuf>,
    /// Referring-expression refs exported to JSON.
    pub refs: Option<PathBuf>,
    /// Image descriptions JSON.
    pub descriptions: Option<PathBuf>,
    /// Feature pyramids (`OSPT`).
    pub features: Option<PathBuf>,
    /// Masks to extract tokens for (JSON-Lines `{image, id, rle}`).
    pub masks: Option<PathBuf>,
    /// Extractor weights (`OSPT`); seeded weights are used when absent.
    pub weights: Option<PathBuf>,
    /// Label embeddings (`OSPE`).
    pub embeddings: Option<PathBuf>,
    /// LLM replies for offline ingestion.
    pub responses: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dims {
    /// Projection and MLP hidden width.
    pub hidden: usize,
    /// Token width.
    pub out: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { hidden: 1024, out: 512 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub forge: u64,
    pub extract: u64,
    pub mine: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// Export prompt batches and read response files instead of calling out.
    pub offline: bool,
    #[serde(flatten)]
    pub client: ClientConfig,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            offline: true,
            client: ClientConfig::default(),
        }
    }
}

/// Probability that an image gets a job of each object-level kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ratios {
    pub description: f64,
    pub conversation: f64,
    pub short_form: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Self {
            description: 1.0,
            conversation: 1.0,
            short_form: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Fractional,
    Binary,
}

impl From<Pooling> for PoolingMode {
    fn from(p: Pooling) -> Self {
        match p {
            Pooling::Fractional => PoolingMode::Fractional,
            Pooling::Binary => PoolingMode::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeOptions {
    /// Regions per object-level prompt job.
    pub max_regions: usize,
    pub part_jobs: bool,
    pub yes_no: bool,
    pub pooling: Pooling,
}

impl Default for ForgeOptions {
    fn default() -> Self {
        Self {
            max_regions: 8,
            part_jobs: true,
            yes_no: true,
            pooling: Pooling::Fractional,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub dims: Dims,
    pub seeds: Seeds,
    pub llm: LlmConfig,
    pub ratios: Ratios,
    pub forge: ForgeOptions,
}

impl RunConfig {
    /// Parses `text`, applies overrides and resolves relative paths against
    /// `base`. Does not check that paths exist.
    pub fn parse(text: &str, overrides: &[String], base: &Path) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = table.try_into().map_err(|e| Error::Config(format!("{e}")))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::parse(&text, overrides, p.parent().unwrap_or(Path::new(".")))
            }
            None => Self::parse("", overrides, Path::new(".")),
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.annotations,
            &mut p.refs,
            &mut p.descriptions,
            &mut p.features,
            &mut p.masks,
            &mut p.weights,
            &mut p.embeddings,
            &mut p.responses,
        ]
        .into_iter()
        .flatten()
        {
            fix(slot);
        }
        if p.output_dir.as_os_str().is_empty() {
            p.output_dir = PathBuf::from("runs");
        }
        fix(&mut p.output_dir);
    }

    fn validate(&self) -> Result<()> {
        let r = self.ratios;
        for (name, v) in [("description", r.description), ("conversation", r.conversation), ("short_form", r.short_form)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("ratios.{name} = {v} is outside [0, 1]")));
            }
        }
        if self.dims.hidden == 0 || self.dims.out == 0 {
            return Err(Error::Config("dims must be positive".into()));
        }
        if self.forge.max_regions == 0 {
            return Err(Error::Config("forge.max_regions must be positive".into()));
        }
        Ok(())
    }

    /// The configured path, which must exist.
    pub fn require(&self, name: &str, path: &Option<PathBuf>) -> Result<PathBuf> {
        let p = path
            .clone()
            .ok_or_else(|| Error::Config(format!("paths.{name} is not set")))?;
        if !p.exists() {
            return Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
        }
        Ok(p)
    }

    pub fn extractor_dims(&self, level_channels: [usize; LEVELS]) -> ExtractorDims {
        ExtractorDims {
            level_channels,
            hidden: self.dims.hidden,
            out: self.dims.out,
        }
    }
}

/// `a.b=value`; the value is read as a TOML value, falling back to a string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key}: {part} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
