//! `OSPT` tensor containers: named little-endian f32 tensors.
//!
//! ```text
//! "OSPT" | version u32 | count u32
//! per tensor: name_len u32 | name utf-8 | dtype u32 (0 = f32) | ndim u32 | dims u64* | data f32*
//! ```

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use regionkit_core::extractor::{
    ExtractorWeights, FeatureMap, FeaturePyramid, Linear, RegionTokens, DEFAULT_STRIDES, LEVELS,
};

use crate::binio::{read_f32s, read_string, read_u32, read_u64, Cursor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OSPT";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let n: u64 = dims.iter().product();
        if n != data.len() as u64 {
            return Err(Error::Invariant(format!(
                "tensor {name}: dims {dims:?} hold {n} values, payload has {}",
                data.len()
            )));
        }
        Ok(Self { name, dims, data })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    pub tensors: Vec<Tensor>,
}

impl TensorContainer {
    pub fn push(&mut self, tensor: Tensor) -> Result<()> {
        if self.get(&tensor.name).is_some() {
            return Err(Error::Invariant(format!("duplicate tensor name {}", tensor.name)));
        }
        self.tensors.push(tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|t| t.name.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&DTYPE_F32.to_le_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut c = Cursor::new(bytes);
        if c.take(4)? != MAGIC {
            return Err("not an OSPT file (bad magic)".into());
        }
        let version = read_u32(&mut c)?;
        if version != VERSION {
            return Err(format!("unsupported OSPT version {version}"));
        }
        let count = read_u32(&mut c)?;
        let mut tensors = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..count {
            let name = read_string(&mut c)?;
            let dtype = read_u32(&mut c)?;
            if dtype != DTYPE_F32 {
                return Err(format!("tensor {name}: unsupported dtype code {dtype}"));
            }
            let ndim = read_u32(&mut c)?;
            let dims = (0..ndim).map(|_| read_u64(&mut c)).collect::<std::result::Result<Vec<_>, _>>()?;
            let n = dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| format!("tensor {name}: dims overflow"))?;
            let data = read_f32s(&mut c, n)?;
            if !seen.insert(name.clone()) {
                return Err(format!("duplicate tensor name {name}"));
            }
            tensors.push(Tensor { name, dims, data });
        }
        if !c.is_empty() {
            return Err(format!("{} trailing bytes", c.remaining()));
        }
        Ok(Self { tensors })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    /// Indices `k` with an `img{k}/level1` tensor, ascending.
    pub fn image_indices(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self
            .names()
            .filter_map(|n| n.strip_prefix("img")?.strip_suffix("/level1")?.parse().ok())
            .collect();
        ks.sort_unstable();
        ks
    }

    /// Feature pyramid of image `k` from `img{k}/level1..4`, each `[C, H, W]`
    /// or `[1, C, H, W]`. Level 1 is taken to have stride 4.
    pub fn pyramid(&self, k: usize) -> std::result::Result<FeaturePyramid, String> {
        let mut maps = Vec::with_capacity(LEVELS);
        for j in 1..=LEVELS {
            let name = format!("img{k}/level{j}");
            let t = self.get(&name).ok_or_else(|| format!("missing tensor {name}"))?;
            let dims: Vec<usize> = match t.dims.as_slice() {
                [1, c, h, w] | [c, h, w] => vec![*c as usize, *h as usize, *w as usize],
                d => return Err(format!("{name}: expected [C,H,W], got {d:?}")),
            };
            maps.push(FeatureMap::new(dims[0], dims[1], dims[2], t.data.clone()).map_err(|e| format!("{name}: {e}"))?);
        }
        let (h, w) = (maps[0].height() * DEFAULT_STRIDES[0], maps[0].width() * DEFAULT_STRIDES[0]);
        let maps: [FeatureMap; LEVELS] = maps.try_into().expect("four levels");
        FeaturePyramid::from_maps(h, w, maps).map_err(|e| format!("image {k}: {e}"))
    }

    pub fn from_pyramid(pyramids: &[&FeaturePyramid]) -> Result<Self> {
        let mut c = Self::default();
        for (k, p) in pyramids.iter().enumerate() {
            for (j, level) in p.levels().iter().enumerate() {
                let m = &level.map;
                c.push(Tensor::new(
                    format!("img{k}/level{}", j + 1),
                    vec![m.channels() as u64, m.height() as u64, m.width() as u64],
                    m.data().to_vec(),
                )?)?;
            }
        }
        Ok(c)
    }

    pub fn from_weights(w: &ExtractorWeights) -> Result<Self> {
        let mut c = Self::default();
        let mut add = |prefix: &str, l: &Linear| -> Result<()> {
            c.push(Tensor::new(
                format!("{prefix}.weight"),
                vec![l.out_dim as u64, l.in_dim as u64],
                l.weight.clone(),
            )?)?;
            c.push(Tensor::new(format!("{prefix}.bias"), vec![l.out_dim as u64], l.bias.clone())?)
        };
        for (j, p) in w.projections.iter().enumerate() {
            add(&format!("proj{}", j + 1), p)?;
        }
        add("mlp.0", &w.fusion_in)?;
        add("mlp.2", &w.fusion_out)?;
        add("spatial", &w.spatial)?;
        Ok(c)
    }

    pub fn weights(&self) -> std::result::Result<ExtractorWeights, String> {
        let linear = |prefix: &str| -> std::result::Result<Linear, String> {
            let w = self.get(&format!("{prefix}.weight")).ok_or_else(|| format!("missing {prefix}.weight"))?;
            let b = self.get(&format!("{prefix}.bias")).ok_or_else(|| format!("missing {prefix}.bias"))?;
            let [out, inp] = w.dims[..] else {
                return Err(format!("{prefix}.weight must be 2-d"));
            };
            Linear::new(inp as usize, out as usize, w.data.clone(), b.data.clone()).map_err(|e| format!("{prefix}: {e}"))
        };
        let projections = [linear("proj1")?, linear("proj2")?, linear("proj3")?, linear("proj4")?];
        ExtractorWeights::new(projections, linear("mlp.0")?, linear("mlp.2")?, linear("spatial")?)
            .map_err(|e| e.to_string())
    }

    /// `region{k}/mask_token` and `region{k}/spatial_token` per region.
    pub fn from_tokens(tokens: &[RegionTokens]) -> Result<Self> {
        let mut c = Self::default();
        for (k, t) in tokens.iter().enumerate() {
            c.push(Tensor::new(
                format!("region{k}/mask_token"),
                vec![t.mask_token.len() as u64],
                t.mask_token.clone(),
            )?)?;
            c.push(Tensor::new(
                format!("region{k}/spatial_token"),
                vec![t.spatial_token.len() as u64],
                t.spatial_token.clone(),
            )?)?;
        }
        Ok(c)
    }
}
