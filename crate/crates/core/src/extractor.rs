//! Mask-aware region token extraction.
//!
//! A region's mask token is built by mask-pooling each of the four pyramid
//! levels, projecting every pooled vector to a shared width, summing, and
//! passing the sum through a two-layer GELU MLP. The spatial token is a linear
//! projection of the region mask resized to 224×224 and flattened row-major.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::{coverage_downsample, integer_stride, resize_fixed, BinaryMask, SPATIAL_SIDE};
use crate::rng;

pub const LEVELS: usize = 4;
/// Length of the flattened spatial-token input.
pub const SPATIAL_INPUT: usize = SPATIAL_SIDE * SPATIAL_SIDE;
pub const DEFAULT_STRIDES: [usize; LEVELS] = [4, 8, 16, 32];
pub const DEFAULT_INPUT_SIDE: usize = 512;

/// One feature map, channel-major (`[C, H, W]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidDims(alloc::format!(
                "feature map dims must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::InvalidDims(alloc::format!(
                "{} values for a {channels}x{height}x{width} map",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// Builds a map from `f(channel, row, col)`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for ch in 0..channels {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(ch, r, c));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.height + row) * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub map: FeatureMap,
    pub stride: usize,
}

/// Four feature levels of one image, finest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    input_height: usize,
    input_width: usize,
    levels: [PyramidLevel; LEVELS],
}

impl FeaturePyramid {
    pub fn new(input_height: usize, input_width: usize, levels: [PyramidLevel; LEVELS]) -> Result<Self> {
        for (j, level) in levels.iter().enumerate() {
            if j > 0 && level.stride <= levels[j - 1].stride {
                return Err(Error::InvalidDims(String::from(
                    "pyramid strides must be strictly increasing",
                )));
            }
            if level.map.height * level.stride != input_height
                || level.map.width * level.stride != input_width
            {
                return Err(Error::StrideMismatch(alloc::format!(
                    "level {j}: {}x{} at stride {} does not cover {input_height}x{input_width}",
                    level.map.height,
                    level.map.width,
                    level.stride
                )));
            }
        }
        Ok(Self {
            input_height,
            input_width,
            levels,
        })
    }

    /// Infers strides from the map sizes.
    pub fn from_maps(input_height: usize, input_width: usize, maps: [FeatureMap; LEVELS]) -> Result<Self> {
        let levels = maps.map(|map| {
            let stride = if map.height > 0 { input_height / map.height } else { 0 };
            PyramidLevel { map, stride }
        });
        Self::new(input_height, input_width, levels)
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.input_height, self.input_width)
    }

    pub fn levels(&self) -> &[PyramidLevel; LEVELS] {
        &self.levels
    }

    pub fn channels(&self) -> [usize; LEVELS] {
        core::array::from_fn(|j| self.levels[j].map.channels)
    }
}

/// Pooled features of one region at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeature {
    pub level: usize,
    pub values: Vec<f64>,
}

/// How mask pixels weight each feature cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolingMode {
    /// Weight = covered fraction of the cell.
    #[default]
    Fractional,
    /// Weight = 1 for any cell with coverage, else 0.
    Binary,
}

/// Coverage-weighted mean of the cell vectors under the mask.
pub fn mask_pool(
    mask: &BinaryMask,
    level: &FeatureMap,
    stride: usize,
    mode: PoolingMode,
) -> Result<Vec<f64>> {
    if mask.height() != level.height * stride || mask.width() != level.width * stride {
        return Err(Error::StrideMismatch(alloc::format!(
            "mask {}x{} vs feature grid {}x{} at stride {stride}",
            mask.height(),
            mask.width(),
            level.height,
            level.width
        )));
    }
    debug_assert_eq!(
        integer_stride((mask.height(), mask.width()), (level.height, level.width)).ok(),
        Some(stride)
    );
    let grid = coverage_downsample(mask, level.height, level.width)?;
    let cells = level.height * level.width;
    let mut weights = Vec::with_capacity(cells);
    let mut total = 0.0f64;
    for &n in &grid.counts {
        let w = match (mode, n) {
            (_, 0) => 0.0,
            (PoolingMode::Fractional, n) => f64::from(n) / (stride * stride) as f64,
            (PoolingMode::Binary, _) => 1.0,
        };
        total += w;
        weights.push(w);
    }
    if total == 0.0 {
        return Err(Error::EmptyMask);
    }
    let mut out = alloc::vec![0.0f64; level.channels];
    for (ch, acc) in out.iter_mut().enumerate() {
        let plane = &level.data[ch * cells..(ch + 1) * cells];
        let mut s = 0.0f64;
        for (w, &f) in weights.iter().zip(plane) {
            if *w != 0.0 {
                s += w * f64::from(f);
            }
        }
        *acc = s / total;
    }
    Ok(out)
}

/// Affine map `y = W x + b`, `W` stored `[out, in]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weight.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::InvalidDims(alloc::format!(
                "linear {in_dim}->{out_dim}: weight has {} values, bias {}",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
    fn random(in_dim: usize, out_dim: usize, rng: &mut rng::SeededRng) -> Self {
        let bound = 1.0 / libm::sqrt(in_dim as f64);
        let mut draw = |n: usize| -> Vec<f32> {
            (0..n)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                .map(|x| x as f32)
                .collect()
        };
        let weight = draw(in_dim * out_dim);
        let bias = draw(out_dim);
        Self {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }

    pub fn row(&self, o: usize) -> &[f32] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::InvalidDims(alloc::format!(
                "input has {} entries, layer expects {}",
                x.len(),
                self.in_dim
            )));
        }
        Ok((0..self.out_dim)
            .map(|o| {
                let dot: f64 = self.row(o).iter().zip(x).map(|(&w, &v)| f64::from(w) * v).sum();
                dot + f64::from(self.bias[o])
            })
            .collect())
    }
}

/// Exact (erf) GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractorDims {
    pub level_channels: [usize; LEVELS],
    /// Shared projection width.
    pub hidden: usize,
    /// Token width.
    pub out: usize,
}

impl ExtractorDims {
    pub fn validate(&self) -> Result<()> {
        if self.level_channels.contains(&0) || self.hidden == 0 || self.out == 0 {
            return Err(Error::InvalidDims(alloc::format!(
                "all extractor dims must be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorWeights {
    /// One projection per level, `C_j -> hidden`.
    pub projections: [Linear; LEVELS],
    /// `hidden -> hidden`, GELU, then `fusion_out`.
    pub fusion_in: Linear,
    pub fusion_out: Linear,
    /// `224*224 -> out`.
    pub spatial: Linear,
}

impl ExtractorWeights {
    pub fn new(
        projections: [Linear; LEVELS],
        fusion_in: Linear,
        fusion_out: Linear,
        spatial: Linear,
    ) -> Result<Self> {
        let w = Self {
            projections,
            fusion_in,
            fusion_out,
            spatial,
        };
        w.dims()?;
        Ok(w)
    }

    /// Seeded initialization; identical seed and dims give identical bits.
    pub fn init(seed: u64, dims: ExtractorDims) -> Result<Self> {
        dims.validate()?;
        let mut rng = rng::seeded(seed);
        let projections =
            core::array::from_fn(|j| Linear::random(dims.level_channels[j], dims.hidden, &mut rng));
        let fusion_in = Linear::random(dims.hidden, dims.hidden, &mut rng);
        let fusion_out = Linear::random(dims.hidden, dims.out, &mut rng);
        let spatial = Linear::random(SPATIAL_INPUT, dims.out, &mut rng);
        Ok(Self {
            projections,
            fusion_in,
            fusion_out,
            spatial,
        })
    }

    /// Dimensions, after checking that the layers chain.
    pub fn dims(&self) -> Result<ExtractorDims> {
        let hidden = self.projections[0].out_dim;
        let out = self.fusion_out.out_dim;
        let chained = self.projections.iter().all(|p| p.out_dim == hidden)
            && self.fusion_in.in_dim == hidden
            && self.fusion_in.out_dim == hidden
            && self.fusion_out.in_dim == hidden
            && self.spatial.in_dim == SPATIAL_INPUT
            && self.spatial.out_dim == out;
        if !chained {
            return Err(Error::InvalidDims(String::from(
                "extractor layers do not chain",
            )));
        }
        let dims = ExtractorDims {
            level_channels: core::array::from_fn(|j| self.projections[j].in_dim),
            hidden,
            out,
        };
        dims.validate()?;
        Ok(dims)
    }

    /// `Σ_j P_j(V_j)`, the fused vector before the MLP.
    pub fn fuse_pre(&self, pooled: &[Vec<f64>; LEVELS]) -> Result<Vec<f64>> {
        let hidden = self.projections[0].out_dim;
        let mut sum = alloc::vec![0.0f64; hidden];
        for (proj, v) in self.projections.iter().zip(pooled) {
            if v.len() != proj.in_dim {
                return Err(Error::InvalidDims(alloc::format!(
                    "pooled feature has {} channels, projection expects {}",
                    v.len(),
                    proj.in_dim
                )));
            }
            for (s, y) in sum.iter_mut().zip(proj.apply(v)?) {
                *s += y;
            }
        }
        Ok(sum)
    }

    /// The fusion MLP: linear, GELU, linear.
    pub fn mlp(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.fusion_in.apply(x)?;
        for v in &mut h {
            *v = gelu(*v);
        }
        self.fusion_out.apply(&h)
    }

    pub fn fuse_tokens(&self, pooled: &[Vec<f64>; LEVELS]) -> Result<Vec<f32>> {
        let pre = self.fuse_pre(pooled)?;
        Ok(to_f32(&self.mlp(&pre)?))
    }

    /// Projection of the 224×224-resized, row-major flattened mask.
    pub fn spatial_token(&self, mask: &BinaryMask) -> Result<Vec<f32>> {
        let resized = resize_fixed(mask, SPATIAL_SIDE)?;
        let on: Vec<usize> = resized
            .bits()
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        Ok((0..self.spatial.out_dim)
            .map(|o| {
                let row = self.spatial.row(o);
                let s: f64 = on.iter().map(|&p| f64::from(row[p])).sum();
                (s + f64::from(self.spatial.bias[o])) as f32
            })
            .collect())
    }
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Mask and spatial token of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTokens {
    pub mask_token: Vec<f32>,
    pub spatial_token: Vec<f32>,
}

/// Pools every level, fuses into the mask token, and adds the spatial token.
pub fn extract_region_tokens(
    mask: &BinaryMask,
    pyramid: &FeaturePyramid,
    weights: &ExtractorWeights,
    mode: PoolingMode,
) -> Result<RegionTokens> {
    if (mask.height(), mask.width()) != pyramid.input_dims() {
        return Err(Error::StrideMismatch(alloc::format!(
            "mask {}x{} vs pyramid input {}x{}",
            mask.height(),
            mask.width(),
            pyramid.input_height,
            pyramid.input_width
        )));
    }
    let mut pooled: [Vec<f64>; LEVELS] = Default::default();
    for (slot, level) in pooled.iter_mut().zip(&pyramid.levels) {
        *slot = mask_pool(mask, &level.map, level.stride, mode)?;
    }
    Ok(RegionTokens {
        mask_token: weights.fuse_tokens(&pooled)?,
        spatial_token: weights.spatial_token(mask)?,
    })
}

/// Random pyramid for tests and dry runs.
pub fn synthetic_pyramid(
    seed: u64,
    input_side: usize,
    strides: [usize; LEVELS],
    channels: [usize; LEVELS],
) -> Result<FeaturePyramid> {
    let mut rng = rng::seeded(seed);
    let mut maps: [Option<FeatureMap>; LEVELS] = Default::default();
    for j in 0..LEVELS {
        let side = input_side / strides[j].max(1);
        let map = FeatureMap::from_fn(channels[j], side, side, |_, _, _| {
            rng.random::<f32>() * 2.0 - 1.0
        })?;
        maps[j] = Some(map);
    }
    let levels = core::array::from_fn(|j| PyramidLevel {
        map: maps[j].take().expect("filled above"),
        stride: strides[j],
    });
    FeaturePyramid::new(input_side, input_side, levels)
}
