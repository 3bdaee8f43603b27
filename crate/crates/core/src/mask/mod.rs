//! Masks and their geometry.

mod polygon;
mod rle;

pub use polygon::{rasterize_polygon, rasterize_polygons, Polygon};
pub use rle::{rle_from_string, rle_to_string, RleMask};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Side of the fixed grid the spatial token is computed on.
pub const SPATIAL_SIDE: usize = 224;

/// Row-major boolean pixel grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidMask(alloc::format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if bits.len() != height * width {
            return Err(Error::InvalidMask(alloc::format!(
                "{} bits for a {height}x{width} mask",
                bits.len()
            )));
        }
        Ok(Self { height, width, bits })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![false; height * width])
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![true; height * width])
    }

    /// Builds a mask from a predicate over `(row, col)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self::new(height, width, bits)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        if other.height != self.height || other.width != self.width {
            return Err(Error::InvalidMask(alloc::format!(
                "cannot merge {}x{} into {}x{}",
                other.height,
                other.width,
                self.height,
                self.width
            )));
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    pub fn to_rle(&self) -> RleMask {
        RleMask::encode(self)
    }
}

/// Tight bounds, area and centroid of a non-empty mask.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaskStats {
    /// `(x0, y0, x1, y1)`, inclusive pixel bounds.
    pub bbox: (usize, usize, usize, usize),
    pub area: usize,
    /// Mean of foreground pixel centers, `(x, y)`.
    pub centroid: (f64, f64),
}

pub fn mask_stats(mask: &BinaryMask) -> Result<MaskStats> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let mut area = 0usize;
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for r in 0..mask.height {
        for c in 0..mask.width {
            if mask.get(r, c) {
                area += 1;
                x0 = x0.min(c);
                x1 = x1.max(c);
                y0 = y0.min(r);
                y1 = y1.max(r);
                sx += c as f64 + 0.5;
                sy += r as f64 + 0.5;
            }
        }
    }
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(MaskStats {
        bbox: (x0, y0, x1, y1),
        area,
        centroid: (sx / area as f64, sy / area as f64),
    })
}

/// Per-cell foreground pixel counts of a mask over a coarser grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageGrid {
    pub height: usize,
    pub width: usize,
    pub stride: usize,
    /// Foreground pixels per cell, row-major.
    pub counts: Vec<u32>,
}

impl CoverageGrid {
    /// Fraction of cell `(row, col)` covered, in `[0, 1]`.
    pub fn fraction(&self, row: usize, col: usize) -> f64 {
        f64::from(self.counts[row * self.width + col]) / (self.stride * self.stride) as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        let cell = (self.stride * self.stride) as f64;
        self.counts.iter().map(|&n| f64::from(n) / cell).collect()
    }

    pub fn covered_pixels(&self) -> usize {
        self.counts.iter().map(|&n| n as usize).sum()
    }
}

/// Integer stride `s` with `source = target × s` in both axes.
pub fn integer_stride(
    source: (usize, usize),
    target: (usize, usize),
) -> Result<usize> {
    let (sh, sw) = source;
    let (th, tw) = target;
    if th == 0 || tw == 0 || th > sh || tw > sw {
        return Err(Error::StrideMismatch(alloc::format!(
            "cannot map {sh}x{sw} onto {th}x{tw}"
        )));
    }
    if sh % th != 0 || sw % tw != 0 || sh / th != sw / tw {
        return Err(Error::StrideMismatch(alloc::format!(
            "{sh}x{sw} is not an integer multiple of {th}x{tw} with one stride"
        )));
    }
    Ok(sh / th)
}

/// Fractional foreground coverage of each `stride × stride` block.
pub fn coverage_downsample(
    mask: &BinaryMask,
    target_h: usize,
    target_w: usize,
) -> Result<CoverageGrid> {
    let stride = integer_stride((mask.height, mask.width), (target_h, target_w))?;
    let mut counts = vec![0u32; target_h * target_w];
    for r in 0..mask.height {
        let row = &mask.bits[r * mask.width..(r + 1) * mask.width];
        let cell_row = (r / stride) * target_w;
        for (c, &b) in row.iter().enumerate() {
            if b {
                counts[cell_row + c / stride] += 1;
            }
        }
    }
    Ok(CoverageGrid {
        height: target_h,
        width: target_w,
        stride,
        counts,
    })
}

/// Nearest-neighbour resampling sampled at output pixel centers.
pub fn resize_nearest(mask: &BinaryMask, out_h: usize, out_w: usize) -> Result<BinaryMask> {
    if out_h == mask.height && out_w == mask.width {
        return Ok(mask.clone());
    }
    // src = floor((dst + 0.5) * src_len / dst_len), in integers
    let rows: Vec<usize> = (0..out_h)
        .map(|r| ((2 * r + 1) * mask.height / (2 * out_h)).min(mask.height - 1))
        .collect();
    let cols: Vec<usize> = (0..out_w)
        .map(|c| ((2 * c + 1) * mask.width / (2 * out_w)).min(mask.width - 1))
        .collect();
    BinaryMask::from_fn(out_h, out_w, |r, c| mask.get(rows[r], cols[c]))
}

/// Resizes to `side × side`; the spatial token uses `side = 224`.
pub fn resize_fixed(mask: &BinaryMask, side: usize) -> Result<BinaryMask> {
    resize_nearest(mask, side, side)
}

/// Differently-labeled region whose centroid is closest to the target's.
///
/// Ties go to the lowest index. Returns the winner's index and category.
pub fn nearest_region<S: AsRef<str>>(
    target: usize,
    regions: &[(MaskStats, S)],
) -> Result<(usize, &str)> {
    let (target_stats, target_cat) = regions
        .get(target)
        .ok_or(Error::NoNegativeAvailable { target })?;
    let (tx, ty) = target_stats.centroid;
    let mut best: Option<(usize, f64)> = None;
    for (i, (stats, cat)) in regions.iter().enumerate() {
        if i == target || cat.as_ref() == target_cat.as_ref() {
            continue;
        }
        let dx = stats.centroid.0 - tx;
        let dy = stats.centroid.1 - ty;
        let d2 = dx * dx + dy * dy;
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, _)| (i, regions[i].1.as_ref()))
        .ok_or(Error::NoNegativeAvailable { target })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pixel_mask(h: usize, w: usize, on: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(h, w, |r, c| on.contains(&(r, c))).unwrap()
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(BinaryMask::new(0, 3, vec![]).is_err());
        assert!(BinaryMask::new(2, 2, vec![true; 3]).is_err());
    }

    #[test]
    fn stats_single_pixel() {
        let s = mask_stats(&pixel_mask(5, 5, &[(2, 3)])).unwrap();
        assert_eq!(s.area, 1);
        assert_eq!(s.bbox, (3, 2, 3, 2));
        assert_eq!(s.centroid, (3.5, 2.5));
    }

    #[test]
    fn stats_full_and_pair() {
        let s = mask_stats(&BinaryMask::ones(4, 4).unwrap()).unwrap();
        assert_eq!(s.area, 16);
        assert_eq!(s.centroid, (2.0, 2.0));
        assert_eq!(s.bbox, (0, 0, 3, 3));

        let s = mask_stats(&pixel_mask(1, 4, &[(0, 0), (0, 3)])).unwrap();
        // centers (0.5, 0.5) and (3.5, 0.5)
        assert_eq!(s.centroid, (2.0, 0.5));
    }

    #[test]
    fn stats_empty_is_error() {
        assert_eq!(
            mask_stats(&BinaryMask::zeros(3, 3).unwrap()),
            Err(Error::EmptyMask)
        );
    }

    #[test]
    fn coverage_cases() {
        let g = coverage_downsample(&BinaryMask::ones(4, 4).unwrap(), 2, 2).unwrap();
        assert_eq!(g.fractions(), vec![1.0; 4]);

        let g = coverage_downsample(&pixel_mask(4, 4, &[(3, 0)]), 2, 2).unwrap();
        assert_eq!(g.fractions(), vec![0.0, 0.0, 0.25, 0.0]);

        let g = coverage_downsample(&BinaryMask::zeros(4, 4).unwrap(), 2, 2).unwrap();
        assert_eq!(g.fractions(), vec![0.0; 4]);
    }

    #[test]
    fn coverage_rejects_fractional_stride() {
        let m = BinaryMask::ones(6, 6).unwrap();
        assert!(matches!(
            coverage_downsample(&m, 4, 4),
            Err(Error::StrideMismatch(_))
        ));
        // different strides per axis
        let m = BinaryMask::ones(4, 8).unwrap();
        assert!(matches!(
            coverage_downsample(&m, 2, 2),
            Err(Error::StrideMismatch(_))
        ));
        assert!(coverage_downsample(&BinaryMask::ones(2, 2).unwrap(), 4, 4).is_err());
    }

    #[test]
    fn resize_identity_full_and_half() {
        let m = BinaryMask::from_fn(224, 224, |r, c| (r * 7 + c * 3) % 5 == 0).unwrap();
        assert_eq!(resize_fixed(&m, 224).unwrap(), m);

        let full = BinaryMask::ones(448, 448).unwrap();
        assert_eq!(resize_fixed(&full, 224).unwrap(), BinaryMask::ones(224, 224).unwrap());

        let left = BinaryMask::from_fn(448, 448, |_, c| c < 224).unwrap();
        let expect = BinaryMask::from_fn(224, 224, |_, c| c < 112).unwrap();
        assert_eq!(resize_fixed(&left, 224).unwrap(), expect);
    }

    fn stats_at(x: f64, y: f64) -> MaskStats {
        MaskStats {
            bbox: (0, 0, 0, 0),
            area: 1,
            centroid: (x, y),
        }
    }

    #[test]
    fn nearest_picks_closest_other_category() {
        let regions = [
            (stats_at(10.0, 10.0), "dog"),
            (stats_at(12.0, 10.0), "cat"),
            (stats_at(50.0, 50.0), "car"),
        ];
        assert_eq!(nearest_region(0, &regions).unwrap(), (1, "cat"));
    }

    #[test]
    fn nearest_without_candidates() {
        let regions = [(stats_at(0.0, 0.0), "sock"), (stats_at(1.0, 1.0), "sock")];
        assert_eq!(
            nearest_region(0, &regions),
            Err(Error::NoNegativeAvailable { target: 0 })
        );
    }

    #[test]
    fn nearest_tie_goes_to_lowest_index() {
        let regions = [
            (stats_at(5.0, 5.0), "sock"),
            (stats_at(7.0, 5.0), "calf"),
            (stats_at(5.0, 5.0), "sock"),
            (stats_at(3.0, 5.0), "ball"),
        ];
        assert_eq!(nearest_region(0, &regions).unwrap(), (1, "calf"));
    }
}
