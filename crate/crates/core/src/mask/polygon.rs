use alloc::vec::Vec;

use super::BinaryMask;
use crate::error::{Error, Result};

/// Closed polygon in continuous pixel coordinates, `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon {
                vertices: vertices.len(),
            });
        }
        Ok(Self { vertices })
    }

    /// From a COCO flat coordinate list `[x1, y1, x2, y2, ...]`.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        Self::new(coords.chunks_exact(2).map(|p| (p[0], p[1])).collect())
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }
}

/// Even-odd fill sampled at pixel centers `(col + 0.5, row + 0.5)`.
///
/// Vertices are clamped to `[0, width] × [0, height]` first. A center lying
/// exactly on an edge is outside.
pub fn rasterize_polygon(poly: &Polygon, height: usize, width: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::zeros(height, width)?;
    fill(&mut mask, poly);
    Ok(mask)
}

/// Union of several polygons, as COCO stores multi-part objects.
pub fn rasterize_polygons(polys: &[Polygon], height: usize, width: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::zeros(height, width)?;
    for p in polys {
        fill(&mut mask, p);
    }
    Ok(mask)
}

fn fill(mask: &mut BinaryMask, poly: &Polygon) {
    let (h, w) = (mask.height(), mask.width());
    let pts: Vec<(f64, f64)> = poly
        .vertices
        .iter()
        .map(|&(x, y)| (x.clamp(0.0, w as f64), y.clamp(0.0, h as f64)))
        .collect();
    let n = pts.len();
    let mut xs: Vec<f64> = Vec::new();
    for row in 0..h {
        let y = row as f64 + 0.5;
        xs.clear();
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            // half-open in y so a vertex on the scanline is counted once
            if (y0 > y) != (y1 > y) {
                xs.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        if xs.is_empty() {
            continue;
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            // centers strictly inside (a, b)
            let first = libm::floor(a - 0.5) as i64 + 1;
            let last = libm::ceil(b - 0.5) as i64 - 1;
            let lo = first.max(0);
            let hi = last.min(w as i64 - 1);
            for col in lo..=hi {
                let cx = col as f64 + 0.5;
                if cx > a && cx < b {
                    mask.set(row, col as usize, true);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rectangle_fills_block() {
        let p = Polygon::new(vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]).unwrap();
        let m = rasterize_polygon(&p, 8, 8).unwrap();
        let expect = BinaryMask::from_fn(8, 8, |r, c| r < 4 && c < 4).unwrap();
        assert_eq!(m, expect);
    }

    #[test]
    fn outside_polygon_is_empty() {
        let p = Polygon::new(vec![(20.0, 20.0), (30.0, 20.0), (30.0, 30.0)]).unwrap();
        assert!(rasterize_polygon(&p, 8, 8).unwrap().is_empty());
        let p = Polygon::new(vec![(-9.0, -9.0), (-1.0, -9.0), (-1.0, -1.0)]).unwrap();
        assert!(rasterize_polygon(&p, 8, 8).unwrap().is_empty());
    }

    #[test]
    fn tiny_triangle_without_center_is_empty() {
        let p = Polygon::new(vec![(1.0, 1.0), (1.4, 1.0), (1.0, 1.4)]).unwrap();
        assert!(rasterize_polygon(&p, 4, 4).unwrap().is_empty());
    }

    #[test]
    fn edge_through_centers_is_excluded() {
        // left edge at x = 0.5 passes exactly through column-0 centers
        let p = Polygon::new(vec![(0.5, 0.0), (3.0, 0.0), (3.0, 2.0), (0.5, 2.0)]).unwrap();
        let m = rasterize_polygon(&p, 2, 4).unwrap();
        let expect = BinaryMask::from_fn(2, 4, |_, c| c == 1 || c == 2).unwrap();
        assert_eq!(m, expect);
    }

    #[test]
    fn degenerate() {
        assert_eq!(
            Polygon::new(vec![(0.0, 0.0), (1.0, 1.0)]),
            Err(Error::DegeneratePolygon { vertices: 2 })
        );
        assert!(Polygon::from_flat(&[0.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn concave_even_odd() {
        // U shape: the notch between the arms stays empty
        let p = Polygon::new(vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 2.0),
            (2.0, 2.0),
            (2.0, 0.0),
            (3.0, 0.0),
            (3.0, 3.0),
            (0.0, 3.0),
        ])
        .unwrap();
        let m = rasterize_polygon(&p, 3, 3).unwrap();
        assert!(m.get(0, 0) && !m.get(0, 1) && m.get(0, 2));
        assert!(m.get(2, 1));
    }
}
