//! Straight-line reference implementations, written without reusing library
//! code, that the library is checked against.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

/// Column-major runs, first run counting zeros. `bits` is row-major.
pub fn rle_counts(h: usize, w: usize, bits: &[bool]) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for c in 0..w {
        for r in 0..h {
            let b = bits[r * w + c];
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

/// Transcription of the reference C string encoder.
pub fn rle_string(cnts: &[u32]) -> String {
    let mut s = Vec::new();
    for i in 0..cnts.len() {
        let mut x = cnts[i] as i64;
        if i > 2 {
            x -= cnts[i - 2] as i64;
        }
        let mut more = true;
        while more {
            let mut c = (x & 0x1f) as u8;
            x >>= 5;
            more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            s.push(c + 48);
        }
    }
    String::from_utf8(s).unwrap()
}

/// Transcription of the reference C string decoder.
pub fn rle_unstring(s: &str) -> Vec<u32> {
    let bytes = s.as_bytes();
    let mut cnts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        let mut more = true;
        while more {
            let c = bytes[p] as i64 - 48;
            x |= (c & 0x1f) << (5 * k);
            more = c & 0x20 != 0;
            p += 1;
            k += 1;
            if !more && (c & 0x10) != 0 {
                x |= -1i64 << (5 * k);
            }
        }
        let m = cnts.len();
        if m > 2 {
            x += cnts[m - 2];
        }
        cnts.push(x);
    }
    cnts.into_iter().map(|v| v as u32).collect()
}

/// True when `(x, y)` lies on a polygon edge, up to rounding.
pub fn on_edge(verts: &[(f64, f64)], x: f64, y: f64) -> bool {
    let n = verts.len();
    (0..n).any(|i| {
        let (ax, ay) = verts[i];
        let (bx, by) = verts[(i + 1) % n];
        let cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        let within = x >= ax.min(bx) - 1e-12
            && x <= ax.max(bx) + 1e-12
            && y >= ay.min(by) - 1e-12
            && y <= ay.max(by) + 1e-12;
        within && cross.abs() <= 1e-9 * (1.0 + (bx - ax).abs() + (by - ay).abs())
    })
}

/// W. Randolph Franklin's crossing test at `(x, y)`.
pub fn pnpoly(verts: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = verts.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Fractional pooling as a mean over mask pixels of the feature of the cell
/// each pixel falls into. `feat` is `[channel][row][col]`.
pub fn pool_fractional(
    h: usize,
    w: usize,
    bits: &[bool],
    feat: &[Vec<Vec<f32>>],
    stride: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; feat.len()];
    let mut n = 0usize;
    for r in 0..h {
        for c in 0..w {
            if bits[r * w + c] {
                n += 1;
                for (ch, plane) in feat.iter().enumerate() {
                    out[ch] += plane[r / stride][c / stride] as f64;
                }
            }
        }
    }
    out.iter().map(|v| v / n as f64).collect()
}

/// Binary pooling: plain mean over the distinct cells touched.
pub fn pool_binary(h: usize, w: usize, bits: &[bool], feat: &[Vec<Vec<f32>>], stride: usize) -> Vec<f64> {
    let mut cells = HashSet::new();
    for r in 0..h {
        for c in 0..w {
            if bits[r * w + c] {
                cells.insert((r / stride, c / stride));
            }
        }
    }
    feat.iter()
        .map(|plane| cells.iter().map(|&(i, j)| plane[i][j] as f64).sum::<f64>() / cells.len() as f64)
        .collect()
}

pub fn centroid(h: usize, w: usize, bits: &[bool]) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if bits[r * w + c] {
                sx += c as f64;
                sy += r as f64;
                n += 1.0;
            }
        }
    }
    (sx / n, sy / n)
}

pub fn cos(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Labels whose cosine to `query` is at least the 8th best among the others.
/// Ties at the boundary are all admitted.
pub fn top8(query: usize, vectors: &[Vec<f32>]) -> HashSet<usize> {
    let mut sims: Vec<f64> = (0..vectors.len())
        .filter(|&i| i != query)
        .map(|i| cos(&vectors[query], &vectors[i]))
        .collect();
    sims.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cut = sims[7.min(sims.len() - 1)];
    (0..vectors.len())
        .filter(|&i| i != query && cos(&vectors[query], &vectors[i]) >= cut)
        .collect()
}

fn words(s: &str) -> Vec<String> {
    let lower = s.to_lowercase();
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn grams(tokens: &[String], n: usize) -> HashMap<String, f64> {
    let mut m = HashMap::new();
    let mut i = 0;
    while i + n <= tokens.len() {
        *m.entry(tokens[i..i + n].join(" ")).or_insert(0.0) += 1.0;
        i += 1;
    }
    m
}

/// CIDEr per image: per n, the mean over references of the TF-IDF cosine,
/// then the mean over n = 1..4, times 10.
pub fn cider(cands: &[String], refs: &[Vec<String>]) -> Vec<f64> {
    let n_img = cands.len() as f64;
    let mut scores = vec![0.0; cands.len()];
    for n in 1..=4 {
        let mut df: HashMap<String, f64> = HashMap::new();
        for rs in refs {
            let mut seen = HashSet::new();
            for r in rs {
                for g in grams(&words(r), n).into_keys() {
                    seen.insert(g);
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0.0) += 1.0;
            }
        }
        let vec = |text: &str| -> HashMap<String, f64> {
            grams(&words(text), n)
                .into_iter()
                .map(|(g, tf)| {
                    let d = df.get(&g).copied().unwrap_or(0.0);
                    let d = if d < 1.0 { 1.0 } else { d };
                    (g, tf * (n_img.ln() - d.ln()))
                })
                .collect()
        };
        for i in 0..cands.len() {
            let c = vec(&cands[i]);
            let nc = c.values().map(|v| v * v).sum::<f64>().sqrt();
            let mut acc = 0.0;
            for r in &refs[i] {
                let rv = vec(r);
                let nr = rv.values().map(|v| v * v).sum::<f64>().sqrt();
                let dot: f64 = c.iter().map(|(g, v)| v * rv.get(g).copied().unwrap_or(0.0)).sum();
                if nc > 0.0 && nr > 0.0 {
                    acc += dot / (nc * nr);
                }
            }
            scores[i] += acc / refs[i].len() as f64;
        }
    }
    scores.iter().map(|s| s / 4.0 * 10.0).collect()
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / 2f64.sqrt()))
}

/// `W x + b` with `W` given as rows.
pub fn affine(rows: &[&[f32]], bias: &[f32], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .zip(bias)
        .map(|(row, b)| {
            let mut s = 0.0;
            for (w, v) in row.iter().zip(x) {
                s += *w as f64 * v;
            }
            s + *b as f64
        })
        .collect()
}
