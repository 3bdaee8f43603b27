//! Label → vector table shared by negative mining and the semantic metrics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    labels: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: BTreeMap<String, usize>,
    dim: usize,
}

impl EmbeddingTable {
    pub fn new(entries: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let dim = entries.first().map_or(0, |(_, v)| v.len());
        if dim == 0 {
            return Err(Error::InvalidDims(String::from(
                "embedding table needs at least one non-empty vector",
            )));
        }
        let mut labels = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        let mut index = BTreeMap::new();
        for (label, vector) in entries {
            if vector.len() != dim {
                return Err(Error::InvalidDims(alloc::format!(
                    "vector for {label:?} has {} entries, table dim is {dim}",
                    vector.len()
                )));
            }
            if index.insert(label.clone(), labels.len()).is_some() {
                return Err(Error::InvalidDims(alloc::format!("duplicate label {label:?}")));
            }
            labels.push(label);
            vectors.push(vector);
        }
        Ok(Self {
            labels,
            vectors,
            index,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn vector(&self, label: &str) -> Result<&[f32]> {
        self.position(label)
            .map(|i| self.vectors[i].as_slice())
            .ok_or_else(|| Error::UnknownLabel(String::from(label)))
    }

    pub fn vector_at(&self, i: usize) -> &[f32] {
        &self.vectors[i]
    }

    /// Raw cosine between two labels' vectors.
    pub fn cosine(&self, a: &str, b: &str) -> Result<f64> {
        Ok(cosine(self.vector(a)?, self.vector(b)?))
    }

    /// Copy with every vector scaled to unit length (zero vectors unchanged).
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.vectors {
            let n = libm::sqrt(v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>());
            if n > 0.0 {
                for x in v.iter_mut() {
                    *x = (f64::from(*x) / n) as f32;
                }
            }
        }
        out
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (libm::sqrt(na) * libm::sqrt(nb))
}
