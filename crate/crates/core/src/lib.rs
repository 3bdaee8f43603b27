//! Region-level multimodal machinery below the language model.
//!
//! * [`mask`]: binary masks, COCO-compatible run-length codecs, polygon
//!   rasterization, geometry and feature-grid coverage.
//! * [`extractor`]: mask pooling over a four-level feature pyramid, projection
//!   and MLP fusion into a mask token, and the spatial token.
//! * [`sequence`]: the interleaved image / text / region placeholder sequence.
//! * [`forge`]: instruction-data construction (prompt jobs, response
//!   ingestion, negative mining, yes/no and short-form records, validation).
//! * [`eval`]: semantic similarity, semantic IoU, vocabulary matching, CIDEr,
//!   ground-truth-mask PQ / mIoU and judge-score ratios.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, network access
//! and the command line live in the `regionkit` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod embedding;
pub mod error;
pub mod eval;
pub mod extractor;
pub mod forge;
pub mod mask;
pub mod rng;
pub mod sequence;

pub use embedding::EmbeddingTable;
pub use error::{Error, Result};
pub use mask::{BinaryMask, MaskStats, Polygon, RleMask};
