//! File formats, dataset ingestion, the LLM batch client and the command line
//! around [`regionkit_core`].

mod binio;

pub mod annotations;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod jsonl;
pub mod llm;
pub mod manifest;
pub mod ospe;
pub mod ospt;
pub mod pipeline;

pub use error::{Error, Result};
