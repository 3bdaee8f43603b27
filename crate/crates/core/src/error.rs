use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core can report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Mask dimensions or bit buffer inconsistent.
    InvalidMask(String),
    /// Run-length counts do not describe a `height × width` mask.
    MalformedRle(String),
    /// Compact RLE string contains an invalid byte or a dangling continuation.
    MalformedRleString(String),
    DegeneratePolygon { vertices: usize },
    EmptyMask,
    /// Mask and feature grid are not related by one integer stride.
    StrideMismatch(String),
    NoNegativeAvailable { target: usize },
    InvalidDims(String),
    /// Number of `<region>` markers differs from the number of bindings.
    BindingMismatch { markers: usize, bindings: usize },
    MalformedConversation(String),
    MissingCaption { region: usize },
    UnknownAttribute(String),
    /// An LLM response could not be turned into records.
    ParseRejection { job_id: String, reason: String },
    DanglingRegion { job_id: String, index: usize },
    UnknownLabel(String),
    InsufficientCandidates { labels: usize, needed: usize },
    InvalidReference(String),
    InvalidCorpus(String),
    OverlappingMasks { image: String },
    JudgeFailure { skipped: usize },
    EmptyQuestion,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMask(m) => write!(f, "invalid mask: {m}"),
            Error::MalformedRle(m) => write!(f, "malformed rle: {m}"),
            Error::MalformedRleString(m) => write!(f, "malformed rle string: {m}"),
            Error::DegeneratePolygon { vertices } => {
                write!(f, "degenerate polygon: {vertices} vertices, need at least 3")
            }
            Error::EmptyMask => f.write_str("mask has no foreground pixels"),
            Error::StrideMismatch(m) => write!(f, "stride mismatch: {m}"),
            Error::NoNegativeAvailable { target } => {
                write!(f, "no differently-labeled region available for region {target}")
            }
            Error::InvalidDims(m) => write!(f, "invalid dims: {m}"),
            Error::BindingMismatch { markers, bindings } => write!(
                f,
                "binding mismatch: {markers} <region> markers but {bindings} bindings"
            ),
            Error::MalformedConversation(m) => write!(f, "malformed conversation: {m}"),
            Error::MissingCaption { region } => {
                write!(f, "missing caption for region {region}")
            }
            Error::UnknownAttribute(a) => write!(f, "unknown attribute: {a:?}"),
            Error::ParseRejection { job_id, reason } => {
                write!(f, "response for job {job_id} rejected: {reason}")
            }
            Error::DanglingRegion { job_id, index } => {
                write!(f, "response for job {job_id} references missing <region{index}>")
            }
            Error::UnknownLabel(l) => write!(f, "label not in embedding table: {l:?}"),
            Error::InsufficientCandidates { labels, needed } => write!(
                f,
                "embedding table has {labels} labels, need at least {needed}"
            ),
            Error::InvalidReference(m) => write!(f, "invalid reference: {m}"),
            Error::InvalidCorpus(m) => write!(f, "invalid corpus: {m}"),
            Error::OverlappingMasks { image } => {
                write!(f, "segments of image {image:?} overlap")
            }
            Error::JudgeFailure { skipped } => {
                write!(f, "judge produced no parseable score ({skipped} skipped)")
            }
            Error::EmptyQuestion => f.write_str("question is empty"),
        }
    }
}

impl core::error::Error for Error {}
