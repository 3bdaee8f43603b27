//! Instruction-data construction.
//!
//! Object-level and part-level data come from an LLM: [`prompt`] builds the
//! prompt jobs and [`ingest`] turns the replies into records. Yes/no
//! robustness records with mined negatives come from [`negatives`] without an
//! LLM. [`validate`] checks a finished record set.

pub mod attributes;
pub mod fewshot;
pub mod ingest;
pub mod negatives;
pub mod prompt;
pub mod templates;
pub mod validate;

use alloc::string::String;
use alloc::vec::Vec;

pub use attributes::{PartAttributes, PartCategory};
pub use ingest::{ingest_llm_responses, ingest_response, IngestOutcome};
pub use negatives::{build_balanced_yesno, build_yesno_records, mine_class_negative, YesNoMode};
pub use prompt::{
    apply_short_form, build_object_prompt_job, build_part_prompt_job, ChatMessage, JobType,
    PromptJob,
};
pub use validate::{validate_dataset, DatasetReport};

use crate::error::{Error, Result};
use crate::mask::RleMask;
use crate::sequence::{Conversation, RegionId};

/// One annotated region of an image.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionAnnotation {
    #[cfg_attr(feature = "serde", serde(rename = "id"))]
    pub region_id: RegionId,
    pub category: String,
    #[cfg_attr(feature = "serde", serde(rename = "rle"))]
    pub mask: RleMask,
    /// `(x1, y1, x2, y2)` normalized to `[0, 1]`.
    #[cfg_attr(feature = "serde", serde(rename = "bbox"))]
    pub bbox_norm: [f64; 4],
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub captions: Vec<String>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub attributes: Option<PartAttributes>,
}

impl RegionAnnotation {
    pub fn new(region_id: RegionId, category: impl Into<String>, mask: RleMask, bbox_norm: [f64; 4]) -> Self {
        Self {
            region_id,
            category: category.into(),
            mask,
            bbox_norm,
            captions: Vec::new(),
            attributes: None,
        }
    }

    pub fn with_captions(mut self, captions: Vec<String>) -> Self {
        self.captions = captions;
        self
    }

    pub fn with_attributes(mut self, attributes: PartAttributes) -> Self {
        self.attributes = Some(attributes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.category.trim().is_empty() {
            return Err(Error::InvalidReference(alloc::format!(
                "region {} has an empty category",
                self.region_id
            )));
        }
        let [x1, y1, x2, y2] = self.bbox_norm;
        let in_unit = self.bbox_norm.iter().all(|v| (0.0..=1.0).contains(v));
        if !(in_unit && x1 <= x2 && y1 <= y2) {
            return Err(Error::InvalidReference(alloc::format!(
                "region {} bbox {:?} is not ordered in [0, 1]",
                self.region_id,
                self.bbox_norm
            )));
        }
        self.mask.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Task {
    DetailedDescription,
    Conversation,
    ShortForm,
    PartQa,
    YesNo,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::DetailedDescription,
        Task::Conversation,
        Task::ShortForm,
        Task::PartQa,
        Task::YesNo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::DetailedDescription => "detailed_description",
            Task::Conversation => "conversation",
            Task::ShortForm => "short_form",
            Task::PartQa => "part_qa",
            Task::YesNo => "yes_no",
        }
    }
}

/// One mask-grounded instruction-following sample.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstructionRecord {
    pub image_ref: String,
    pub regions: Vec<RegionAnnotation>,
    pub conversation: Conversation,
    pub task: Task,
}

impl InstructionRecord {
    /// Key used to order records independently of how they were produced.
    pub fn sort_key(&self) -> (&str, RegionId, Task, String) {
        let first = self.regions.iter().map(|r| r.region_id).min().unwrap_or(0);
        let mut text = String::new();
        for t in &self.conversation.turns {
            text.push_str(&t.text);
            text.push('\n');
        }
        (&self.image_ref, first, self.task, text)
    }
}

/// Sorts records by `(image_ref, first region id, task, text)`.
pub fn sort_records(records: &mut [InstructionRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Box list entry of an image context.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxEntry {
    pub category: String,
    pub bbox_norm: [f64; 4],
}

/// Everything an object- or part-level prompt job is built from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageContext {
    pub image_ref: String,
    /// Image-level description.
    pub description: String,
    /// All object boxes of the image; when empty the regions' boxes are listed.
    #[cfg_attr(feature = "serde", serde(default))]
    pub boxes: Vec<BoxEntry>,
    /// The regions addressed as `<region1>`, `<region2>`, ... in list order.
    pub regions: Vec<RegionAnnotation>,
}
