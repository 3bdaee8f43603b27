use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::templates::{
    CONVERSATION_SYSTEM_PROMPT, DESCRIPTION_SYSTEM_PROMPT, ONE_WORD_SUFFIX, PART_SYSTEM_PROMPT,
    SHORT_FORM_SYSTEM_PROMPT, SHORT_PHRASE_SUFFIX,
};
use super::{fewshot, ImageContext, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum JobType {
    Description,
    Conversation,
    ShortForm,
    PartAttributes,
}

impl JobType {
    pub const OBJECT_KINDS: [JobType; 3] =
        [JobType::Description, JobType::Conversation, JobType::ShortForm];

    pub fn system_prompt(self) -> &'static str {
        match self {
            JobType::Description => DESCRIPTION_SYSTEM_PROMPT,
            JobType::Conversation => CONVERSATION_SYSTEM_PROMPT,
            JobType::ShortForm => SHORT_FORM_SYSTEM_PROMPT,
            JobType::PartAttributes => PART_SYSTEM_PROMPT,
        }
    }

    pub fn task(self) -> Task {
        match self {
            JobType::Description => Task::DetailedDescription,
            JobType::Conversation => Task::Conversation,
            JobType::ShortForm => Task::ShortForm,
            JobType::PartAttributes => Task::PartQa,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JobType::Description => "description",
            JobType::Conversation => "conversation",
            JobType::ShortForm => "short_form",
            JobType::PartAttributes => "part_attributes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    fn new(role: &str, content: &str) -> Self {
        Self {
            role: String::from(role),
            content: String::from(content),
        }
    }
}

/// One request to the data-generation LLM.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PromptJob {
    pub job_id: String,
    pub image_ref: String,
    pub job_type: JobType,
    pub system_prompt: String,
    /// `(context, response)` in-context examples.
    pub few_shot: Vec<(String, String)>,
    pub query: String,
}

impl PromptJob {
    /// System message, alternating few-shot user/assistant pairs, then the query.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(2 + 2 * self.few_shot.len());
        out.push(ChatMessage::new("system", &self.system_prompt));
        for (context, response) in &self.few_shot {
            out.push(ChatMessage::new("user", context));
            out.push(ChatMessage::new("assistant", response));
        }
        out.push(ChatMessage::new("user", &self.query));
        out
    }
}

pub fn job_id(image_ref: &str, job_type: JobType) -> String {
    alloc::format!("{image_ref}#{}", job_type.as_str())
}

fn write_box(out: &mut String, category: &str, b: &[f64; 4]) {
    let _ = write!(out, "{category}: [{:.4},{:.4},{:.4},{:.4}]", b[0], b[1], b[2], b[3]);
}

fn terminated(caption: &str) -> String {
    let c = caption.trim();
    if c.ends_with(['.', '!', '?']) {
        String::from(c)
    } else {
        alloc::format!("{c}.")
    }
}

/// Object-level context: the image description, one box per line, then one
/// block per region, `<regionN> (category: [box]):` followed by its captions
/// joined with ` // `.
pub fn object_query(ctx: &ImageContext) -> Result<String> {
    if ctx.regions.is_empty() {
        return Err(Error::MissingCaption { region: 0 });
    }
    let mut lines: Vec<String> = Vec::new();
    lines.push(String::from(ctx.description.trim()));
    lines.push(String::new());
    if ctx.boxes.is_empty() {
        for r in &ctx.regions {
            let mut l = String::new();
            write_box(&mut l, &r.category, &r.bbox_norm);
            lines.push(l);
        }
    } else {
        for b in &ctx.boxes {
            let mut l = String::new();
            write_box(&mut l, &b.category, &b.bbox_norm);
            lines.push(l);
        }
    }
    for (i, r) in ctx.regions.iter().enumerate() {
        let captions: Vec<String> = r
            .captions
            .iter()
            .filter(|c| !c.trim().is_empty())
            .map(|c| terminated(c))
            .collect();
        if captions.is_empty() {
            return Err(Error::MissingCaption { region: i + 1 });
        }
        lines.push(String::new());
        let mut header = alloc::format!("<region{}> (", i + 1);
        write_box(&mut header, &r.category, &r.bbox_norm);
        header.push_str("):");
        lines.push(header);
        lines.push(captions.join(" // "));
    }
    Ok(lines.join("\n"))
}

/// Part-level context: `<regionN> category: attr1,attr2,...` per region.
pub fn part_query(ctx: &ImageContext) -> Result<String> {
    if ctx.regions.is_empty() {
        return Err(Error::UnknownAttribute(String::from("(no regions)")));
    }
    let mut lines = Vec::with_capacity(ctx.regions.len());
    for (i, r) in ctx.regions.iter().enumerate() {
        let attrs = r
            .attributes
            .as_ref()
            .ok_or_else(|| Error::UnknownAttribute(String::from("(no attributes)")))?
            .checked_list()?;
        lines.push(alloc::format!("<region{}> {}: {}", i + 1, r.category.trim(), attrs.join(",")));
    }
    Ok(lines.join("\n"))
}

fn object_fewshot(kind: JobType) -> Vec<(String, String)> {
    let response = match kind {
        JobType::Description => fewshot::MARKET_DESCRIPTION_RESPONSE,
        JobType::Conversation => fewshot::MARKET_CONVERSATION_RESPONSE,
        _ => fewshot::MARKET_SHORT_FORM_RESPONSE,
    };
    let context = object_query(&fewshot::market_context()).expect("built-in context is valid");
    alloc::vec![(context, String::from(response.trim_end()))]
}

/// Object-level job of the given kind (description, conversation or short form).
pub fn build_object_prompt_job(ctx: &ImageContext, kind: JobType) -> Result<PromptJob> {
    if kind == JobType::PartAttributes {
        return build_part_prompt_job(ctx);
    }
    let query = object_query(ctx)?;
    Ok(PromptJob {
        job_id: job_id(&ctx.image_ref, kind),
        image_ref: ctx.image_ref.clone(),
        job_type: kind,
        system_prompt: String::from(kind.system_prompt()),
        few_shot: object_fewshot(kind),
        query,
    })
}

pub fn build_part_prompt_job(ctx: &ImageContext) -> Result<PromptJob> {
    let query = part_query(ctx)?;
    let context = part_query(&fewshot::part_context()).expect("built-in context is valid");
    Ok(PromptJob {
        job_id: job_id(&ctx.image_ref, JobType::PartAttributes),
        image_ref: ctx.image_ref.clone(),
        job_type: JobType::PartAttributes,
        system_prompt: String::from(PART_SYSTEM_PROMPT),
        few_shot: alloc::vec![(context, String::from(fewshot::PART_QA_RESPONSE.trim_end()))],
        query,
    })
}

/// Which short-form suffix to append.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShortFormSuffix {
    /// `" Using a short phrase."`
    #[default]
    ShortPhrase,
    /// `" Using only one word or phrase."`
    OneWordOrPhrase,
}

impl ShortFormSuffix {
    pub fn text(self) -> &'static str {
        match self {
            ShortFormSuffix::ShortPhrase => SHORT_PHRASE_SUFFIX,
            ShortFormSuffix::OneWordOrPhrase => ONE_WORD_SUFFIX,
        }
    }
}

/// Appends the short-form suffix unless one is already present.
pub fn apply_short_form(question: &str, suffix: ShortFormSuffix) -> Result<String> {
    let q = question.trim_end();
    if q.trim().is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let known = [SHORT_PHRASE_SUFFIX.trim(), ONE_WORD_SUFFIX.trim()];
    if known.iter().any(|s| q.ends_with(s)) {
        return Ok(String::from(q));
    }
    Ok(alloc::format!("{q}{}", suffix.text()))
}
