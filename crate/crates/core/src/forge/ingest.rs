//! LLM replies → instruction records.
//!
//! Description replies are `<regionN>: text` blocks; all other job types are
//! `Question[ N]: ...` / `Answer[ N]: ...` pairs. Numbered region tags become
//! `<region>` markers bound to the N-th region of the job's context. Replies
//! that do not fit are rejected, never repaired.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::prompt::{apply_short_form, JobType, PromptJob, ShortFormSuffix};
use super::templates::DETAILED_DESCRIPTION_QUESTIONS;
use super::{ImageContext, InstructionRecord, RegionAnnotation};
use crate::error::{Error, Result};
use crate::rng;
use crate::sequence::{count_markers, Conversation, RegionId, Role, Turn, REGION_MARKER};

/// Records from every job that parsed, and the failures of those that did not.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub records: Vec<InstructionRecord>,
    pub failures: Vec<(String, Error)>,
}

fn reject(job: &PromptJob, reason: impl Into<String>) -> Error {
    Error::ParseRejection {
        job_id: job.job_id.clone(),
        reason: reason.into(),
    }
}

/// Replaces `<regionN>` tags with `<region>` and returns the 1-based indices
/// in order of appearance.
fn bind_region_tags(job: &PromptJob, text: &str, region_count: usize) -> Result<(String, Vec<usize>)> {
    let mut out = String::with_capacity(text.len());
    let mut indices = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find("<region") {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + "<region".len()..];
        let digits = after.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 || !after[digits..].starts_with('>') {
            return Err(reject(job, "region tag without an index"));
        }
        let index: usize = after[..digits]
            .parse()
            .map_err(|_| reject(job, "region index out of range"))?;
        if index == 0 || index > region_count {
            return Err(Error::DanglingRegion {
                job_id: job.job_id.clone(),
                index,
            });
        }
        out.push_str(REGION_MARKER);
        indices.push(index);
        rest = &after[digits + 1..];
    }
    out.push_str(rest);
    Ok((out, indices))
}

struct Bound {
    text: String,
    indices: Vec<usize>,
}

fn bound_turn(role: Role, b: &Bound, ctx: &ImageContext) -> Turn {
    let ids = b.indices.iter().map(|&i| ctx.regions[i - 1].region_id).collect();
    Turn::new(role, b.text.clone(), ids)
}

/// Regions referenced by the conversation, in context order.
fn referenced_regions(ctx: &ImageContext, conv: &Conversation) -> Vec<RegionAnnotation> {
    let ids: Vec<RegionId> = conv.region_ids().collect();
    ctx.regions
        .iter()
        .filter(|r| ids.contains(&r.region_id))
        .cloned()
        .collect()
}

fn parse_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(label)?;
    let digits = rest.trim_start().bytes().take_while(u8::is_ascii_digit).count();
    let rest = rest.trim_start()[digits..].trim_start();
    rest.strip_prefix(':').map(str::trim)
}

fn parse_qa(job: &PromptJob, response: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut question: Option<String> = None;
    // which field continuation lines extend
    let mut open_answer = false;
    for raw in response.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(q) = parse_label(line, "Question") {
            if question.is_some() {
                return Err(reject(job, "question without an answer"));
            }
            question = Some(String::from(q));
            open_answer = false;
        } else if let Some(a) = parse_label(line, "Answer") {
            let Some(q) = question.take() else {
                return Err(reject(job, "answer without a question"));
            };
            pairs.push((q, String::from(a)));
            open_answer = true;
        } else if let Some(q) = question.as_mut() {
            q.push('\n');
            q.push_str(line);
        } else if open_answer {
            let last = pairs.last_mut().expect("open answer exists");
            last.1.push('\n');
            last.1.push_str(line);
        } else {
            return Err(reject(job, "text before the first question"));
        }
    }
    if question.is_some() {
        return Err(reject(job, "trailing question without an answer"));
    }
    if pairs.is_empty() {
        return Err(reject(job, "no question/answer pairs"));
    }
    if pairs.iter().any(|(q, a)| q.is_empty() || a.is_empty()) {
        return Err(reject(job, "empty question or answer"));
    }
    Ok(pairs)
}

fn parse_descriptions(job: &PromptJob, response: &str) -> Result<Vec<(usize, String)>> {
    let mut blocks: Vec<(usize, String)> = Vec::new();
    for raw in response.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tagged = line.strip_prefix("<region").and_then(|rest| {
            let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
            let body = rest[digits..].strip_prefix('>')?.trim_start().strip_prefix(':')?;
            let index = rest[..digits].parse::<usize>().ok()?;
            Some((index, String::from(body.trim())))
        });
        match (tagged, blocks.last_mut()) {
            (Some(block), _) => blocks.push(block),
            (None, Some(last)) => {
                last.1.push('\n');
                last.1.push_str(line);
            }
            (None, None) => return Err(reject(job, "text before the first region block")),
        }
    }
    if blocks.is_empty() {
        return Err(reject(job, "no <regionN>: blocks"));
    }
    if blocks.iter().any(|(_, t)| t.is_empty()) {
        return Err(reject(job, "empty region description"));
    }
    Ok(blocks)
}

fn description_question(seed: u64, job_id: &str, index: usize) -> &'static str {
    let usable: Vec<&'static str> = DETAILED_DESCRIPTION_QUESTIONS
        .iter()
        .copied()
        .filter(|q| count_markers(q) == 1)
        .collect();
    let mut r = rng::seeded(rng::derive_seed(seed, &alloc::format!("{job_id}/{index}")));
    usable[rng::pick_index(&mut r, usable.len())]
}

/// Parses one reply into records.
///
/// `seed` picks the question template of description records.
pub fn ingest_response(
    job: &PromptJob,
    ctx: &ImageContext,
    response: &str,
    seed: u64,
) -> Result<Vec<InstructionRecord>> {
    if job.image_ref != ctx.image_ref {
        return Err(reject(job, "context belongs to a different image"));
    }
    let n = ctx.regions.len();
    let task = job.job_type.task();
    match job.job_type {
        JobType::Description => {
            let mut records = Vec::new();
            for (index, text) in parse_descriptions(job, response)? {
                if index == 0 || index > n {
                    return Err(Error::DanglingRegion {
                        job_id: job.job_id.clone(),
                        index,
                    });
                }
                let question = Bound {
                    text: String::from(description_question(seed, &job.job_id, index)),
                    indices: alloc::vec![index],
                };
                let (text, indices) = bind_region_tags(job, &text, n)?;
                let answer = Bound { text, indices };
                let conversation = Conversation::new(alloc::vec![
                    bound_turn(Role::Human, &question, ctx),
                    bound_turn(Role::Assistant, &answer, ctx),
                ]);
                records.push(InstructionRecord {
                    image_ref: ctx.image_ref.clone(),
                    regions: referenced_regions(ctx, &conversation),
                    conversation,
                    task,
                });
            }
            Ok(records)
        }
        JobType::Conversation | JobType::ShortForm | JobType::PartAttributes => {
            let mut turns = Vec::new();
            for (q, a) in parse_qa(job, response)? {
                let q = if job.job_type == JobType::ShortForm {
                    apply_short_form(&q, ShortFormSuffix::ShortPhrase)?
                } else {
                    q
                };
                let (qt, qi) = bind_region_tags(job, &q, n)?;
                let (at, ai) = bind_region_tags(job, &a, n)?;
                turns.push(bound_turn(Role::Human, &Bound { text: qt, indices: qi }, ctx));
                turns.push(bound_turn(Role::Assistant, &Bound { text: at, indices: ai }, ctx));
            }
            let conversation = Conversation::new(turns);
            conversation.validate()?;
            Ok(alloc::vec![InstructionRecord {
                image_ref: ctx.image_ref.clone(),
                regions: referenced_regions(ctx, &conversation),
                conversation,
                task,
            }])
        }
    }
}

/// Ingests a batch. Jobs without a reply, and replies that fail to parse, are
/// reported as failures; the rest are ingested.
pub fn ingest_llm_responses(
    jobs: &[(&PromptJob, &ImageContext)],
    responses: &BTreeMap<String, String>,
    seed: u64,
) -> IngestOutcome {
    let mut outcome = IngestOutcome::default();
    for (job, ctx) in jobs {
        let Some(reply) = responses.get(&job.job_id) else {
            outcome
                .failures
                .push((job.job_id.clone(), reject(job, "no response")));
            continue;
        };
        match ingest_response(job, ctx, reply, seed) {
            Ok(records) => outcome.records.extend(records),
            Err(e) => outcome.failures.push((job.job_id.clone(), e)),
        }
    }
    outcome
}
