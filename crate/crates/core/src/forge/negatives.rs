//! Yes/no category records with spatially and semantically mined negatives.

use alloc::string::String;
use alloc::vec::Vec;

use super::templates::{
    AFFIRMATIVE_ANSWERS, CATEGORY_PLACEHOLDER, CATEGORY_QUESTIONS, NEGATIVE_ANSWERS,
};
use super::{InstructionRecord, RegionAnnotation, Task};
use crate::embedding::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::mask::{mask_stats, nearest_region, MaskStats};
use crate::rng;
use crate::sequence::{Conversation, Role, Turn};

/// Candidates the class-aware negative is drawn from.
pub const CLASS_NEGATIVE_POOL: usize = 8;

/// The `CLASS_NEGATIVE_POOL` labels most cosine-similar to `category`,
/// most similar first; ties keep table order.
pub fn class_negative_candidates(category: &str, table: &EmbeddingTable) -> Result<Vec<usize>> {
    let query = table
        .position(category)
        .ok_or_else(|| Error::UnknownLabel(String::from(category)))?;
    if table.len() < CLASS_NEGATIVE_POOL + 1 {
        return Err(Error::InsufficientCandidates {
            labels: table.len(),
            needed: CLASS_NEGATIVE_POOL + 1,
        });
    }
    let qv = table.vector_at(query);
    let mut scored: Vec<(usize, f64)> = (0..table.len())
        .filter(|&i| i != query)
        .map(|i| (i, cosine(qv, table.vector_at(i))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(CLASS_NEGATIVE_POOL).map(|(i, _)| i).collect())
}

/// Uniform pick among the top-8 most similar other labels.
pub fn mine_class_negative(category: &str, table: &EmbeddingTable, seed: u64) -> Result<String> {
    let pool = class_negative_candidates(category, table)?;
    let mut r = rng::seeded(seed);
    Ok(table.labels()[pool[rng::pick_index(&mut r, pool.len())]].clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YesNoMode {
    Positive,
    SpatialNegative,
    ClassNegative,
}

fn region_stats(regions: &[RegionAnnotation]) -> Result<Vec<(MaskStats, &str)>> {
    regions
        .iter()
        .map(|r| Ok((mask_stats(&r.mask.decode()?)?, r.category.as_str())))
        .collect()
}

fn yes_no_record(
    image_ref: &str,
    region: &RegionAnnotation,
    category: &str,
    positive: bool,
    seed: u64,
) -> InstructionRecord {
    let mut r = rng::seeded(seed);
    let template = CATEGORY_QUESTIONS[rng::pick_index(&mut r, CATEGORY_QUESTIONS.len())];
    let question = template.replace(CATEGORY_PLACEHOLDER, category);
    let answer = if positive {
        AFFIRMATIVE_ANSWERS[rng::pick_index(&mut r, AFFIRMATIVE_ANSWERS.len())]
    } else {
        NEGATIVE_ANSWERS[rng::pick_index(&mut r, NEGATIVE_ANSWERS.len())]
    };
    InstructionRecord {
        image_ref: String::from(image_ref),
        regions: alloc::vec![region.clone()],
        conversation: Conversation::new(alloc::vec![
            Turn::new(Role::Human, question, alloc::vec![region.region_id]),
            Turn::new(Role::Assistant, answer, Vec::new()),
        ]),
        task: Task::YesNo,
    }
}

fn region_seed(seed: u64, image_ref: &str, region: &RegionAnnotation, what: &str) -> u64 {
    rng::derive_seed(seed, &alloc::format!("{image_ref}/{}/{what}", region.region_id))
}

/// One yes/no record per region in the given mode.
///
/// Spatial negatives ask about the nearest differently-labeled region's
/// category; class negatives need `table`.
pub fn build_yesno_records(
    image_ref: &str,
    regions: &[RegionAnnotation],
    mode: YesNoMode,
    table: Option<&EmbeddingTable>,
    seed: u64,
) -> Result<Vec<InstructionRecord>> {
    let stats = match mode {
        YesNoMode::SpatialNegative => Some(region_stats(regions)?),
        _ => None,
    };
    let mut out = Vec::with_capacity(regions.len());
    for (i, region) in regions.iter().enumerate() {
        let (category, positive) = match mode {
            YesNoMode::Positive => (region.category.clone(), true),
            YesNoMode::SpatialNegative => {
                let stats = stats.as_ref().expect("computed for spatial mode");
                let (_, cat) = nearest_region(i, stats)?;
                (String::from(cat), false)
            }
            YesNoMode::ClassNegative => {
                let table = table.ok_or_else(|| Error::UnknownLabel(region.category.clone()))?;
                let s = region_seed(seed, image_ref, region, "class");
                (mine_class_negative(&region.category, table, s)?, false)
            }
        };
        let s = region_seed(seed, image_ref, region, if positive { "pos" } else { "neg" });
        out.push(yes_no_record(image_ref, region, &category, positive, s));
    }
    Ok(out)
}

/// Balanced yes/no set: for every region that admits a negative, one positive
/// and one negative record. The negative's miner is a seeded coin flip among
/// the miners that succeed for that region; regions with none are skipped.
pub fn build_balanced_yesno(
    image_ref: &str,
    regions: &[RegionAnnotation],
    table: Option<&EmbeddingTable>,
    seed: u64,
) -> Result<Vec<InstructionRecord>> {
    let stats = region_stats(regions)?;
    let mut out = Vec::with_capacity(2 * regions.len());
    for (i, region) in regions.iter().enumerate() {
        let spatial = nearest_region(i, &stats).ok().map(|(_, c)| String::from(c));
        let class = table.and_then(|t| {
            mine_class_negative(&region.category, t, region_seed(seed, image_ref, region, "class")).ok()
        });
        let negative = match (spatial, class) {
            (Some(s), Some(c)) => {
                let mut r = rng::seeded(region_seed(seed, image_ref, region, "mode"));
                if rng::pick_index(&mut r, 2) == 0 { s } else { c }
            }
            (Some(s), None) => s,
            (None, Some(c)) => c,
            (None, None) => continue,
        };
        out.push(yes_no_record(
            image_ref,
            region,
            &region.category,
            true,
            region_seed(seed, image_ref, region, "pos"),
        ));
        out.push(yes_no_record(
            image_ref,
            region,
            &negative,
            false,
            region_seed(seed, image_ref, region, "neg"),
        ));
    }
    Ok(out)
}

/// `Some(true)` for an affirmative answer, `Some(false)` for a negation.
pub fn answer_polarity(answer: &str) -> Option<bool> {
    let a = answer.trim_start();
    if AFFIRMATIVE_ANSWERS.iter().any(|p| a.starts_with(p)) || a.starts_with("Yes") {
        Some(true)
    } else if NEGATIVE_ANSWERS.iter().any(|p| a.starts_with(p)) || a.starts_with("No") {
        Some(false)
    } else {
        None
    }
}

/// Polarity of a yes/no record, read from its assistant answer.
pub fn record_polarity(record: &InstructionRecord) -> Option<bool> {
    record
        .conversation
        .turns
        .iter()
        .find(|t| t.role == Role::Assistant)
        .and_then(|t| answer_polarity(&t.text))
}
