//! The batch pipelines behind `forge`, `prompts`, `mine` and `extract`.
//!
//! Work is spread over a rayon pool per image or per region; every output is
//! sorted or index-ordered before it is written, so results do not depend on
//! the worker count.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use regionkit_core::extractor::{extract_region_tokens, ExtractorWeights, PoolingMode, RegionTokens};
use regionkit_core::forge::{
    build_balanced_yesno, build_object_prompt_job, build_part_prompt_job, ingest_llm_responses,
    sort_records, validate_dataset, DatasetReport, ImageContext, InstructionRecord, JobType,
    PromptJob,
};
use regionkit_core::mask::{mask_stats, nearest_region, resize_nearest};
use regionkit_core::rng::derive_seed;
use regionkit_core::{EmbeddingTable, RleMask};
use serde::{Deserialize, Serialize};

use crate::annotations::{image_context, part_context, ImageRegions};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ospt::TensorContainer;

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Uniform draw in `[0, 1)` fixed by seed and key.
fn unit_draw(seed: u64, key: &str) -> f64 {
    (derive_seed(seed, key) >> 11) as f64 / (1u64 << 53) as f64
}

/// A prompt job with the context it was built from.
#[derive(Debug, Clone)]
pub struct PlannedJob {
    pub job: PromptJob,
    pub context: ImageContext,
}

/// Prompt jobs for every image, sorted by job id. Object-level kinds are kept
/// with the configured per-kind probability; images whose context cannot form
/// a job are reported in the second list.
pub fn plan_jobs(
    images: &[ImageRegions],
    descriptions: &HashMap<String, String>,
    cfg: &RunConfig,
) -> (Vec<PlannedJob>, Vec<(String, String)>) {
    let seed = cfg.seeds.forge;
    let per_image: Vec<(Vec<PlannedJob>, Vec<(String, String)>)> = images
        .par_iter()
        .map(|img| {
            let mut jobs = Vec::new();
            let mut failures = Vec::new();
            let desc = descriptions.get(&img.image_ref).map(String::as_str).unwrap_or("");
            let ctx = image_context(img, desc, cfg.forge.max_regions);
            if !ctx.regions.is_empty() {
                for kind in JobType::OBJECT_KINDS {
                    let ratio = match kind {
                        JobType::Description => cfg.ratios.description,
                        JobType::Conversation => cfg.ratios.conversation,
                        _ => cfg.ratios.short_form,
                    };
                    if unit_draw(seed, &format!("{}#{}", img.image_ref, kind.as_str())) >= ratio {
                        continue;
                    }
                    match build_object_prompt_job(&ctx, kind) {
                        Ok(job) => jobs.push(PlannedJob { job, context: ctx.clone() }),
                        Err(e) => failures.push((img.image_ref.clone(), e.to_string())),
                    }
                }
            }
            if cfg.forge.part_jobs {
                let pctx = part_context(img, cfg.forge.max_regions);
                if !pctx.regions.is_empty() {
                    match build_part_prompt_job(&pctx) {
                        Ok(job) => jobs.push(PlannedJob { job, context: pctx }),
                        Err(e) => failures.push((img.image_ref.clone(), e.to_string())),
                    }
                }
            }
            (jobs, failures)
        })
        .collect();
    let mut jobs = Vec::new();
    let mut failures = Vec::new();
    for (j, f) in per_image {
        jobs.extend(j);
        failures.extend(f);
    }
    jobs.sort_by(|a, b| a.job.job_id.cmp(&b.job.job_id));
    failures.sort();
    (jobs, failures)
}

/// Balanced yes/no records for every image.
pub fn yes_no_records(
    images: &[ImageRegions],
    table: Option<&EmbeddingTable>,
    seed: u64,
) -> Result<Vec<InstructionRecord>> {
    let per_image: Vec<Result<Vec<InstructionRecord>>> = images
        .par_iter()
        .map(|img| Ok(build_balanced_yesno(&img.image_ref, &img.regions, table, derive_seed(seed, &img.image_ref))?))
        .collect();
    let mut out = Vec::new();
    for r in per_image {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ForgeOutput {
    pub records: Vec<InstructionRecord>,
    /// `(job id or image, reason)`.
    pub failures: Vec<(String, String)>,
    pub report: DatasetReport,
}

/// Ingests replies for the planned jobs, adds yes/no records, sorts and
/// validates.
pub fn forge_records(
    images: &[ImageRegions],
    jobs: &[PlannedJob],
    responses: &BTreeMap<String, String>,
    table: Option<&EmbeddingTable>,
    cfg: &RunConfig,
) -> Result<ForgeOutput> {
    let pairs: Vec<(&PromptJob, &ImageContext)> = jobs.iter().map(|p| (&p.job, &p.context)).collect();
    let ingested = ingest_llm_responses(&pairs, responses, cfg.seeds.forge);
    let mut records = ingested.records;
    let mut failures: Vec<(String, String)> =
        ingested.failures.into_iter().map(|(id, e)| (id, e.to_string())).collect();
    if cfg.forge.yes_no {
        records.extend(yes_no_records(images, table, cfg.seeds.forge)?);
    }
    sort_records(&mut records);
    failures.sort();
    let report = validate_dataset(&records);
    Ok(ForgeOutput { records, failures, report })
}

/// Negatives mined for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedNegatives {
    pub image_ref: String,
    pub region_id: u32,
    pub category: String,
    /// Category of the nearest differently-labeled region.
    pub spatial: Option<String>,
    /// Pick among the eight most similar labels.
    pub class: Option<String>,
}

pub fn mine_negatives(
    images: &[ImageRegions],
    table: Option<&EmbeddingTable>,
    seed: u64,
) -> Result<Vec<MinedNegatives>> {
    let per_image: Vec<Result<Vec<MinedNegatives>>> = images
        .par_iter()
        .map(|img| {
            let stats = img
                .regions
                .iter()
                .map(|r| Ok((mask_stats(&r.mask.decode()?)?, r.category.as_str())))
                .collect::<regionkit_core::Result<Vec<_>>>()?;
            img.regions
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let spatial = nearest_region(i, &stats).ok().map(|(_, c)| c.to_string());
                    let class = match table {
                        Some(t) => {
                            let key = format!("{}/{}/class", img.image_ref, r.region_id);
                            Some(regionkit_core::forge::mine_class_negative(&r.category, t, derive_seed(seed, &key))?)
                        }
                        None => None,
                    };
                    Ok(MinedNegatives {
                        image_ref: img.image_ref.clone(),
                        region_id: r.region_id,
                        category: r.category.clone(),
                        spatial,
                        class,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_image {
        out.extend(r?);
    }
    out.sort_by(|a, b| (&a.image_ref, a.region_id).cmp(&(&b.image_ref, b.region_id)));
    Ok(out)
}

/// One mask to extract tokens for: image `k` of the feature container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub image: usize,
    #[serde(default)]
    pub id: Option<u32>,
    pub rle: RleMask,
}

/// Region tokens for each mask, in input order. Masks whose size differs from
/// the pyramid input are resized nearest-neighbour first.
pub fn extract_tokens(
    features: &TensorContainer,
    masks: &[MaskEntry],
    weights: &ExtractorWeights,
    mode: PoolingMode,
) -> Result<Vec<RegionTokens>> {
    let mut pyramids = BTreeMap::new();
    for m in masks {
        if let std::collections::btree_map::Entry::Vacant(e) = pyramids.entry(m.image) {
            let p = features
                .pyramid(m.image)
                .map_err(|e| Error::Invariant(format!("features: {e}")))?;
            e.insert(p);
        }
    }
    masks
        .par_iter()
        .map(|m| {
            let pyramid = &pyramids[&m.image];
            let (h, w) = pyramid.input_dims();
            let mut mask = m.rle.decode()?;
            if (mask.height(), mask.width()) != (h, w) {
                mask = resize_nearest(&mask, h, w)?;
            }
            Ok(extract_region_tokens(&mask, pyramid, weights, mode)?)
        })
        .collect()
}
