//! Command-line interface.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use regionkit_core::eval::{EvalReport, LabeledSegments};
use regionkit_core::extractor::ExtractorWeights;
use regionkit_core::forge::templates::DEFAULT_JUDGE_TEMPLATE;
use regionkit_core::forge::{validate_dataset, InstructionRecord};
use regionkit_core::EmbeddingTable;

use crate::annotations::{load_descriptions, load_ref_captions, load_regions, read_json, CocoFile, ImageRegions};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluate::{self, CaptionSample, JudgeSample, LabelPair};
use crate::llm::{self, LlmClient, ResponseEntry};
use crate::manifest::Run;
use crate::ospt::TensorContainer;
use crate::pipeline::{self, MaskEntry, PlannedJob};
use crate::{jsonl, ospe};

#[derive(Debug, Parser)]
#[command(name = "regionkit", version, about = "Region-level instruction data, token extraction and metrics")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Config override, `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory; runs go into stamped subdirectories.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, short = 'j', global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build prompt jobs, ingest available replies, add yes/no records, validate.
    Forge,
    /// Offline LLM batches.
    #[command(subcommand)]
    Prompts(PromptsCommand),
    /// Spatial and class negatives per region.
    Mine,
    /// Mask and spatial tokens from a feature container and masks.
    Extract {
        /// Masks JSON-Lines; overrides `paths.masks`.
        #[arg(long)]
        masks: Option<PathBuf>,
    },
    /// Compute a metric.
    Eval(EvalArgs),
    /// Check an instruction-record file.
    Validate {
        #[arg(long)]
        records: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum PromptsCommand {
    /// Write the prompt-batch file.
    Export,
    /// Turn a response file into records.
    Ingest {
        /// Overrides `paths.responses`.
        #[arg(long)]
        responses: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Ss,
    Siou,
    Vocab,
    Cider,
    Recognition,
    Judge,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub metric: Metric,
    /// JSON-Lines samples (JSON for `recognition`).
    #[arg(long)]
    pub input: PathBuf,
    /// Vocabulary, one class per line (`vocab`; default: every embedded label).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Judge replies keyed by sample index (`judge`, offline).
    #[arg(long)]
    pub replies: Option<PathBuf>,
    /// Judge prompt template with `{question}`, `{prediction}`, `{reference}`.
    #[arg(long)]
    pub template: Option<PathBuf>,
}

/// Where a finished command wrote its artifacts and whether every hard
/// invariant held.
#[derive(Debug)]
pub struct Outcome {
    pub run_dir: PathBuf,
    pub passed: bool,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.paths.output_dir = out.clone();
    }
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = pipeline::thread_pool(workers.max(1))?;
    pool.install(|| match cli.command {
        Command::Forge => forge(&cfg),
        Command::Prompts(PromptsCommand::Export) => prompts_export(&cfg),
        Command::Prompts(PromptsCommand::Ingest { responses }) => prompts_ingest(&cfg, responses),
        Command::Mine => mine(&cfg),
        Command::Extract { masks } => extract(&cfg, masks),
        Command::Eval(args) => eval(&cfg, &args),
        Command::Validate { records } => validate(&cfg, &records),
    })
}

struct Inputs {
    images: Vec<ImageRegions>,
    descriptions: HashMap<String, String>,
    table: Option<EmbeddingTable>,
    files: Vec<(&'static str, PathBuf)>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let ann = cfg.require("annotations", &cfg.paths.annotations)?;
    let mut files = vec![("annotations", ann.clone())];
    let captions = match &cfg.paths.refs {
        Some(_) => {
            let p = cfg.require("refs", &cfg.paths.refs)?;
            files.push(("refs", p.clone()));
            load_ref_captions(&p)?
        }
        None => HashMap::new(),
    };
    let descriptions = match &cfg.paths.descriptions {
        Some(_) => {
            let p = cfg.require("descriptions", &cfg.paths.descriptions)?;
            files.push(("descriptions", p.clone()));
            load_descriptions(&p)?
        }
        None => HashMap::new(),
    };
    let table = match &cfg.paths.embeddings {
        Some(_) => {
            let p = cfg.require("embeddings", &cfg.paths.embeddings)?;
            files.push(("embeddings", p.clone()));
            Some(ospe::read(&p)?)
        }
        None => None,
    };
    let coco: CocoFile = read_json(&ann)?;
    let images = load_regions(&coco, &captions, &ann)?;
    info!("loaded {} images with regions", images.len());
    Ok(Inputs { images, descriptions, table, files })
}

fn start(cfg: &RunConfig, command: &str, files: &[(&str, PathBuf)], seeds: &[(&str, u64)]) -> Result<Run> {
    let refs: Vec<(&str, &Path)> = files.iter().map(|(r, p)| (*r, p.as_path())).collect();
    Run::start(cfg, command, &refs, seeds)
}

fn finish(run: Run, passed: bool) -> Result<Outcome> {
    let run_dir = run.finish()?;
    Ok(Outcome { run_dir, passed })
}

fn write_jsonl<T: serde::Serialize>(run: &mut Run, name: &str, items: &[T]) -> Result<()> {
    run.write(name, jsonl::to_string(items).as_bytes()).map(|_| ())
}

fn obtain_responses(
    cfg: &RunConfig,
    jobs: &[PlannedJob],
    explicit: Option<PathBuf>,
    files: &mut Vec<(&'static str, PathBuf)>,
) -> Result<Option<(BTreeMap<String, String>, Vec<ResponseEntry>)>> {
    let known: BTreeSet<String> = jobs.iter().map(|j| j.job.job_id.clone()).collect();
    if explicit.is_some() || cfg.paths.responses.is_some() {
        let p = match explicit {
            Some(p) if p.exists() => p,
            Some(p) => return Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"))),
            None => cfg.require("responses", &cfg.paths.responses)?,
        };
        files.push(("responses", p.clone()));
        return Ok(Some((llm::read_responses(&p, &known)?, Vec::new())));
    }
    if cfg.llm.offline {
        return Ok(None);
    }
    let client = LlmClient::new(cfg.llm.client.clone());
    let jobs: Vec<_> = jobs.iter().map(|j| j.job.clone()).collect();
    let entries = client.submit_jobs(&jobs);
    let replies = entries
        .iter()
        .filter_map(|e| e.response.clone().map(|r| (e.job_id.clone(), r)))
        .collect();
    Ok(Some((replies, entries)))
}

fn forge(cfg: &RunConfig) -> Result<Outcome> {
    let mut inputs = load_inputs(cfg)?;
    let (jobs, plan_failures) = pipeline::plan_jobs(&inputs.images, &inputs.descriptions, cfg);
    let responses = obtain_responses(cfg, &jobs, None, &mut inputs.files)?;
    let mut run = start(cfg, "forge", &inputs.files, &[("forge", cfg.seeds.forge)])?;

    let batch = llm::batch_entries(&jobs.iter().map(|j| j.job.clone()).collect::<Vec<_>>(), &cfg.llm.client.model);
    write_jsonl(&mut run, "prompts.jsonl", &batch)?;
    let (replies, fresh) = responses.unwrap_or_default();
    if !fresh.is_empty() {
        write_jsonl(&mut run, "responses.jsonl", &fresh)?;
    }
    // without any replies only the yes/no records can be produced
    let ingest_jobs: &[PlannedJob] = if replies.is_empty() && fresh.is_empty() { &[] } else { &jobs };
    let mut out = pipeline::forge_records(&inputs.images, ingest_jobs, &replies, inputs.table.as_ref(), cfg)?;
    out.failures.extend(plan_failures);
    out.failures.sort();
    write_jsonl(&mut run, "records.jsonl", &out.records)?;
    run.write_json("failures.json", &out.failures)?;
    run.write_json("report.json", &out.report)?;
    info!("{} records, {} failures", out.records.len(), out.failures.len());
    finish(run, out.report.passed)
}

fn prompts_export(cfg: &RunConfig) -> Result<Outcome> {
    let inputs = load_inputs(cfg)?;
    let (jobs, failures) = pipeline::plan_jobs(&inputs.images, &inputs.descriptions, cfg);
    let mut run = start(cfg, "prompts-export", &inputs.files, &[("forge", cfg.seeds.forge)])?;
    let batch = llm::batch_entries(&jobs.iter().map(|j| j.job.clone()).collect::<Vec<_>>(), &cfg.llm.client.model);
    write_jsonl(&mut run, "prompts.jsonl", &batch)?;
    run.write_json("failures.json", &failures)?;
    finish(run, true)
}

fn prompts_ingest(cfg: &RunConfig, responses: Option<PathBuf>) -> Result<Outcome> {
    if responses.is_none() && cfg.paths.responses.is_none() {
        return Err(Error::Config("prompts ingest needs --responses or paths.responses".into()));
    }
    let mut inputs = load_inputs(cfg)?;
    let (jobs, _) = pipeline::plan_jobs(&inputs.images, &inputs.descriptions, cfg);
    let (replies, _) = obtain_responses(cfg, &jobs, responses, &mut inputs.files)?.unwrap_or_default();
    let mut run = start(cfg, "prompts-ingest", &inputs.files, &[("forge", cfg.seeds.forge)])?;
    let mut no_yes_no = cfg.clone();
    no_yes_no.forge.yes_no = false;
    let out = pipeline::forge_records(&inputs.images, &jobs, &replies, None, &no_yes_no)?;
    write_jsonl(&mut run, "records.jsonl", &out.records)?;
    run.write_json("failures.json", &out.failures)?;
    run.write_json("report.json", &out.report)?;
    finish(run, out.report.passed)
}

fn mine(cfg: &RunConfig) -> Result<Outcome> {
    let inputs = load_inputs(cfg)?;
    let mined = pipeline::mine_negatives(&inputs.images, inputs.table.as_ref(), cfg.seeds.mine)?;
    let mut run = start(cfg, "mine", &inputs.files, &[("mine", cfg.seeds.mine)])?;
    write_jsonl(&mut run, "negatives.jsonl", &mined)?;
    finish(run, true)
}

fn extract(cfg: &RunConfig, masks: Option<PathBuf>) -> Result<Outcome> {
    let features_path = cfg.require("features", &cfg.paths.features)?;
    let masks_path = match masks {
        Some(p) => cfg.require("masks", &Some(p))?,
        None => cfg.require("masks", &cfg.paths.masks)?,
    };
    let mut files = vec![("features", features_path.clone()), ("masks", masks_path.clone())];
    let features = TensorContainer::read(&features_path)?;
    let entries: Vec<MaskEntry> = jsonl::read(&masks_path)?;
    let weights = match &cfg.paths.weights {
        Some(_) => {
            let p = cfg.require("weights", &cfg.paths.weights)?;
            files.push(("weights", p.clone()));
            TensorContainer::read(&p)?.weights().map_err(|m| Error::format(&p, m))?
        }
        None => {
            let first = entries.first().map_or(0, |m| m.image);
            let pyramid = features.pyramid(first).map_err(|m| Error::format(&features_path, m))?;
            ExtractorWeights::init(cfg.seeds.extract, cfg.extractor_dims(pyramid.channels()))?
        }
    };
    let tokens = pipeline::extract_tokens(&features, &entries, &weights, cfg.forge.pooling.into())?;
    let mut run = start(cfg, "extract", &files, &[("extract", cfg.seeds.extract)])?;
    run.write("tokens.ospt", &TensorContainer::from_tokens(&tokens)?.to_bytes())?;
    let index: Vec<serde_json::Value> = entries
        .iter()
        .enumerate()
        .map(|(k, m)| serde_json::json!({ "region": k, "image": m.image, "id": m.id }))
        .collect();
    write_jsonl(&mut run, "regions.jsonl", &index)?;
    finish(run, true)
}

fn eval(cfg: &RunConfig, args: &EvalArgs) -> Result<Outcome> {
    let mut files = vec![("input", args.input.clone())];
    if !args.input.exists() {
        return Err(Error::io(&args.input, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    let mut table = || -> Result<EmbeddingTable> {
        let p = cfg.require("embeddings", &cfg.paths.embeddings)?;
        files.push(("embeddings", p.clone()));
        ospe::read(&p)
    };
    let (name, report): (&str, EvalReport) = match args.metric {
        Metric::Ss => ("ss", evaluate::eval_ss(&jsonl::read::<LabelPair>(&args.input)?, &table()?)?),
        Metric::Siou => ("siou", evaluate::eval_siou(&jsonl::read::<LabelPair>(&args.input)?)?),
        Metric::Vocab => {
            let t = table()?;
            let vocab: Vec<String> = match &args.vocab {
                Some(p) => std::fs::read_to_string(p)
                    .map_err(|e| Error::io(p, e))?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect(),
                None => t.labels().to_vec(),
            };
            if let Some(p) = &args.vocab {
                files.push(("vocab", p.clone()));
            }
            ("vocab", evaluate::eval_vocab(&jsonl::read::<LabelPair>(&args.input)?, &vocab, &t)?)
        }
        Metric::Cider => ("cider", evaluate::eval_cider(&jsonl::read::<CaptionSample>(&args.input)?)?),
        Metric::Recognition => ("recognition", evaluate::eval_recognition(&read_json::<LabeledSegments>(&args.input)?)?),
        Metric::Judge => {
            let samples: Vec<JudgeSample> = jsonl::read(&args.input)?;
            let template = match &args.template {
                Some(p) => {
                    files.push(("template", p.clone()));
                    std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?
                }
                None => DEFAULT_JUDGE_TEMPLATE.to_string(),
            };
            if let Some(p) = &args.replies {
                files.push(("replies", p.clone()));
                let known: BTreeSet<String> = (0..samples.len()).map(|i| i.to_string()).collect();
                let replies = llm::read_responses(p, &known)?;
                ("judge", evaluate::judge_from_replies(&samples, &replies)?)
            } else if cfg.llm.offline {
                let mut run = start(cfg, "eval-judge-export", &files, &[])?;
                let batch: Vec<llm::BatchEntry> = evaluate::judge_requests(&samples, &template)
                    .into_iter()
                    .map(|(job_id, messages)| llm::BatchEntry { job_id, model: cfg.llm.client.model.clone(), messages })
                    .collect();
                write_jsonl(&mut run, "judge_prompts.jsonl", &batch)?;
                return finish(run, true);
            } else {
                let client = LlmClient::new(cfg.llm.client.clone());
                ("judge", evaluate::judge_online(&samples, &template, &client)?)
            }
        }
    };
    report.check()?;
    let mut run = start(cfg, &format!("eval-{name}"), &files, &[])?;
    run.write_json("report.json", &report)?;
    for (k, v) in &report.metrics {
        println!("{k}\t{v:.4}");
    }
    finish(run, true)
}

fn validate(cfg: &RunConfig, records_path: &Path) -> Result<Outcome> {
    if !records_path.exists() {
        return Err(Error::io(records_path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    let records: Vec<InstructionRecord> = jsonl::read(records_path)?;
    let report = validate_dataset(&records);
    let mut run = start(cfg, "validate", &[("records", records_path.to_path_buf())], &[])?;
    run.write_json("report.json", &report)?;
    finish(run, report.passed)
}
