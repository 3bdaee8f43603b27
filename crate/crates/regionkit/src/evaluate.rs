//! File-level drivers for the metrics.

use std::collections::BTreeMap;

use regionkit_core::eval::{
    aggregate_judge, cider, judge_prompt, recognition_metrics, semantic_iou, semantic_similarity,
    vocab_match, EvalReport, LabeledSegments,
};
use regionkit_core::forge::ChatMessage;
use regionkit_core::EmbeddingTable;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::llm::LlmClient;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPair {
    pub pred: String,
    pub gt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionSample {
    pub candidate: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSample {
    pub question: String,
    pub prediction: String,
    pub reference: String,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn eval_ss(pairs: &[LabelPair], table: &EmbeddingTable) -> Result<EvalReport> {
    let scores = pairs
        .iter()
        .map(|p| Ok(semantic_similarity(&p.pred, &p.gt, table)?.score))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvalReport { samples: pairs.len(), ..Default::default() }.with_metric("ss", 100.0 * mean(&scores)))
}

pub fn eval_siou(pairs: &[LabelPair]) -> Result<EvalReport> {
    let scores = pairs
        .iter()
        .map(|p| Ok(semantic_iou(&p.pred, &p.gt)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvalReport { samples: pairs.len(), ..Default::default() }.with_metric("s_iou", 100.0 * mean(&scores)))
}

/// Maps each free-text prediction onto the vocabulary, then scores the
/// matched class: accuracy, SS and S-IoU against the ground truth.
pub fn eval_vocab(pairs: &[LabelPair], vocab: &[String], table: &EmbeddingTable) -> Result<EvalReport> {
    let mut hits = 0usize;
    let mut ss = Vec::with_capacity(pairs.len());
    let mut siou = Vec::with_capacity(pairs.len());
    let mut per_class: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in pairs {
        let class = &vocab[vocab_match(&p.pred, vocab, table)?];
        let hit = *class == p.gt;
        hits += usize::from(hit);
        let e = per_class.entry(p.gt.clone()).or_default();
        e.0 += usize::from(hit);
        e.1 += 1;
        ss.push(semantic_similarity(class, &p.gt, table)?.score);
        siou.push(semantic_iou(class, &p.gt)?);
    }
    let mut report = EvalReport { samples: pairs.len(), ..Default::default() }
        .with_metric("accuracy", 100.0 * hits as f64 / pairs.len().max(1) as f64)
        .with_metric("ss", 100.0 * mean(&ss))
        .with_metric("s_iou", 100.0 * mean(&siou));
    for (class, (h, n)) in per_class {
        report
            .per_class
            .insert(class, BTreeMap::from([("accuracy".to_string(), 100.0 * h as f64 / n as f64)]));
    }
    Ok(report)
}

/// CIDEr reported ×100, the usual caption-table convention.
pub fn eval_cider(samples: &[CaptionSample]) -> Result<EvalReport> {
    let cands: Vec<&str> = samples.iter().map(|s| s.candidate.as_str()).collect();
    let refs: Vec<Vec<&str>> = samples.iter().map(|s| s.references.iter().map(String::as_str).collect()).collect();
    let score = cider(&cands, &refs)?;
    Ok(EvalReport { samples: samples.len(), ..Default::default() }.with_metric("cider", 100.0 * score.mean))
}

pub fn eval_recognition(segs: &LabeledSegments) -> Result<EvalReport> {
    let m = recognition_metrics(segs)?;
    let mut report = EvalReport { samples: m.segments, ..Default::default() }
        .with_metric("pq", m.pq)
        .with_metric("miou", m.miou);
    for (class, c) in &m.per_class {
        let mut row = BTreeMap::new();
        row.insert("tp".to_string(), c.tp as f64);
        row.insert("fp".to_string(), c.fp as f64);
        row.insert("fn".to_string(), c.fn_ as f64);
        if c.union > 0 {
            row.insert("iou".to_string(), 100.0 * c.intersection as f64 / c.union as f64);
        }
        report.per_class.insert(class.clone(), row);
    }
    Ok(report)
}

/// Judge prompts keyed by sample index, for offline export.
pub fn judge_requests(samples: &[JudgeSample], template: &str) -> Vec<(String, Vec<ChatMessage>)> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let content = judge_prompt(template, &s.question, &s.prediction, &s.reference);
            (i.to_string(), vec![ChatMessage { role: "user".into(), content }])
        })
        .collect()
}

/// Scores from replies keyed by sample index; missing replies count as skipped.
pub fn judge_from_replies(samples: &[JudgeSample], replies: &BTreeMap<String, String>) -> Result<EvalReport> {
    let ordered: Vec<Option<&String>> = (0..samples.len()).map(|i| replies.get(&i.to_string())).collect();
    let out = aggregate_judge(&ordered)?;
    let mut report = EvalReport { samples: out.scored, skipped: out.skipped, ..Default::default() }
        .with_metric("judge_ratio", out.ratio);
    report.metrics.insert("mean_prediction_score".into(), out.mean_prediction);
    report.metrics.insert("mean_reference_score".into(), out.mean_reference);
    Ok(report)
}

pub fn judge_online(samples: &[JudgeSample], template: &str, client: &LlmClient) -> Result<EvalReport> {
    let replies: BTreeMap<String, String> = client
        .submit(&judge_requests(samples, template))
        .into_iter()
        .filter_map(|(id, r)| r.ok().map(|t| (id, t)))
        .collect();
    judge_from_replies(samples, &replies)
}
