//! Region-understanding metrics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::embedding::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::mask::RleMask;

/// Lowercased, punctuation-free, deduplicated words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordSet(BTreeSet<String>);

impl WordSet {
    pub fn new(text: &str) -> Self {
        Self(tokenize(text).into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Lowercases, turns everything but letters and digits into spaces and splits.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(String::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    /// Cosine clamped to `[0, 1]`.
    pub score: f64,
    pub raw_cosine: f64,
}

pub fn semantic_similarity(pred: &str, gt: &str, table: &EmbeddingTable) -> Result<Similarity> {
    let raw = cosine(table.vector(pred)?, table.vector(gt)?);
    Ok(Similarity {
        score: raw.clamp(0.0, 1.0),
        raw_cosine: raw,
    })
}

/// Word-set intersection over union.
pub fn semantic_iou(pred: &str, gt: &str) -> Result<f64> {
    let g = WordSet::new(gt);
    if g.is_empty() {
        return Err(Error::InvalidReference(String::from("empty ground truth")));
    }
    let p = WordSet::new(pred);
    let inter = p.0.intersection(&g.0).count();
    let union = p.0.union(&g.0).count();
    Ok(inter as f64 / union as f64)
}

/// Index of the vocabulary entry most cosine-similar to `response`; ties go to
/// the lowest index.
pub fn vocab_match<S: AsRef<str>>(response: &str, vocab: &[S], table: &EmbeddingTable) -> Result<usize> {
    if vocab.is_empty() {
        return Err(Error::InvalidReference(String::from("empty vocabulary")));
    }
    let r = table.vector(response)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, class) in vocab.iter().enumerate() {
        let s = cosine(r, table.vector(class.as_ref())?);
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

const CIDER_MAX_N: usize = 4;

type NgramCounts = BTreeMap<Vec<String>, f64>;

fn ngram_counts(tokens: &[String], n: usize) -> NgramCounts {
    let mut out = NgramCounts::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w.to_vec()).or_default() += 1.0;
        }
    }
    out
}

fn tfidf(counts: &NgramCounts, df: &BTreeMap<Vec<String>, f64>, log_n: f64) -> NgramCounts {
    counts
        .iter()
        .map(|(g, &tf)| {
            let d = df.get(g).copied().unwrap_or(0.0).max(1.0);
            (g.clone(), tf * (log_n - libm::log(d)))
        })
        .collect()
}

fn sparse_cosine(a: &NgramCounts, b: &NgramCounts) -> f64 {
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    let na = libm::sqrt(a.values().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.values().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScore {
    /// Mean over images.
    pub mean: f64,
    pub per_image: Vec<f64>,
}

/// CIDEr over n = 1..4.
///
/// Document frequency counts the images whose reference set contains an
/// n-gram. Per n, the candidate's TF-IDF vector is compared with each
/// reference vector and the cosines are averaged; the n scores are averaged
/// and scaled by 10.
pub fn cider<S: AsRef<str>, R: AsRef<str>>(candidates: &[S], references: &[Vec<R>]) -> Result<CiderScore> {
    if candidates.len() != references.len() {
        return Err(Error::InvalidCorpus(alloc::format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.len() < 2 {
        return Err(Error::InvalidCorpus(String::from(
            "at least two images are needed for document frequencies",
        )));
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::InvalidCorpus(alloc::format!("image {i} has no references")));
    }

    let cand_tokens: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c.as_ref())).collect();
    let ref_tokens: Vec<Vec<Vec<String>>> = references
        .iter()
        .map(|rs| rs.iter().map(|r| tokenize(r.as_ref())).collect())
        .collect();
    let log_n = libm::log(candidates.len() as f64);

    let mut per_image = alloc::vec![0.0; candidates.len()];
    for n in 1..=CIDER_MAX_N {
        let mut df: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        let ref_counts: Vec<Vec<NgramCounts>> = ref_tokens
            .iter()
            .map(|rs| rs.iter().map(|t| ngram_counts(t, n)).collect())
            .collect();
        for rs in &ref_counts {
            let seen: BTreeSet<&Vec<String>> = rs.iter().flat_map(|c| c.keys()).collect();
            for g in seen {
                *df.entry(g.clone()).or_default() += 1.0;
            }
        }
        for (i, rs) in ref_counts.iter().enumerate() {
            let c = tfidf(&ngram_counts(&cand_tokens[i], n), &df, log_n);
            let total: f64 = rs.iter().map(|r| sparse_cosine(&c, &tfidf(r, &df, log_n))).sum();
            per_image[i] += total / rs.len() as f64;
        }
    }
    for s in &mut per_image {
        *s *= 10.0 / CIDER_MAX_N as f64;
    }
    let mean = per_image.iter().sum::<f64>() / per_image.len() as f64;
    Ok(CiderScore { mean, per_image })
}

/// A ground-truth mask with its true and predicted category.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledSegment {
    pub mask: RleMask,
    pub gt: String,
    pub pred: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledImage {
    pub image_ref: String,
    pub segments: Vec<LabeledSegment>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledSegments {
    pub images: Vec<LabeledImage>,
    /// When non-empty every label must come from it.
    #[cfg_attr(feature = "serde", serde(default))]
    pub vocabulary: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassRecognition {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub intersection: u64,
    pub union: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecognitionMetrics {
    /// Percent.
    pub pq: f64,
    /// Percent.
    pub miou: f64,
    pub per_class: BTreeMap<String, ClassRecognition>,
    pub segments: usize,
}

/// PQ and mIoU when every segment is a ground-truth mask, so a correct label is
/// a match with IoU 1.
///
/// PQ per class is `TP / (TP + FP/2 + FN/2)` over classes with any segment
/// predicted or labeled as them; mIoU accumulates pixels over the whole set.
pub fn recognition_metrics(segs: &LabeledSegments) -> Result<RecognitionMetrics> {
    let vocab: BTreeSet<&str> = segs.vocabulary.iter().map(String::as_str).collect();
    let mut per_class: BTreeMap<String, ClassRecognition> = BTreeMap::new();
    let mut count = 0;
    for image in &segs.images {
        check_disjoint(image)?;
        for s in &image.segments {
            for label in [&s.gt, &s.pred] {
                if !vocab.is_empty() && !vocab.contains(label.as_str()) {
                    return Err(Error::UnknownLabel(label.clone()));
                }
            }
            let area = s.mask.area();
            count += 1;
            if s.gt == s.pred {
                let c = per_class.entry(s.gt.clone()).or_default();
                c.tp += 1;
                c.intersection += area;
                c.union += area;
            } else {
                let g = per_class.entry(s.gt.clone()).or_default();
                g.fn_ += 1;
                g.union += area;
                let p = per_class.entry(s.pred.clone()).or_default();
                p.fp += 1;
                p.union += area;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidCorpus(String::from("no segments")));
    }

    let mut pq = (0.0, 0usize);
    let mut iou = (0.0, 0usize);
    for c in per_class.values() {
        let denom = c.tp as f64 + 0.5 * (c.fp + c.fn_) as f64;
        if denom > 0.0 {
            pq.0 += c.tp as f64 / denom;
            pq.1 += 1;
        }
        if c.union > 0 {
            iou.0 += c.intersection as f64 / c.union as f64;
            iou.1 += 1;
        }
    }
    let mean = |(sum, n): (f64, usize)| if n == 0 { 0.0 } else { 100.0 * sum / n as f64 };
    Ok(RecognitionMetrics {
        pq: mean(pq),
        miou: mean(iou),
        per_class,
        segments: count,
    })
}

fn check_disjoint(image: &LabeledImage) -> Result<()> {
    let Some(first) = image.segments.first() else {
        return Ok(());
    };
    let (h, w) = (first.mask.height, first.mask.width);
    let mut taken = alloc::vec![false; h * w];
    for s in &image.segments {
        if (s.mask.height, s.mask.width) != (h, w) {
            return Err(Error::InvalidMask(alloc::format!(
                "{}: masks of size {h}x{w} and {}x{}",
                image.image_ref,
                s.mask.height,
                s.mask.width
            )));
        }
        s.mask.validate()?;
        // column-major runs index the same flat buffer for every mask
        let mut pos = 0usize;
        for (k, &run) in s.mask.counts.iter().enumerate() {
            let run = run as usize;
            if k % 2 == 1 {
                for t in &mut taken[pos..pos + run] {
                    if *t {
                        return Err(Error::OverlappingMasks {
                            image: image.image_ref.clone(),
                        });
                    }
                    *t = true;
                }
            }
            pos += run;
        }
    }
    Ok(())
}

/// Fills the judge template's `{question}`, `{prediction}` and `{reference}`.
pub fn judge_prompt(template: &str, question: &str, prediction: &str, reference: &str) -> String {
    template
        .replace("{question}", question)
        .replace("{prediction}", prediction)
        .replace("{reference}", reference)
}

/// The first two integers of a judge reply as `(prediction, reference)`
/// scores; `None` unless both exist and lie in 1..=10.
pub fn parse_judge_scores(reply: &str) -> Option<(u32, u32)> {
    let mut nums = reply
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u32>().ok());
    let a = nums.next()??;
    let b = nums.next()??;
    let ok = |v: u32| (1..=10).contains(&v);
    (ok(a) && ok(b)).then_some((a, b))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JudgeOutcome {
    /// `100 × mean(prediction) / mean(reference)` over scored samples.
    pub ratio: f64,
    pub scored: usize,
    pub skipped: usize,
    pub mean_prediction: f64,
    pub mean_reference: f64,
}

/// Aggregates judge replies; a missing or unparseable reply skips its sample.
pub fn aggregate_judge<S: AsRef<str>>(replies: &[Option<S>]) -> Result<JudgeOutcome> {
    let scores: Vec<(u32, u32)> = replies
        .iter()
        .filter_map(|r| r.as_ref().and_then(|r| parse_judge_scores(r.as_ref())))
        .collect();
    let skipped = replies.len() - scores.len();
    if scores.is_empty() {
        return Err(Error::JudgeFailure { skipped });
    }
    let n = scores.len() as f64;
    let mp = scores.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let mr = scores.iter().map(|s| s.1 as f64).sum::<f64>() / n;
    Ok(JudgeOutcome {
        ratio: 100.0 * mp / mr,
        scored: scores.len(),
        skipped,
        mean_prediction: mp,
        mean_reference: mr,
    })
}

/// Runs `judge` on one prompt per sample and aggregates.
pub fn gpt_judge<F>(
    template: &str,
    questions: &[String],
    predictions: &[String],
    references: &[String],
    mut judge: F,
) -> Result<JudgeOutcome>
where
    F: FnMut(&str) -> Option<String>,
{
    if predictions.len() != references.len() || questions.len() != predictions.len() {
        return Err(Error::InvalidReference(alloc::format!(
            "{} questions, {} predictions, {} references",
            questions.len(),
            predictions.len(),
            references.len()
        )));
    }
    let replies: Vec<Option<String>> = (0..predictions.len())
        .map(|i| judge(&judge_prompt(template, &questions[i], &predictions[i], &references[i])))
        .collect();
    aggregate_judge(&replies)
}

/// Metric name → percent value with an optional per-class breakdown.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub metrics: BTreeMap<String, f64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "BTreeMap::is_empty"))]
    pub per_class: BTreeMap<String, BTreeMap<String, f64>>,
    pub samples: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub skipped: usize,
}

impl EvalReport {
    pub fn with_metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    /// Finite values and at least one sample.
    pub fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidCorpus(String::from("report has no samples")));
        }
        let all = self
            .metrics
            .values()
            .chain(self.per_class.values().flat_map(|m| m.values()));
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCorpus(String::from("non-finite metric value")));
        }
        Ok(())
    }
}
