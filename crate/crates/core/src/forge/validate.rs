//! Whole-dataset checks and statistics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::negatives::record_polarity;
use super::{InstructionRecord, Task};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct YesNoBalance {
    pub positive: usize,
    pub negative: usize,
    /// Yes/no records whose answer is neither affirmative nor negative.
    pub unrecognized: usize,
    pub balanced: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RleValidity {
    pub checked: usize,
    pub valid: usize,
    /// `valid / checked`, 1.0 when nothing was checked.
    pub rate: f64,
}

/// A hard-check violation, tied to the record it was found in.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub record: usize,
    pub image_ref: String,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetReport {
    pub total: usize,
    /// Record count per task name; every task is listed.
    pub per_task: BTreeMap<String, usize>,
    pub yes_no: YesNoBalance,
    pub rle: RleValidity,
    pub dangling_regions: usize,
    pub malformed_conversations: usize,
    pub failures: Vec<Violation>,
    /// True iff no hard invariant is violated.
    pub passed: bool,
}

impl DatasetReport {
    /// Fraction of records per task.
    pub fn proportions(&self) -> BTreeMap<String, f64> {
        self.per_task
            .iter()
            .map(|(k, &v)| {
                let p = if self.total == 0 { 0.0 } else { v as f64 / self.total as f64 };
                (k.clone(), p)
            })
            .collect()
    }
}

/// Checks every record and gathers statistics.
///
/// Hard checks: valid masks and region fields, well-formed conversations,
/// bindings that resolve to the record's regions, recognizable yes/no answers
/// and an exactly balanced yes/no set.
pub fn validate_dataset(records: &[InstructionRecord]) -> DatasetReport {
    let mut report = DatasetReport {
        total: records.len(),
        per_task: Task::ALL.iter().map(|t| (t.as_str().to_string(), 0)).collect(),
        ..Default::default()
    };
    let fail = |report: &mut DatasetReport, i: usize, rec: &InstructionRecord, kind: &str, detail: String| {
        report.failures.push(Violation {
            record: i,
            image_ref: rec.image_ref.clone(),
            kind: kind.to_string(),
            detail,
        });
    };

    for (i, rec) in records.iter().enumerate() {
        *report.per_task.entry(rec.task.as_str().to_string()).or_default() += 1;

        for region in &rec.regions {
            report.rle.checked += 1;
            match region.mask.validate() {
                Ok(()) => report.rle.valid += 1,
                Err(e) => fail(&mut report, i, rec, "rle", alloc::format!("region {}: {e}", region.region_id)),
            }
            if let Err(e) = region.validate() {
                if region.mask.validate().is_ok() {
                    fail(&mut report, i, rec, "region", e.to_string());
                }
            }
        }

        if let Err(e) = rec.conversation.validate() {
            report.malformed_conversations += 1;
            fail(&mut report, i, rec, "conversation", e.to_string());
        }

        for id in rec.conversation.region_ids() {
            if !rec.regions.iter().any(|r| r.region_id == id) {
                report.dangling_regions += 1;
                fail(&mut report, i, rec, "dangling_region", alloc::format!("region id {id} is not listed"));
            }
        }

        if rec.task == Task::YesNo {
            match record_polarity(rec) {
                Some(true) => report.yes_no.positive += 1,
                Some(false) => report.yes_no.negative += 1,
                None => {
                    report.yes_no.unrecognized += 1;
                    fail(&mut report, i, rec, "yes_no", "answer is neither yes nor no".to_string());
                }
            }
        }
    }

    report.rle.rate = if report.rle.checked == 0 {
        1.0
    } else {
        report.rle.valid as f64 / report.rle.checked as f64
    };
    report.yes_no.balanced = report.yes_no.positive == report.yes_no.negative;
    report.passed = report.failures.is_empty() && report.yes_no.balanced;
    report
}
