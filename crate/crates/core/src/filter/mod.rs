//! Quality gates for synthesized instructions: keyword rules, crop
//! statistics and provider-backed reviews.

mod llm;
mod rules;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use llm::{
    llm_instruction_filter, llm_visual_filter, parse_verdict, VerdictKind, VisualInputs,
};
pub use rules::{rule_filter, rule_filter_with, RuleConfig, RULE_IDS};
pub use stats::{
    crop_stats_for, crop_visual_stats, crop_visual_stats_with, CropStats, EDGE_CUTOFF,
};

/// Outcome of one filter stage. `rule_id` is set exactly when the sample is dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub keep: bool,
    pub rule_id: Option<String>,
    pub reason: String,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict {
            keep: true,
            rule_id: None,
            reason: String::new(),
        }
    }

    pub fn drop(rule_id: impl Into<String>, reason: impl Into<String>) -> Self {
        Verdict {
            keep: false,
            rule_id: Some(rule_id.into()),
            reason: reason.into(),
        }
    }
}

/// One line of the JSONL filter report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportLine {
    pub id: String,
    pub keep: bool,
    pub rule_id: Option<String>,
    pub reason: String,
}

impl ReportLine {
    pub fn new(id: impl Into<String>, v: Verdict) -> Self {
        ReportLine {
            id: id.into(),
            keep: v.keep,
            rule_id: v.rule_id,
            reason: v.reason,
        }
    }
}

/// Drop counts keyed by rule id.
pub fn drop_counts<'a>(lines: impl IntoIterator<Item = &'a ReportLine>) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for l in lines {
        if let Some(r) = &l.rule_id {
            *out.entry(r.clone()).or_insert(0) += 1;
        }
    }
    out
}
