use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{CropStats, Verdict};

pub const RULE_IDS: [&str; 7] = ["R1", "R2", "R3", "R4", "R5", "R6", "R7"];

/// Thresholds for the low-complexity textual-element rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub max_color_variance: f64,
    pub max_edge_density: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            max_color_variance: 0.01,
            max_edge_density: 0.05,
        }
    }
}

fn re(pattern: &str) -> Regex {
    Regex::new(&format!("(?i){pattern}")).expect("static pattern")
}

static COORDS: LazyLock<Regex> =
    LazyLock::new(|| re(r"\(\s*-?\d+(?:\.\d+)?\s*,\s*-?\d+(?:\.\d+)?\s*\)"));
static STRUCTURAL: LazyLock<Regex> =
    LazyLock::new(|| re(r"\b(?:child(?:ren)?|parents?|paths?|containers?)\b"));
static CARD: LazyLock<Regex> = LazyLock::new(|| re(r"\bcards?\b"));
static SPATIAL: LazyLock<Regex> = LazyLock::new(|| re(r"\b(?:in|within|at)\b"));
static DIRECTION: LazyLock<Regex> =
    LazyLock::new(|| re(r"\b(?:(?:top|bottom)-(?:left|right)|top|bottom|left|right|corners?)\b"));
static SCREEN: LazyLock<Regex> = LazyLock::new(|| re(r"\bscreens?\b"));
static ANNOTATION: LazyLock<Regex> =
    LazyLock::new(|| re(r"\b(?:dots?|circles?|circled|highlight(?:s|ed|ing)?)\b"));
static TEXTUAL: LazyLock<Regex> = LazyLock::new(|| re(r"\b(?:texts?|labels?|headings?)\b"));
static TEXT_VERB: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:read(?:s|ing)?|hover(?:s|ing)?|click(?:s|ing)?|interact(?:s|ing)?)\b")
});
static SLIDER: LazyLock<Regex> = LazyLock::new(|| re(r"\bsliders?\b"));
static SLIDER_VERB: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(?:interact|click|drag|move|adjust|set|slide|change|use|select|hover)(?:s|ed|ing)?\b")
});
static DIGIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d").expect("static pattern"));

/// Rules R1-R7 with default thresholds.
pub fn rule_filter(instruction: &str, ui_type: Option<&str>, stats: Option<&CropStats>) -> Verdict {
    rule_filter_with(&RuleConfig::default(), instruction, ui_type, stats)
}

/// Apply R1-R7 in order; the first matching rule drops the instruction.
pub fn rule_filter_with(
    cfg: &RuleConfig,
    instruction: &str,
    ui_type: Option<&str>,
    stats: Option<&CropStats>,
) -> Verdict {
    let s = instruction;
    if let Some(m) = COORDS.find(s) {
        return Verdict::drop("R1", format!("explicit coordinates `{}`", m.as_str()));
    }
    if let Some(m) = STRUCTURAL.find(s) {
        return Verdict::drop("R2", format!("structural term `{}`", m.as_str()));
    }
    if CARD.is_match(s) && !SPATIAL.is_match(s) {
        return Verdict::drop("R3", "card mentioned without a spatial qualifier");
    }
    if let (Some(d), true) = (DIRECTION.find(s), SCREEN.is_match(s)) {
        return Verdict::drop("R4", format!("screen-relative direction `{}`", d.as_str()));
    }
    if let Some(m) = ANNOTATION.find(s) {
        return Verdict::drop(
            "R5",
            format!("refers to an annotation mark `{}`", m.as_str()),
        );
    }
    if let Some(st) = stats {
        let textual = TEXTUAL.is_match(s) || ui_type.is_some_and(|t| TEXTUAL.is_match(t));
        if textual
            && TEXT_VERB.is_match(s)
            && st.color_variance < cfg.max_color_variance
            && st.edge_density < cfg.max_edge_density
        {
            return Verdict::drop(
                "R6",
                format!(
                    "textual target over a featureless crop (variance {:.4}, edge density {:.4})",
                    st.color_variance, st.edge_density
                ),
            );
        }
    }
    if SLIDER.is_match(s) && SLIDER_VERB.is_match(s) && !DIGIT.is_match(s) {
        return Verdict::drop("R7", "slider interaction without a target value");
    }
    Verdict::pass()
}
