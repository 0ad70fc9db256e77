use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::tool_call_arguments;
use crate::geometry::{ImageDims, Point};
use crate::provider::extract_json;

/// Coordinate frame a prediction is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    #[default]
    Native,
    Resized,
}

impl std::str::FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "native" => Ok(Frame::Native),
            "resized" => Ok(Frame::Resized),
            other => Err(format!(
                "unknown frame `{other}` (expected native or resized)"
            )),
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Point {
        point: Point,
        frame: Option<ImageDims>,
    },
    Refusal,
    Unparsable(String),
}

impl Prediction {
    pub fn kind(&self) -> &'static str {
        match self {
            Prediction::Point { .. } => "point",
            Prediction::Refusal => "refusal",
            Prediction::Unparsable(_) => "unparsable",
        }
    }
}

static CALL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z_][\w.]*\(\s*(?:x\s*=\s*)?(-?\d+(?:\.\d+)?)\s*,\s*(?:y\s*=\s*)?(-?\d+(?:\.\d+)?)\s*[,)]")
        .expect("static pattern")
});

pub const DEFAULT_REFUSAL_PATTERNS: [&str; 3] = ["not present", "cannot be found", "infeasible"];

/// Prediction parser with a configurable list of refusal patterns
/// (case-insensitive regular expressions).
#[derive(Debug, Clone)]
pub struct PredictionParser {
    refusal: Vec<Regex>,
}

impl Default for PredictionParser {
    fn default() -> Self {
        Self::new(DEFAULT_REFUSAL_PATTERNS).expect("default patterns compile")
    }
}

fn xy(v: &Value) -> Option<Point> {
    let a = v.as_array()?;
    let p = Point::new(a.first()?.as_f64()?, a.get(1)?.as_f64()?);
    p.is_finite().then_some(p)
}

fn json_coordinate(raw: &str) -> Option<Point> {
    if let Some(args) = tool_call_arguments(raw) {
        if let Some(p) = args.get("coordinate").and_then(xy) {
            return Some(p);
        }
    }
    let v: Value = serde_json::from_str(&extract_json(raw)?).ok()?;
    v.pointer("/arguments/coordinate")
        .or_else(|| v.get("coordinate"))
        .and_then(xy)
}

impl PredictionParser {
    pub fn new<S: AsRef<str>>(patterns: impl IntoIterator<Item = S>) -> Result<Self, regex::Error> {
        let refusal = patterns
            .into_iter()
            .map(|p| Regex::new(&format!("(?i){}", p.as_ref())))
            .collect::<Result<_, _>>()?;
        Ok(PredictionParser { refusal })
    }

    /// Tool-call JSON first, then `name(x, y)` calls, then refusal phrases.
    pub fn parse(&self, raw: &str) -> Prediction {
        if let Some(p) = json_coordinate(raw) {
            return Prediction::Point {
                point: p,
                frame: None,
            };
        }
        if let Some(c) = CALL.captures(raw) {
            let p = Point::new(
                c[1].parse().unwrap_or(f64::NAN),
                c[2].parse().unwrap_or(f64::NAN),
            );
            if p.is_finite() {
                return Prediction::Point {
                    point: p,
                    frame: None,
                };
            }
        }
        if self.refusal.iter().any(|r| r.is_match(raw)) {
            return Prediction::Refusal;
        }
        Prediction::Unparsable(raw.to_string())
    }
}

static DEFAULT: LazyLock<PredictionParser> = LazyLock::new(PredictionParser::default);

pub fn parse_prediction(raw: &str) -> Prediction {
    DEFAULT.parse(raw)
}
