//! Action-detail schema, the action-program grammar and action-space sampling.

mod expr;
mod import;
mod sample;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;

pub use expr::{Axis, BinOp, Expr};
pub use import::import_action_code;
pub use sample::{
    evaluate_program, format_value, ground_action_detail, ground_with_bindings, instantiate_desc,
    sample_bindings, Bindings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSpaceType {
    #[serde(alias = "None")]
    None,
    #[serde(alias = "Unique")]
    Unique,
    #[serde(alias = "Discrete")]
    Discrete,
    #[serde(alias = "Continuous")]
    Continuous,
}

/// A value bound to an action parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(n) => f.write_str(&format_value(*n)),
            ParamValue::Text(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Click,
    LeftClick,
    MouseMove,
    Drag,
    TypeText,
}

impl PrimitiveKind {
    /// Action name used in `computer_use` tool calls.
    pub fn tool_action(self) -> &'static str {
        match self {
            PrimitiveKind::Click | PrimitiveKind::LeftClick => "left_click",
            PrimitiveKind::MouseMove => "mouse_move",
            PrimitiveKind::Drag => "left_click_drag",
            PrimitiveKind::TypeText => "type",
        }
    }

    pub fn from_tool_action(name: &str) -> Option<Self> {
        Some(match name {
            "left_click" | "click" => PrimitiveKind::LeftClick,
            "mouse_move" => PrimitiveKind::MouseMove,
            "left_click_drag" | "drag" => PrimitiveKind::Drag,
            "type" | "type_text" => PrimitiveKind::TypeText,
            _ => return None,
        })
    }
}

/// One primitive step. `to` is the drag end point; `text` the typed string,
/// which may contain `<param>` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub kind: PrimitiveKind,
    pub at: [Expr; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<[Expr; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionProgram {
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default)]
    pub anchors: BTreeMap<String, Point>,
    pub body: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDetail {
    #[serde(default)]
    pub thought_process: String,
    pub action_space_type: ActionSpaceType,
    pub action_desc: String,
    #[serde(default)]
    pub action_params: Vec<String>,
    #[serde(default)]
    pub action_discrete_values: Option<BTreeMap<String, Vec<ParamValue>>>,
    #[serde(default)]
    pub action_continuous_interval: Option<BTreeMap<String, Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_code: Option<String>,
    pub program: ActionProgram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingAction {
    pub kind: PrimitiveKind,
    pub coordinate: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub instantiated_instruction: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("[missing-discrete-values] no discrete value list for parameter `{0}`")]
    MissingDiscreteValues(String),
    #[error("[empty-discrete-values] discrete value list for `{0}` is empty")]
    EmptyDiscreteValues(String),
    #[error("[missing-interval] no continuous interval for parameter `{0}`")]
    MissingInterval(String),
    #[error("[inverted-interval] interval for `{0}` has lo > hi or non-finite bounds")]
    InvertedInterval(String),
    #[error("[params-not-allowed] {0:?} action spaces take no parameters")]
    ParamsNotAllowed(ActionSpaceType),
    #[error("[missing-params] {0:?} action spaces need at least one parameter")]
    MissingParams(ActionSpaceType),
    #[error("[placeholder-not-param] placeholder `<{0}>` is not a declared parameter")]
    PlaceholderNotParam(String),
    #[error("[empty-body] action program has no steps")]
    EmptyBody,
    #[error(
        "[program-params] program parameters {program:?} differ from action_params {declared:?}"
    )]
    ProgramParamMismatch {
        program: Vec<String>,
        declared: Vec<String>,
    },
    #[error("[free-variable] program references undeclared {kind} `{name}`")]
    FreeVariable { kind: &'static str, name: String },
    #[error("[step-shape] step {index}: {message}")]
    StepShape { index: usize, message: String },
    #[error("[schema] {path}: {message}")]
    Schema { path: String, message: String },
    #[error("[unsupported-code] {0}")]
    UnsupportedCode(String),
}

impl ValidationError {
    /// Short rule identifier, e.g. `missing-interval`.
    pub fn rule(&self) -> &'static str {
        match self {
            ValidationError::MissingDiscreteValues(_) => "missing-discrete-values",
            ValidationError::EmptyDiscreteValues(_) => "empty-discrete-values",
            ValidationError::MissingInterval(_) => "missing-interval",
            ValidationError::InvertedInterval(_) => "inverted-interval",
            ValidationError::ParamsNotAllowed(_) => "params-not-allowed",
            ValidationError::MissingParams(_) => "missing-params",
            ValidationError::PlaceholderNotParam(_) => "placeholder-not-param",
            ValidationError::EmptyBody => "empty-body",
            ValidationError::ProgramParamMismatch { .. } => "program-params",
            ValidationError::FreeVariable { .. } => "free-variable",
            ValidationError::StepShape { .. } => "step-shape",
            ValidationError::Schema { .. } => "schema",
            ValidationError::UnsupportedCode(_) => "unsupported-code",
        }
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<([A-Za-z_][A-Za-z0-9_]*)>").unwrap())
}

pub(crate) fn placeholders(text: &str) -> impl Iterator<Item = &str> {
    placeholder_re()
        .captures_iter(text)
        .map(|c| c.get(1).unwrap().as_str())
}

pub(crate) fn replace_placeholders(text: &str, bindings: &Bindings) -> String {
    placeholder_re()
        .replace_all(text, |c: &regex::Captures<'_>| match bindings.get(&c[1]) {
            Some(v) => v.to_string(),
            None => c[0].to_string(),
        })
        .into_owned()
}

/// Check every structural rule of an action detail; returns it unchanged
/// when all hold.
pub fn validate_action_detail(d: ActionDetail) -> Result<ActionDetail, ValidationError> {
    let params = &d.action_params;
    match d.action_space_type {
        ActionSpaceType::None | ActionSpaceType::Unique => {
            if !params.is_empty() {
                return Err(ValidationError::ParamsNotAllowed(d.action_space_type));
            }
        }
        ActionSpaceType::Discrete => {
            if params.is_empty() {
                return Err(ValidationError::MissingParams(d.action_space_type));
            }
            let table = d.action_discrete_values.as_ref();
            for p in params {
                match table.and_then(|t| t.get(p)) {
                    None => return Err(ValidationError::MissingDiscreteValues(p.clone())),
                    Some(v) if v.is_empty() => {
                        return Err(ValidationError::EmptyDiscreteValues(p.clone()))
                    }
                    Some(_) => {}
                }
            }
        }
        ActionSpaceType::Continuous => {
            if params.is_empty() {
                return Err(ValidationError::MissingParams(d.action_space_type));
            }
            let table = d.action_continuous_interval.as_ref();
            for p in params {
                let intervals = table
                    .and_then(|t| t.get(p))
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| ValidationError::MissingInterval(p.clone()))?;
                if intervals
                    .iter()
                    .any(|[lo, hi]| !lo.is_finite() || !hi.is_finite() || lo > hi)
                {
                    return Err(ValidationError::InvertedInterval(p.clone()));
                }
            }
        }
    }

    for ph in placeholders(&d.action_desc) {
        if !params.iter().any(|p| p == ph) {
            return Err(ValidationError::PlaceholderNotParam(ph.to_string()));
        }
    }

    validate_program(&d.program, params)?;
    Ok(d)
}

fn validate_program(p: &ActionProgram, declared: &[String]) -> Result<(), ValidationError> {
    if p.body.is_empty() {
        return Err(ValidationError::EmptyBody);
    }
    let prog: BTreeSet<&String> = p.params.iter().collect();
    let decl: BTreeSet<&String> = declared.iter().collect();
    if prog != decl {
        return Err(ValidationError::ProgramParamMismatch {
            program: p.params.clone(),
            declared: declared.to_vec(),
        });
    }
    let mut used_params = BTreeSet::new();
    let mut used_anchors = BTreeSet::new();
    for (index, step) in p.body.iter().enumerate() {
        for e in step.at.iter().chain(step.to.iter().flatten()) {
            e.free_variables(&mut used_params, &mut used_anchors);
        }
        match step.kind {
            PrimitiveKind::Drag if step.to.is_none() => {
                return Err(ValidationError::StepShape {
                    index,
                    message: "drag needs an end point".into(),
                })
            }
            PrimitiveKind::TypeText if step.text.is_none() => {
                return Err(ValidationError::StepShape {
                    index,
                    message: "type_text needs text".into(),
                })
            }
            _ => {}
        }
        if let Some(t) = &step.text {
            for ph in placeholders(t) {
                used_params.insert(ph.to_string());
            }
        }
    }
    if let Some(name) = used_params.iter().find(|n| !prog.contains(n)) {
        return Err(ValidationError::FreeVariable {
            kind: "parameter",
            name: name.clone(),
        });
    }
    if let Some(name) = used_anchors.iter().find(|n| !p.anchors.contains_key(*n)) {
        return Err(ValidationError::FreeVariable {
            kind: "anchor",
            name: name.clone(),
        });
    }
    Ok(())
}

/// Parse an action detail from provider or file JSON.
///
/// When `program` is absent but `action_code` is present, the code is run
/// through [`import_action_code`]. The result is validated.
pub fn parse_action_detail(json: &str) -> Result<ActionDetail, ValidationError> {
    let mut value: serde_json::Value =
        serde_json::from_str(json).map_err(|e| ValidationError::Schema {
            path: "$".into(),
            message: e.to_string(),
        })?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ValidationError::Schema {
            path: "$".into(),
            message: "expected an object".into(),
        })?;
    for field in ["action_space_type", "action_desc"] {
        if !obj.contains_key(field) {
            return Err(ValidationError::Schema {
                path: format!("$.{field}"),
                message: "missing field".into(),
            });
        }
    }
    if obj.get("program").is_none_or(|p| p.is_null()) {
        let code = obj
            .get("action_code")
            .and_then(|c| c.as_str())
            .ok_or_else(|| ValidationError::Schema {
                path: "$.program".into(),
                message: "neither program nor action_code present".into(),
            })?;
        let program = import_action_code(code)?;
        obj.insert(
            "program".into(),
            serde_json::to_value(program).expect("program serializes"),
        );
    }
    let detail: ActionDetail =
        serde_json::from_value(value).map_err(|e| ValidationError::Schema {
            path: "$".into(),
            message: e.to_string(),
        })?;
    validate_action_detail(detail)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SATURATION_JSON: &str = r#"{
        "thought_process": "The target element is a slider with a range from 0 to 100; interpolate between its endpoints.",
        "action_space_type": "continuous",
        "action_desc": "Set saturation to <saturation>%",
        "action_params": ["saturation"],
        "action_discrete_values": null,
        "action_continuous_interval": {"saturation": [[0.0, 100.0]]},
        "action_code": "def action(saturation):\n    x_0, y_0 = 600.5, 830  # Left endpoint\n    x_1, y_1 = 1064.5, 830  # Right endpoint\n    x = x_0 + (x_1 - x_0) * (saturation / 100)\n    pyautogui.click(x, y_0)"
    }"#;

    fn unique_click() -> ActionDetail {
        ActionDetail {
            thought_process: String::new(),
            action_space_type: ActionSpaceType::Unique,
            action_desc: "Click submit".into(),
            action_params: vec![],
            action_discrete_values: None,
            action_continuous_interval: None,
            action_code: None,
            program: ActionProgram {
                params: vec![],
                anchors: BTreeMap::new(),
                body: vec![Step {
                    kind: PrimitiveKind::Click,
                    at: [Expr::Num(50.0), Expr::Num(60.0)],
                    to: None,
                    text: None,
                }],
            },
        }
    }

    #[test]
    fn saturation_example_parses_and_validates() {
        let d = parse_action_detail(SATURATION_JSON).unwrap();
        assert_eq!(d.action_space_type, ActionSpaceType::Continuous);
        assert_eq!(
            d.action_continuous_interval.unwrap()["saturation"],
            vec![[0.0, 100.0]]
        );
        assert_eq!(d.program.params, vec!["saturation"]);
    }

    #[test]
    fn minimal_unique_detail_is_valid() {
        assert!(validate_action_detail(unique_click()).is_ok());
    }

    #[test]
    fn continuous_without_interval_is_rejected() {
        let mut d = parse_action_detail(SATURATION_JSON).unwrap();
        d.action_continuous_interval = Some(BTreeMap::new());
        assert_eq!(
            validate_action_detail(d).unwrap_err().rule(),
            "missing-interval"
        );
    }

    #[test]
    fn each_rule_is_reported_distinctly() {
        let mut d = parse_action_detail(SATURATION_JSON).unwrap();
        d.action_continuous_interval =
            Some(BTreeMap::from([("saturation".into(), vec![[5.0, 1.0]])]));
        assert_eq!(
            validate_action_detail(d).unwrap_err().rule(),
            "inverted-interval"
        );

        let mut d = unique_click();
        d.action_desc = "Click <thing>".into();
        assert_eq!(
            validate_action_detail(d).unwrap_err().rule(),
            "placeholder-not-param"
        );

        let mut d = unique_click();
        d.program.body.clear();
        assert_eq!(validate_action_detail(d).unwrap_err().rule(), "empty-body");

        let mut d = unique_click();
        d.action_params = vec!["v".into()];
        assert_eq!(
            validate_action_detail(d).unwrap_err().rule(),
            "params-not-allowed"
        );

        let mut d = unique_click();
        d.program.body[0].at[0] = Expr::parse("ghost.x").unwrap();
        assert_eq!(
            validate_action_detail(d).unwrap_err().rule(),
            "free-variable"
        );

        let mut d = unique_click();
        d.action_space_type = ActionSpaceType::Discrete;
        assert_eq!(
            validate_action_detail(d).unwrap_err().rule(),
            "missing-params"
        );

        let mut d = unique_click();
        d.program.body[0].kind = PrimitiveKind::Drag;
        assert_eq!(validate_action_detail(d).unwrap_err().rule(), "step-shape");
    }

    #[test]
    fn missing_space_type_is_a_schema_error() {
        let json = SATURATION_JSON.replace("\"action_space_type\": \"continuous\",", "");
        let err = parse_action_detail(&json).unwrap_err();
        assert_eq!(err.rule(), "schema");
        assert!(err.to_string().contains("action_space_type"));
    }

    #[test]
    fn serialized_detail_round_trips() {
        let d = parse_action_detail(SATURATION_JSON).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(parse_action_detail(&text).unwrap(), d);
    }
}
