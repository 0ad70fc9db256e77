//! Provider-backed generation stages: action intents, action details and
//! element annotations.

use std::path::PathBuf;

use serde::Deserialize;

use super::{Client, CompletionRequest, ImageRef, Mark};
use crate::action::{parse_action_detail, ActionDetail, ActionSpaceType, ValidationError};
use crate::element::{ElementAnnotation, ElementNode, ElementTree};
use crate::error::{Error, Result};
use crate::geometry::{crop_regions, BoundingBox, ImageDims};

const INTENTS: &str = include_str!("../../templates/action_intents.v1.txt");
const DETAIL: &str = include_str!("../../templates/action_detail.v1.txt");
const ANNOTATION: &str = include_str!("../../templates/element_annotation.v1.txt");
const ELEMENT_ACTION: &str = include_str!("../../templates/element_action.v1.txt");
const CONTINUOUS: &str = include_str!("../../templates/continuous_detection.v1.txt");

/// Context padding around an element crop, in pixels.
pub const CONTEXT_PAD: f64 = 48.0;

pub(crate) fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out: String = template
        .lines()
        .filter(|l| !l.starts_with("# template:"))
        .collect::<Vec<_>>()
        .join("\n");
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Single repair pass over a structured response: drop code fences and any
/// prose around the outermost JSON value.
pub fn extract_json(raw: &str) -> Option<String> {
    let mut body = raw.trim();
    if let Some(start) = body.find("```") {
        let after = &body[start + 3..];
        let after = after.split_once('\n').map_or(after, |(lang, rest)| {
            if lang.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
                rest
            } else {
                after
            }
        });
        body = after.split("```").next().unwrap_or(after).trim();
    }
    let open = body.find(['[', '{'])?;
    let close_char = if body.as_bytes()[open] == b'[' {
        ']'
    } else {
        '}'
    };
    let close = body.rfind(close_char)?;
    (close > open).then(|| body[open..=close].to_string())
}

fn parse_err(stage: &str, raw: &str) -> Error {
    Error::Parse {
        stage: stage.to_string(),
        raw: raw.to_string(),
    }
}

pub struct ComponentContext {
    pub id: String,
    pub name: String,
    pub code: String,
    pub screenshot: ImageRef,
}

/// One element with everything needed to show it to a vision model.
pub struct ElementContext {
    pub tree_id: String,
    pub node: ElementNode,
    pub parent_box: Option<BoundingBox>,
    pub screenshot: PathBuf,
    pub image: ImageDims,
}

impl ElementContext {
    pub fn from_tree(tree_id: &str, tree: &ElementTree, node: &ElementNode) -> Self {
        let parent_box = node
            .parent
            .as_ref()
            .and_then(|p| tree.nodes.iter().find(|n| &n.id == p))
            .map(|n| n.bbox);
        Self {
            tree_id: tree_id.to_string(),
            node: node.clone(),
            parent_box,
            screenshot: tree.screenshot_ref.clone(),
            image: tree.image,
        }
    }

    fn key(&self) -> String {
        format!("{}/{}", self.tree_id, self.node.id)
    }

    /// Element crop, context crop with highlight, full screenshot with highlight.
    pub fn images(&self) -> Result<Vec<ImageRef>> {
        let (element, context) = crop_regions(&self.node.bbox, &self.image, CONTEXT_PAD)?;
        let highlight = Mark::Highlight {
            bbox: self.node.bbox,
        };
        Ok(vec![
            ImageRef::file(&self.screenshot).cropped(element),
            ImageRef::file(&self.screenshot)
                .cropped(context)
                .marked(highlight.clone()),
            ImageRef::file(&self.screenshot).marked(highlight),
        ])
    }
}

fn fmt_box(b: &BoundingBox) -> String {
    format!("[{}, {}, {}, {}]", b.x, b.y, b.w, b.h)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntentItem {
    Text(String),
    Object { intent: String },
}

pub fn gen_action_intents(component: &ComponentContext, client: &Client) -> Result<Vec<String>> {
    let prompt = render(
        INTENTS,
        &[
            ("component_name", &component.name),
            ("component_code", &component.code),
        ],
    );
    let req = CompletionRequest::new("action_intents", prompt)
        .with_id(&component.id)
        .with_images(vec![component.screenshot.clone()]);
    let raw = client.complete(&req)?;
    let json = extract_json(&raw).ok_or_else(|| parse_err("action_intents", &raw))?;
    let items: Vec<IntentItem> =
        serde_json::from_str(&json).map_err(|_| parse_err("action_intents", &raw))?;
    Ok(items
        .into_iter()
        .map(|i| match i {
            IntentItem::Text(t) | IntentItem::Object { intent: t } => t,
        })
        .filter(|t| !t.trim().is_empty())
        .collect())
}

fn tree_digest(tree: &ElementTree) -> String {
    tree.nodes
        .iter()
        .map(|n| {
            format!(
                "{} parent={} bbox={} tag={} text={:?}",
                n.id,
                n.parent.as_deref().unwrap_or("-"),
                fmt_box(&n.bbox),
                n.tag,
                n.text.as_deref().unwrap_or("")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn detail_from_response(stage: &str, raw: &str) -> Result<ActionDetail> {
    let json = extract_json(raw).ok_or_else(|| parse_err(stage, raw))?;
    Ok(parse_action_detail(&json)?)
}

/// Component-level action detail for one intent.
pub fn gen_action_detail(
    intent: &str,
    intent_index: usize,
    component: &ComponentContext,
    tree: &ElementTree,
    client: &Client,
) -> Result<ActionDetail> {
    let prompt = render(
        DETAIL,
        &[
            ("component_name", &component.name),
            ("component_code", &component.code),
            ("element_tree", &tree_digest(tree)),
            ("intent", intent),
        ],
    );
    let req = CompletionRequest::new("action_detail", prompt)
        .with_id(format!("{}/{intent_index}", component.id))
        .with_images(vec![component.screenshot.clone()]);
    detail_from_response("action_detail", &client.complete(&req)?)
}

pub fn gen_element_annotation(ctx: &ElementContext, client: &Client) -> Result<ElementAnnotation> {
    let prompt = render(
        ANNOTATION,
        &[
            ("element_box", &fmt_box(&ctx.node.bbox)),
            (
                "parent_box",
                &ctx.parent_box.as_ref().map_or("none".into(), fmt_box),
            ),
            ("tag", &ctx.node.tag),
            ("text", ctx.node.text.as_deref().unwrap_or("")),
        ],
    );
    let req = CompletionRequest::new("element_annotation", prompt)
        .with_id(ctx.key())
        .with_images(ctx.images()?);
    let raw = client.complete(&req)?;
    let json = extract_json(&raw).ok_or_else(|| parse_err("element_annotation", &raw))?;
    let a: ElementAnnotation =
        serde_json::from_str(&json).map_err(|_| parse_err("element_annotation", &raw))?;
    if a.usable() && a.ui_type.trim().is_empty() {
        return Err(parse_err("element_annotation", &raw));
    }
    Ok(a)
}

fn element_vars<'a>(
    ctx: &'a ElementContext,
    a: &'a ElementAnnotation,
    bbox: &'a str,
) -> Vec<(&'a str, &'a str)> {
    vec![
        ("element_box", bbox),
        ("visual_description", &a.visual_description),
        ("position_text", &a.position_text),
        ("text", ctx.node.text.as_deref().unwrap_or("")),
        ("functionality", &a.functionality),
        ("ui_type", &a.ui_type),
    ]
}

/// Unique-space action detail for one of an element's possible actions.
pub fn gen_element_action_detail(
    ctx: &ElementContext,
    annotation: &ElementAnnotation,
    action_index: usize,
    client: &Client,
) -> Result<ActionDetail> {
    let action = annotation
        .possible_actions
        .get(action_index)
        .ok_or_else(|| Error::invalid(format!("no possible action #{action_index}")))?;
    let bbox = fmt_box(&ctx.node.bbox);
    let mut vars = element_vars(ctx, annotation, &bbox);
    vars.push(("action", action));
    let req = CompletionRequest::new("element_action", render(ELEMENT_ACTION, &vars))
        .with_id(format!("{}/{action_index}", ctx.key()));
    let d = detail_from_response("element_action", &client.complete(&req)?)?;
    if d.action_space_type != ActionSpaceType::Unique {
        return Err(ValidationError::Schema {
            path: "$.action_space_type".into(),
            message: format!("expected unique, got {:?}", d.action_space_type),
        }
        .into());
    }
    Ok(d)
}

/// Continuous action detail for the element, or `None` when the model
/// reports no continuous space.
pub fn gen_continuous_detail(
    ctx: &ElementContext,
    annotation: &ElementAnnotation,
    client: &Client,
) -> Result<Option<ActionDetail>> {
    let bbox = fmt_box(&ctx.node.bbox);
    let vars = element_vars(ctx, annotation, &bbox);
    let req = CompletionRequest::new("continuous_detection", render(CONTINUOUS, &vars))
        .with_id(ctx.key());
    let raw = client.complete(&req)?;
    let trimmed = raw.trim().trim_matches('`').trim();
    if trimmed.eq_ignore_ascii_case("null") || trimmed.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let d = detail_from_response("continuous_detection", &raw)?;
    if d.action_space_type != ActionSpaceType::Continuous {
        return Err(ValidationError::Schema {
            path: "$.action_space_type".into(),
            message: format!("expected continuous, got {:?}", d.action_space_type),
        }
        .into());
    }
    Ok(Some(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::parse_element_tree;
    use crate::provider::ScriptedMock;

    fn component() -> ComponentContext {
        ComponentContext {
            id: "slider".into(),
            name: "Slider".into(),
            code: "<Slider defaultValue={30} />".into(),
            screenshot: ImageRef::file("slider.png"),
        }
    }

    fn tree() -> ElementTree {
        parse_element_tree(
            br#"{"image": {"width": 1920, "height": 1080, "screenshot": "slider.png"},
                 "nodes": [{"id": "root", "bbox": [500, 700, 700, 300], "tag": "div"},
                           {"id": "track", "parent": "root", "bbox": [600.5, 820, 464, 20], "tag": "span", "interactive": true}]}"#,
        )
        .unwrap()
    }

    fn client(pairs: &[(&str, &str)]) -> Client {
        Client::mock(ScriptedMock::strict(
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())),
        ))
    }

    #[test]
    fn extract_json_repairs_fences_and_prose() {
        assert_eq!(extract_json("```json\n[1, 2]\n```").unwrap(), "[1, 2]");
        assert_eq!(
            extract_json("Sure! Here: {\"a\": 1} Hope it helps").unwrap(),
            "{\"a\": 1}"
        );
        assert_eq!(
            extract_json("```\n{\"a\": [1]}\n```").unwrap(),
            "{\"a\": [1]}"
        );
        assert!(extract_json("no json here").is_none());
    }

    #[test]
    fn intents_parse_lists() {
        let c = client(&[(
            "action_intents/slider",
            "```json\n[\"Set volume\", \"Mute\", {\"intent\": \"Max out\"}]\n```",
        )]);
        assert_eq!(
            gen_action_intents(&component(), &c).unwrap(),
            vec!["Set volume", "Mute", "Max out"]
        );
        let c = client(&[("action_intents/slider", "[]")]);
        assert!(gen_action_intents(&component(), &c).unwrap().is_empty());
        let c = client(&[("action_intents/slider", "{\"not\": \"a list\"}")]);
        assert!(matches!(
            gen_action_intents(&component(), &c),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn action_detail_from_fenced_response() {
        let response = r#"```json
{"thought_process": "slider", "action_space_type": "continuous",
 "action_desc": "Set saturation to <saturation>%", "action_params": ["saturation"],
 "action_discrete_values": null, "action_continuous_interval": {"saturation": [[0.0, 100.0]]},
 "action_code": "def action(saturation):\n    x_0, y_0 = 600.5, 830\n    x_1, y_1 = 1064.5, 830\n    x = x_0 + (x_1 - x_0) * (saturation / 100)\n    pyautogui.click(x, y_0)"}
```"#;
        let c = client(&[("action_detail/slider/0", response)]);
        let d = gen_action_detail("Set saturation", 0, &component(), &tree(), &c).unwrap();
        assert_eq!(d.action_space_type, ActionSpaceType::Continuous);

        let c = client(&[(
            "action_detail/slider/0",
            r#"{"action_desc": "x", "action_code": "def action():\n    pyautogui.click(1, 2)"}"#,
        )]);
        let err = gen_action_detail("x", 0, &component(), &tree(), &c).unwrap_err();
        assert!(err.to_string().contains("action_space_type"), "{err}");
    }

    #[test]
    fn annotation_flags_round_trip() {
        let t = tree();
        let ctx = ElementContext::from_tree("t1", &t, &t.nodes[1]);
        assert_eq!(ctx.parent_box, Some(t.nodes[0].bbox));
        assert_eq!(ctx.images().unwrap().len(), 3);
        let full = r#"{"visual_description": "A thin blue track", "position_text": "lower middle",
            "functionality": "sets saturation", "ui_type": "slider", "possible_actions": ["click the track"],
            "visibility_ok": true, "atomicity_ok": true}"#;
        let a = gen_element_annotation(&ctx, &client(&[("element_annotation/t1/track", full)]))
            .unwrap();
        assert!(a.usable());
        assert_eq!(a.ui_type, "slider");
        let split = full.replace("\"atomicity_ok\": true", "\"atomicity_ok\": false");
        let a = gen_element_annotation(&ctx, &client(&[("element_annotation/t1/track", &split)]))
            .unwrap();
        assert!(!a.usable());
        assert!(gen_element_annotation(
            &ctx,
            &client(&[("element_annotation/t1/track", "garbage")])
        )
        .is_err());
    }

    #[test]
    fn continuous_detection_none() {
        let t = tree();
        let ctx = ElementContext::from_tree("t1", &t, &t.nodes[1]);
        let a = ElementAnnotation {
            ui_type: "button".into(),
            visibility_ok: true,
            atomicity_ok: true,
            ..Default::default()
        };
        let c = client(&[("continuous_detection/t1/track", "null")]);
        assert!(gen_continuous_detail(&ctx, &a, &c).unwrap().is_none());
    }
}
