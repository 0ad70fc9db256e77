use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts::SystemPrompt;
use crate::action::{GroundingAction, PrimitiveKind};
use crate::element::ElementAnnotation;
use crate::error::{Error, Result};
use crate::filter::CropStats;
use crate::geometry::{
    round_half_up, smart_resize_with, to_resized, BoundingBox, ImageDims, Point, ResizeConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePart {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub resized_height: u32,
    pub resized_width: u32,
    /// Carried through when present; never computed here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq_len: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Part {
    Image(ImagePart),
    Text { text: String },
}

/// System turns hold a bare `{"text": ...}`; the others a list of parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TurnValue {
    Parts(Vec<Part>),
    Text { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub from: Role,
    pub value: TurnValue,
}

impl Turn {
    fn system(text: String) -> Self {
        Turn {
            from: Role::System,
            value: TurnValue::Text { text },
        }
    }

    fn parts(from: Role, parts: Vec<Part>) -> Self {
        Turn {
            from,
            value: TurnValue::Parts(parts),
        }
    }

    /// Concatenated text of the turn.
    pub fn text(&self) -> String {
        match &self.value {
            TurnValue::Text { text } => text.clone(),
            TurnValue::Parts(parts) => parts
                .iter()
                .filter_map(|p| match p {
                    Part::Text { text } => Some(text.as_str()),
                    Part::Image(_) => None,
                })
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}

/// Where a refusal's instruction came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub instruction_source_image: String,
    pub paired_image: String,
    pub template_id: String,
}

/// Side information used by the filter stage; removed by `build`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordMeta {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ui_type: Option<String>,
    /// Target box in the native frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
    /// Action point in the native frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub click: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_stats: Option<CropStats>,
}

/// One JSONL line of training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub conversations: Vec<Turn>,
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<RecordMeta>,
}

impl Record {
    pub fn system_text(&self) -> Option<&str> {
        match self.conversations.first() {
            Some(Turn {
                from: Role::System,
                value: TurnValue::Text { text },
            }) => Some(text),
            _ => None,
        }
    }

    /// First image part in the conversation.
    pub fn image(&self) -> Option<&ImagePart> {
        self.conversations.iter().find_map(|t| match &t.value {
            TurnValue::Parts(parts) => parts.iter().find_map(|p| match p {
                Part::Image(i) => Some(i),
                Part::Text { .. } => None,
            }),
            TurnValue::Text { .. } => None,
        })
    }

    /// Number of query-answer pairs.
    pub fn turns(&self) -> usize {
        self.conversations
            .iter()
            .filter(|t| t.from == Role::Assistant)
            .count()
    }

    pub fn source_tag(&self) -> &str {
        self.source.as_deref().unwrap_or("external")
    }

    /// Identifier used for ordering and subsetting.
    pub fn key(&self) -> &str {
        self.meta.as_ref().map_or(&self.image_id, |m| &m.id)
    }

    /// Structure and coordinate checks: system turn first, then strictly
    /// alternating user/assistant pairs, tool-call coordinates inside the
    /// resized frame.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("record {}: {m}", self.image_id)));
        if self.system_text().is_none() {
            return bad("first turn must be a system turn");
        }
        let rest = &self.conversations[1..];
        if rest.is_empty() || !rest.len().is_multiple_of(2) {
            return bad("expected user/assistant pairs after the system turn");
        }
        for pair in rest.chunks(2) {
            if pair[0].from != Role::User || pair[1].from != Role::Assistant {
                return bad("user and assistant turns must alternate");
            }
        }
        let Some(img) = self.image() else {
            return bad("no image part");
        };
        for t in rest.iter().filter(|t| t.from == Role::Assistant) {
            if let Some(args) = tool_call_arguments(&t.text()) {
                for key in ["coordinate", "start_coordinate"] {
                    if let Some(c) = args.get(key).and_then(as_xy) {
                        let inside = c.0 >= 0.0
                            && c.1 >= 0.0
                            && c.0 <= img.resized_width as f64
                            && c.1 <= img.resized_height as f64;
                        if !inside {
                            return bad(&format!("{key} {c:?} outside the resized frame"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn as_xy(v: &Value) -> Option<(f64, f64)> {
    let a = v.as_array()?;
    Some((a.first()?.as_f64()?, a.get(1)?.as_f64()?))
}

/// `arguments` object of the first `<tool_call>` block in `text`.
pub fn tool_call_arguments(text: &str) -> Option<Value> {
    let start = text.find("<tool_call>")? + "<tool_call>".len();
    let end = text[start..]
        .find("</tool_call>")
        .map_or(text.len(), |e| start + e);
    let v: Value = serde_json::from_str(text[start..end].trim()).ok()?;
    v.get("arguments").cloned()
}

/// JSON with `", "` and `": "` separators, as the wire examples use.
pub fn spaced_json(v: &Value) -> String {
    match v {
        Value::Array(items) => format!(
            "[{}]",
            items.iter().map(spaced_json).collect::<Vec<_>>().join(", ")
        ),
        Value::Object(map) => format!(
            "{{{}}}",
            map.iter()
                .map(|(k, v)| format!("{}: {}", Value::String(k.clone()), spaced_json(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        other => other.to_string(),
    }
}

fn wire_point(p: Point) -> [i64; 2] {
    [round_half_up(p.x), round_half_up(p.y)]
}

/// Assistant text for a grounding action; coordinates are already in the resized frame.
pub fn tool_call_text(
    kind: PrimitiveKind,
    at: Point,
    end: Option<Point>,
    text: Option<&str>,
) -> String {
    let mut args = serde_json::Map::new();
    args.insert("action".into(), json!(kind.tool_action()));
    match (kind, end) {
        (PrimitiveKind::Drag, Some(e)) => {
            args.insert("start_coordinate".into(), json!(wire_point(at)));
            args.insert("coordinate".into(), json!(wire_point(e)));
        }
        _ => {
            args.insert("coordinate".into(), json!(wire_point(at)));
        }
    }
    if let Some(t) = text {
        args.insert("text".into(), json!(t));
    }
    let call = json!({"name": "computer_use", "arguments": Value::Object(args)});
    format!("<tool_call>\n{}\n</tool_call>", spaced_json(&call))
}

/// A screenshot with its model frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub path: String,
    pub dims: ImageDims,
    #[serde(default)]
    pub seq_len: Option<u64>,
}

impl ImageInfo {
    pub fn new(path: impl Into<String>, width: u32, height: u32) -> Result<Self> {
        Self::with_resize(
            path,
            ImageDims::new(width, height),
            &ResizeConfig::default(),
        )
    }

    pub fn with_resize(
        path: impl Into<String>,
        dims: ImageDims,
        cfg: &ResizeConfig,
    ) -> Result<Self> {
        Ok(ImageInfo {
            path: path.into(),
            dims: smart_resize_with(dims.native_frame(), cfg)?,
            seq_len: None,
        })
    }

    pub fn part(&self) -> ImagePart {
        let r = self.dims.resized_frame();
        ImagePart {
            image: self.path.clone(),
            width: self.dims.width,
            height: self.dims.height,
            resized_height: r.height,
            resized_width: r.width,
            seq_len: self.seq_len,
        }
    }

    /// Stable id for the conversation about this image under one system prompt.
    pub fn image_id(&self, prompt: SystemPrompt) -> String {
        let name = format!("{}\n{}", prompt.id(), self.path);
        uuid::Uuid::new_v5(&uuid::Uuid::NAMESPACE_URL, name.as_bytes()).to_string()
    }
}

fn single_turn(
    image: &ImageInfo,
    prompt: SystemPrompt,
    user_text: String,
    answer: String,
) -> Record {
    Record {
        conversations: vec![
            Turn::system(prompt.text(&image.dims)),
            Turn::parts(
                Role::User,
                vec![Part::Image(image.part()), Part::Text { text: user_text }],
            ),
            Turn::parts(Role::Assistant, vec![Part::Text { text: answer }]),
        ],
        image_id: image.image_id(prompt),
        source: None,
        provenance: None,
        meta: None,
    }
}

fn out_of_frame(p: Point, d: &ImageDims) -> Error {
    Error::OutOfFrame {
        x: p.x,
        y: p.y,
        width: d.width,
        height: d.height,
    }
}

/// Instruction plus screenshot in, tool call out. `action` is in the native frame.
pub fn build_grounding_record(
    image: &ImageInfo,
    user_text: &str,
    action: &GroundingAction,
    system: SystemPrompt,
) -> Result<Record> {
    let dims = &image.dims;
    for p in std::iter::once(action.coordinate).chain(action.end) {
        if !p.is_finite() || !dims.contains(p) {
            return Err(out_of_frame(p, dims));
        }
    }
    let at = to_resized(action.coordinate, dims)?;
    let end = action.end.map(|e| to_resized(e, dims)).transpose()?;
    let answer = tool_call_text(action.kind, at, end, action.text.as_deref());
    Ok(single_turn(image, system, user_text.to_string(), answer))
}

fn check_box(image: &ImageInfo, bbox: &BoundingBox) -> Result<()> {
    if !bbox.is_valid() {
        return Err(Error::invalid(format!("degenerate bounding box {bbox:?}")));
    }
    if !bbox.within(&image.dims.native_frame()) {
        return Err(Error::invalid(format!(
            "bounding box {bbox:?} lies outside the {}x{} image",
            image.dims.width, image.dims.height
        )));
    }
    Ok(())
}

fn int_box(b: &BoundingBox) -> [i64; 4] {
    [
        round_half_up(b.x),
        round_half_up(b.y),
        round_half_up(b.w),
        round_half_up(b.h),
    ]
}

/// User text naming a region, in the native frame.
pub fn bbox_text(b: &BoundingBox) -> String {
    let [x, y, w, h] = int_box(b);
    format!("bounding box: x={x}, y={y}, w={w}, h={h}")
}

/// Four-section element description.
pub fn description_text(a: &ElementAnnotation) -> String {
    format!(
        "## Visual Composition: {}\n\n## Spatial Context: {}\n\n## User Interaction: {}\n\n## Element Type: {}",
        a.visual_description, a.position_text, a.functionality, a.ui_type
    )
}

/// Region in, description out.
pub fn build_description_record(
    image: &ImageInfo,
    bbox: &BoundingBox,
    annotation: &ElementAnnotation,
) -> Result<Record> {
    check_box(image, bbox)?;
    Ok(single_turn(
        image,
        SystemPrompt::LayoutDescription,
        bbox_text(bbox),
        description_text(annotation),
    ))
}

/// Description in, `x y w h` out.
pub fn build_layout_grounding_record(
    image: &ImageInfo,
    bbox: &BoundingBox,
    annotation: &ElementAnnotation,
) -> Result<Record> {
    check_box(image, bbox)?;
    let [x, y, w, h] = int_box(bbox);
    Ok(single_turn(
        image,
        SystemPrompt::LayoutGrounding,
        format!(
            "The {}'s intended function:\n{}",
            annotation.ui_type, annotation.functionality
        ),
        format!("{x} {y} {w} {h}"),
    ))
}

pub const REFUSAL_TEXT: &str = "The requested element is not present on this screen.";
pub const REFUSAL_TEMPLATE_ID: &str = "refusal.v1";

/// Instruction paired with a screenshot that cannot satisfy it.
pub fn build_refusal_record(
    image: &ImageInfo,
    instruction: &str,
    instruction_source_image: &str,
) -> Record {
    let mut r = single_turn(
        image,
        SystemPrompt::ComputerUse,
        super::next_move_text(instruction),
        REFUSAL_TEXT.to_string(),
    );
    r.source = Some("refusal".into());
    r.provenance = Some(Provenance {
        instruction_source_image: instruction_source_image.to_string(),
        paired_image: image.path.clone(),
        template_id: REFUSAL_TEMPLATE_ID.to_string(),
    });
    r
}
