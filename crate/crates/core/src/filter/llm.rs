use std::path::PathBuf;

use super::Verdict;
use crate::error::{Error, Result};
use crate::geometry::{crop_regions, BoundingBox, ImageDims, Point};
use crate::provider::{render, Client, CompletionRequest, ImageRef, Mark, CONTEXT_PAD};

const INSTRUCTION: &str = include_str!("../../templates/instruction_filter.v1.txt");
const VISUAL: &str = include_str!("../../templates/visual_filter.v1.txt");

/// Which reviewer produced a response; selects the rule-id vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Instruction,
    Visual,
}

impl VerdictKind {
    fn prefix(self) -> &'static str {
        match self {
            VerdictKind::Instruction => "llm",
            VerdictKind::Visual => "visual",
        }
    }

    fn classify(self, reason: &str) -> &'static str {
        let r = reason.to_ascii_lowercase();
        let has = |words: &[&str]| words.iter().any(|w| r.contains(w));
        match self {
            VerdictKind::Instruction => {
                if has(&[
                    "multiple",
                    "more than one",
                    "several targets",
                    "ambiguous target",
                ]) {
                    "llm-multi-target"
                } else if has(&["index", "non-visual", "identifier", "not visible"]) {
                    "llm-non-visual-id"
                } else if has(&[
                    "multi-step",
                    "multiple steps",
                    "several steps",
                    "compound",
                    "step",
                ]) {
                    "llm-multi-step"
                } else if has(&["vague", "unclear", "ambiguous"]) {
                    "llm-vague"
                } else {
                    "llm-fail"
                }
            }
            VerdictKind::Visual => {
                if has(&["render", "error", "overlay", "compile", "broken"]) {
                    "visual-render-error"
                } else if has(&["wrong", "different element", "target"]) {
                    "visual-wrong-target"
                } else if has(&["center", "off", "placed", "placement", "position"]) {
                    "visual-off-center"
                } else {
                    "visual-fail"
                }
            }
        }
    }
}

/// Read a reviewer response. Only a leading PASS keeps the sample; anything
/// that does not start with PASS or FAIL is dropped as unparsable.
pub fn parse_verdict(raw: &str, kind: VerdictKind) -> Verdict {
    let body =
        raw.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '`' | '"' | '#'));
    let token: String = body
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    let rest = body[token.len()..]
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, ':' | '-' | '*' | '`' | '.'))
        .trim()
        .to_string();
    match token.to_ascii_uppercase().as_str() {
        "PASS" => Verdict::pass(),
        "FAIL" => Verdict::drop(kind.classify(&rest), rest),
        _ => Verdict::drop(
            format!("{}-unparsable", kind.prefix()),
            raw.trim().to_string(),
        ),
    }
}

pub fn llm_instruction_filter(id: &str, instruction: &str, client: &Client) -> Result<Verdict> {
    let prompt = render(INSTRUCTION, &[("instruction", instruction)]);
    let req = CompletionRequest::new("instruction_filter", prompt).with_id(id);
    Ok(parse_verdict(
        &client.complete(&req)?,
        VerdictKind::Instruction,
    ))
}

/// The three views the visual reviewer needs.
#[derive(Debug, Clone, Default)]
pub struct VisualInputs {
    pub element_crop: Option<ImageRef>,
    pub marked_crop: Option<ImageRef>,
    pub full_image: Option<ImageRef>,
}

impl VisualInputs {
    /// Element crop, context crop with the click marked, full screenshot with
    /// the element highlighted.
    pub fn for_action(
        screenshot: impl Into<PathBuf>,
        image: &ImageDims,
        bbox: &BoundingBox,
        click: Point,
    ) -> Result<Self> {
        let path = screenshot.into();
        let (element, context) = crop_regions(bbox, image, CONTEXT_PAD)?;
        Ok(VisualInputs {
            element_crop: Some(ImageRef::file(&path).cropped(element)),
            marked_crop: Some(
                ImageRef::file(&path)
                    .cropped(context)
                    .marked(Mark::Click { point: click }),
            ),
            full_image: Some(ImageRef::file(&path).marked(Mark::Highlight { bbox: *bbox })),
        })
    }
}

pub fn llm_visual_filter(
    id: &str,
    instruction: &str,
    inputs: &VisualInputs,
    client: &Client,
) -> Result<Verdict> {
    let missing = |name: &str| Error::invalid(format!("visual filter needs the {name} image"));
    let images = vec![
        inputs
            .element_crop
            .clone()
            .ok_or_else(|| missing("element crop"))?,
        inputs
            .marked_crop
            .clone()
            .ok_or_else(|| missing("marked crop"))?,
        inputs.full_image.clone().ok_or_else(|| missing("full"))?,
    ];
    let prompt = render(VISUAL, &[("instruction", instruction)]);
    let req = CompletionRequest::new("visual_filter", prompt)
        .with_id(id)
        .with_images(images);
    Ok(parse_verdict(&client.complete(&req)?, VerdictKind::Visual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{ProviderError, ScriptedMock};

    fn client(pairs: &[(&str, &str)]) -> Client {
        Client::mock(ScriptedMock::strict(
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())),
        ))
    }

    #[test]
    fn scripted_instruction_verdicts() {
        let c = client(&[
            ("instruction_filter/a", "PASS"),
            ("instruction_filter/b", "FAIL: multiple targets"),
            ("instruction_filter/c", "I think it is fine"),
        ]);
        assert_eq!(
            llm_instruction_filter("a", "Click OK", &c).unwrap(),
            Verdict::pass()
        );
        let b = llm_instruction_filter("b", "Click the button", &c).unwrap();
        assert_eq!(b.rule_id.as_deref(), Some("llm-multi-target"));
        let g = llm_instruction_filter("c", "Click", &c).unwrap();
        assert_eq!(
            (g.keep, g.rule_id.as_deref()),
            (false, Some("llm-unparsable"))
        );
    }

    #[test]
    fn transport_errors_are_not_verdicts() {
        let c = client(&[]);
        let err = llm_instruction_filter("z", "Click OK", &c).unwrap_err();
        assert!(matches!(
            err,
            Error::Provider(ProviderError::Unscripted { .. })
        ));
    }

    #[test]
    fn verdict_vocabulary() {
        let v = |s| parse_verdict(s, VerdictKind::Instruction).rule_id;
        assert_eq!(v("FAIL: vague semantics").as_deref(), Some("llm-vague"));
        assert_eq!(
            v("fail - uses index 1").as_deref(),
            Some("llm-non-visual-id")
        );
        assert_eq!(
            v("**FAIL**: multi-step interaction").as_deref(),
            Some("llm-multi-step")
        );
        assert_eq!(v("FAIL").as_deref(), Some("llm-fail"));
        assert_eq!(v("pass"), None);
        let w = |s| parse_verdict(s, VerdictKind::Visual).rule_id;
        assert_eq!(
            w("FAIL: render error overlay").as_deref(),
            Some("visual-render-error")
        );
        assert_eq!(
            w("FAIL: wrong target").as_deref(),
            Some("visual-wrong-target")
        );
        assert_eq!(
            w("FAIL: click is off-center").as_deref(),
            Some("visual-off-center")
        );
        assert_eq!(w("").as_deref(), Some("visual-unparsable"));
    }

    #[test]
    fn visual_filter_needs_all_images() {
        let c = Client::mock(ScriptedMock::strict([
            ("visual_filter/a".to_string(), "PASS".to_string()),
            (
                "visual_filter/b".to_string(),
                "FAIL: render error overlay".to_string(),
            ),
        ]));
        let dims = ImageDims::new(200, 100);
        let bbox = BoundingBox::new(10.0, 10.0, 40.0, 20.0).unwrap();
        let inputs = VisualInputs::for_action("s.png", &dims, &bbox, bbox.center()).unwrap();
        assert!(
            llm_visual_filter("a", "Click OK", &inputs, &c)
                .unwrap()
                .keep
        );
        let b = llm_visual_filter("b", "Click OK", &inputs, &c).unwrap();
        assert_eq!(b.rule_id.as_deref(), Some("visual-render-error"));
        let partial = VisualInputs {
            marked_crop: None,
            ..inputs
        };
        assert!(matches!(
            llm_visual_filter("a", "Click OK", &partial, &c),
            Err(Error::InvalidInput(_))
        ));
    }
}
