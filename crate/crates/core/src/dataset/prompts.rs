use serde::{Deserialize, Serialize};

use crate::geometry::ImageDims;

const COMPUTER_USE: &str = include_str!("../../templates/system/computer_use.v1.txt");
const ICON_DESCRIPTION: &str = include_str!("../../templates/system/icon_description.v1.txt");
const LAYOUT_DESCRIPTION: &str = include_str!("../../templates/system/layout_description.v1.txt");
const LAYOUT_GROUNDING: &str = include_str!("../../templates/system/layout_grounding.v1.txt");

/// System prompts shipped with the builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemPrompt {
    ComputerUse,
    IconDescription,
    LayoutDescription,
    LayoutGrounding,
}

fn body(template: &str) -> String {
    template
        .lines()
        .filter(|l| !l.starts_with("# template:"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl SystemPrompt {
    pub fn id(self) -> &'static str {
        match self {
            SystemPrompt::ComputerUse => "computer_use.v1",
            SystemPrompt::IconDescription => "icon_description.v1",
            SystemPrompt::LayoutDescription => "layout_description.v1",
            SystemPrompt::LayoutGrounding => "layout_grounding.v1",
        }
    }

    /// Prompt text; the tool prompt states the resized resolution as HxW.
    pub fn text(self, dims: &ImageDims) -> String {
        match self {
            SystemPrompt::ComputerUse => {
                let f = dims.resized_frame();
                body(COMPUTER_USE)
                    .replace("{height}", &f.height.to_string())
                    .replace("{width}", &f.width.to_string())
            }
            SystemPrompt::IconDescription => body(ICON_DESCRIPTION),
            SystemPrompt::LayoutDescription => body(LAYOUT_DESCRIPTION),
            SystemPrompt::LayoutGrounding => body(LAYOUT_GROUNDING),
        }
    }
}

/// User text for instruction-following grounding samples.
pub fn next_move_text(instruction: &str) -> String {
    format!("Please generate the next move according to the UI screenshot and instruction.\n\nInstruction: {instruction}")
}
