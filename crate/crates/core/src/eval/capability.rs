use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    TextMatching,
    ElementRecognition,
    LayoutUnderstanding,
    FineGrainedManipulation,
    Refusal,
}

impl Capability {
    /// Report column order.
    pub const ALL: [Capability; 5] = [
        Capability::TextMatching,
        Capability::ElementRecognition,
        Capability::LayoutUnderstanding,
        Capability::FineGrainedManipulation,
        Capability::Refusal,
    ];
}

#[derive(Deserialize)]
struct Row {
    element_type: String,
    capability: Capability,
}

#[derive(Deserialize)]
struct Table {
    rows: Vec<Row>,
}

static TABLE: LazyLock<Vec<(String, Capability)>> = LazyLock::new(|| {
    let t: Table = serde_json::from_str(include_str!("../../data/capabilities.json"))
        .expect("shipped table parses");
    t.rows
        .into_iter()
        .map(|r| (r.element_type, r.capability))
        .collect()
});

/// Distinct element types in table order.
pub fn known_element_types() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for (t, _) in TABLE.iter() {
        if !out.contains(&t.as_str()) {
            out.push(t);
        }
    }
    out
}

/// Capability of a benchmark element type. The first table row naming the
/// type wins; matching ignores case and surrounding whitespace.
pub fn capability_of(element_type: &str) -> Result<Capability> {
    let want = element_type.trim();
    TABLE
        .iter()
        .find(|(t, _)| t.eq_ignore_ascii_case(want))
        .map(|(_, c)| *c)
        .ok_or_else(|| Error::UnknownElementType {
            name: element_type.to_string(),
            known: known_element_types().join(", "),
        })
}
