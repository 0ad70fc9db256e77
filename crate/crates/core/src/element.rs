//! Element position trees: parsing, structural filters and candidate
//! enumeration.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ImageDims};

/// Tolerance when checking that a node lies inside the viewport.
const FRAME_SLACK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementNode {
    pub id: String,
    #[serde(default)]
    pub parent: Option<String>,
    pub bbox: BoundingBox,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default = "default_true")]
    pub visible: bool,
    #[serde(default)]
    pub interactive: bool,
    #[serde(default)]
    pub tag: String,
    #[serde(default)]
    pub extra: Map<String, Value>,
}

fn default_true() -> bool {
    true
}

/// Component source attached to a captured tree; drives component-level
/// action generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub name: String,
    #[serde(default)]
    pub code: Option<String>,
    #[serde(default)]
    pub source: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementTree {
    pub nodes: Vec<ElementNode>,
    pub image: ImageDims,
    pub screenshot_ref: PathBuf,
    pub component: Option<ComponentInfo>,
}

/// Vision-model reading of one element.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElementAnnotation {
    #[serde(default)]
    pub visual_description: String,
    #[serde(default)]
    pub position_text: String,
    #[serde(default)]
    pub functionality: String,
    #[serde(default)]
    pub ui_type: String,
    #[serde(default)]
    pub possible_actions: Vec<String>,
    pub visibility_ok: bool,
    pub atomicity_ok: bool,
}

impl ElementAnnotation {
    /// Both quality checks passed; otherwise the element is excluded downstream.
    pub fn usable(&self) -> bool {
        self.visibility_ok && self.atomicity_ok
    }
}

#[derive(Serialize, Deserialize)]
struct WireImage {
    width: u32,
    height: u32,
    #[serde(default)]
    screenshot: PathBuf,
}

#[derive(Deserialize)]
struct WireNode {
    #[serde(flatten)]
    node: ElementNode,
    #[serde(flatten)]
    unknown: Map<String, Value>,
}

#[derive(Deserialize)]
struct WireTree {
    image: WireImage,
    nodes: Vec<WireNode>,
    #[serde(default)]
    component: Option<ComponentInfo>,
}

#[derive(Serialize)]
struct WireTreeOut<'a> {
    image: WireImage,
    nodes: &'a [ElementNode],
    #[serde(skip_serializing_if = "Option::is_none")]
    component: &'a Option<ComponentInfo>,
}

/// Parse and validate an element-tree document. Unknown node fields are
/// moved into `extra`.
pub fn parse_element_tree(raw: &[u8]) -> Result<ElementTree> {
    let wire: WireTree = serde_json::from_slice(raw).map_err(|e| Error::Tree(e.to_string()))?;
    let image = ImageDims::new(wire.image.width, wire.image.height);
    image.validate()?;
    let nodes = wire
        .nodes
        .into_iter()
        .map(|w| {
            let mut n = w.node;
            for (k, v) in w.unknown {
                n.extra.entry(k).or_insert(v);
            }
            n
        })
        .collect();
    let tree = ElementTree {
        nodes,
        image,
        screenshot_ref: wire.image.screenshot,
        component: wire.component,
    };
    tree.check()?;
    Ok(tree)
}

impl ElementTree {
    fn check(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                return Err(Error::DuplicateId(n.id.clone()));
            }
        }
        let frame = BoundingBox {
            x: -FRAME_SLACK,
            y: -FRAME_SLACK,
            w: self.image.width as f64 + 2.0 * FRAME_SLACK,
            h: self.image.height as f64 + 2.0 * FRAME_SLACK,
        };
        for n in &self.nodes {
            let b = &n.bbox;
            if !(b.x >= frame.x
                && b.y >= frame.y
                && b.right() <= frame.right()
                && b.bottom() <= frame.bottom())
            {
                return Err(Error::Tree(format!(
                    "node {} bbox ({}, {}, {}, {}) leaves the {}x{} image",
                    n.id, b.x, b.y, b.w, b.h, self.image.width, self.image.height
                )));
            }
            if let Some(p) = &n.parent {
                if !ids.contains(p.as_str()) {
                    return Err(Error::DanglingParent {
                        node: n.id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        self.depths().map(|_| ())
    }

    /// Depth of every node (roots are 0), in document order.
    pub fn depths(&self) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut depth: Vec<Option<usize>> = vec![None; self.nodes.len()];
        for start in 0..self.nodes.len() {
            let mut chain = Vec::new();
            let mut cur = Some(start);
            let mut base = 0;
            while let Some(i) = cur {
                if let Some(d) = depth[i] {
                    base = d + 1;
                    break;
                }
                if chain.contains(&i) {
                    return Err(Error::Tree(format!(
                        "parent cycle through node {}",
                        self.nodes[i].id
                    )));
                }
                chain.push(i);
                cur = self.nodes[i]
                    .parent
                    .as_deref()
                    .and_then(|p| index.get(p).copied());
            }
            for (k, &i) in chain.iter().rev().enumerate() {
                depth[i] = Some(base + k);
            }
        }
        Ok(depth.into_iter().map(|d| d.unwrap_or(0)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&WireTreeOut {
            image: WireImage {
                width: self.image.width,
                height: self.image.height,
                screenshot: self.screenshot_ref.clone(),
            },
            nodes: &self.nodes,
            component: &self.component,
        })
        .expect("tree serializes")
    }

    /// Keep the nodes for which `keep[i]` holds, re-attaching orphans to
    /// their nearest surviving ancestor.
    fn retain_mask(&self, keep: &[bool]) -> ElementTree {
        let index: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let nodes = self
            .nodes
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(n, _)| {
                let mut n = n.clone();
                let mut parent = n.parent.take();
                let mut hops = 0;
                while let Some(p) = parent.as_deref() {
                    match index.get(p) {
                        Some(&pi) if keep[pi] => break,
                        Some(&pi) if hops <= self.nodes.len() => {
                            parent = self.nodes[pi].parent.clone();
                            hops += 1;
                        }
                        _ => {
                            parent = None;
                        }
                    }
                }
                n.parent = parent;
                n
            })
            .collect();
        ElementTree {
            nodes,
            image: self.image,
            screenshot_ref: self.screenshot_ref.clone(),
            component: self.component.clone(),
        }
    }
}

fn half_pixel_key(b: &BoundingBox) -> [i64; 4] {
    [b.x, b.y, b.w, b.h].map(|v| (v * 2.0).round() as i64)
}

/// Among nodes sharing a bounding box (compared on a 0.5 px grid) keep only
/// the deepest, ties going to the first in document order.
pub fn dedup_same_bbox(t: &ElementTree) -> ElementTree {
    let depths = t.depths().expect("parsed trees are acyclic");
    let mut best: BTreeMap<[i64; 4], usize> = BTreeMap::new();
    for (i, n) in t.nodes.iter().enumerate() {
        best.entry(half_pixel_key(&n.bbox))
            .and_modify(|cur| {
                if depths[i] > depths[*cur] {
                    *cur = i;
                }
            })
            .or_insert(i);
    }
    let mut keep = vec![false; t.nodes.len()];
    for i in best.into_values() {
        keep[i] = true;
    }
    t.retain_mask(&keep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeFilter {
    pub min_area: f64,
    pub max_frac: f64,
}

impl Default for SizeFilter {
    fn default() -> Self {
        Self {
            min_area: 25.0,
            max_frac: 0.8,
        }
    }
}

/// Drop nodes whose area is below `min_area` or above `max_frac` of the image.
pub fn filter_abnormal_size(t: &ElementTree, min_area: f64, max_frac: f64) -> Result<ElementTree> {
    if min_area < 0.0 || !(max_frac > 0.0 && max_frac <= 1.0) {
        return Err(Error::invalid(format!(
            "size thresholds out of range: min_area={min_area}, max_frac={max_frac}"
        )));
    }
    let ceiling = max_frac * t.image.area();
    let keep: Vec<bool> = t
        .nodes
        .iter()
        .map(|n| {
            let a = n.bbox.area();
            a >= min_area && a <= ceiling
        })
        .collect();
    Ok(t.retain_mask(&keep))
}

/// Visible nodes in document order.
pub fn enumerate_candidates(t: &ElementTree) -> Vec<ElementNode> {
    t.nodes.iter().filter(|n| n.visible).cloned().collect()
}

/// Dedup, size filter, then candidate enumeration.
pub fn ingest(t: &ElementTree, size: &SizeFilter) -> Result<(ElementTree, Vec<ElementNode>)> {
    let filtered = filter_abnormal_size(&dedup_same_bbox(t), size.min_area, size.max_frac)?;
    let candidates = enumerate_candidates(&filtered);
    Ok((filtered, candidates))
}
