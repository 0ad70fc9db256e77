//! End-to-end stages: ingest trees, synthesize records with a model client,
//! filter them, and build the final dataset.
//!
//! Records carry [`RecordMeta`] between stages; [`build`] strips it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::action::{ground_action_detail, ActionDetail, ActionSpaceType, GroundingAction};
use crate::dataset::{
    build_description_record, build_grounding_record, build_layout_grounding_record, finalize,
    next_move_text, DatasetManifest, ImageInfo, Record, RecordMeta, SystemPrompt,
};
use crate::element::{
    ingest, parse_element_tree, ElementAnnotation, ElementNode, ElementTree, SizeFilter,
};
use crate::error::{Error, ErrorKind, Result};
use crate::filter::{
    crop_stats_for, llm_instruction_filter, llm_visual_filter, rule_filter_with, CropStats,
    ReportLine, RuleConfig, Verdict, VisualInputs,
};
use crate::geometry::{BoundingBox, ImageDims, ResizeConfig};
use crate::office::{OfficeTask, DEFAULT_DRAG_OFFSET};
use crate::par::Exec;
use crate::provider::{
    gen_action_detail, gen_action_intents, gen_continuous_detail, gen_element_action_detail,
    gen_element_annotation, Client, ComponentContext, ElementContext, ImageRef,
};
use crate::seed::derive_seed;

/// A tree after dedup and size filtering, with its candidate elements.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub tree_id: String,
    pub tree: ElementTree,
    pub candidates: Vec<ElementNode>,
}

/// Read one tree file; its id is the file stem.
pub fn load_tree(path: &Path) -> Result<(String, ElementTree)> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let tree = parse_element_tree(&raw)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    Ok((id, tree))
}

/// Load every `*.json` file in `dir`, sorted by name.
pub fn load_trees(dir: &Path) -> Result<Vec<(String, ElementTree)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_tree(p)).collect()
}

#[derive(Serialize, Deserialize)]
struct WireCandidates {
    tree_id: String,
    tree: Box<serde_json::value::RawValue>,
    candidates: Vec<String>,
}

impl CandidateSet {
    /// One JSONL line: the filtered tree plus candidate node ids.
    pub fn to_line(&self) -> Result<String> {
        let w = WireCandidates {
            tree_id: self.tree_id.clone(),
            tree: serde_json::value::RawValue::from_string(self.tree.to_json())?,
            candidates: self.candidates.iter().map(|n| n.id.clone()).collect(),
        };
        Ok(serde_json::to_string(&w)?)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let w: WireCandidates = serde_json::from_str(line)?;
        let tree = parse_element_tree(w.tree.get().as_bytes())?;
        let candidates = w
            .candidates
            .iter()
            .map(|id| {
                tree.nodes
                    .iter()
                    .find(|n| &n.id == id)
                    .cloned()
                    .ok_or_else(|| {
                        Error::invalid(format!("candidate {id} is not in tree {}", w.tree_id))
                    })
            })
            .collect::<Result<_>>()?;
        Ok(CandidateSet {
            tree_id: w.tree_id,
            tree,
            candidates,
        })
    }
}

pub fn write_candidates(path: &Path, sets: &[CandidateSet]) -> Result<()> {
    let mut body = String::new();
    for s in sets {
        body.push_str(&s.to_line()?);
        body.push('\n');
    }
    crate::io::write_bytes(path, body.as_bytes())
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateSet>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(CandidateSet::from_line)
        .collect()
}

pub fn ingest_trees(
    trees: &[(String, ElementTree)],
    size: &SizeFilter,
    exec: Exec,
) -> Result<Vec<CandidateSet>> {
    exec.try_map(trees, |(id, t)| {
        let (tree, candidates) = ingest(t, size)?;
        Ok(CandidateSet {
            tree_id: id.clone(),
            tree,
            candidates,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Draws per discrete or continuous action space.
    pub samples_per_space: usize,
    pub resize: ResizeConfig,
    /// Directory that screenshot paths are relative to.
    pub image_root: PathBuf,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples_per_space: 2,
            resize: ResizeConfig::default(),
            image_root: PathBuf::from("."),
        }
    }
}

/// A generation unit that produced nothing usable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SynthOutput {
    pub records: Vec<Record>,
    pub skipped: Vec<Skip>,
}

impl SynthOutput {
    fn extend(&mut self, other: SynthOutput) {
        self.records.extend(other.records);
        self.skipped.extend(other.skipped);
    }

    fn skip(&mut self, id: impl Into<String>, reason: impl Into<String>) {
        self.skipped.push(Skip {
            id: id.into(),
            reason: reason.into(),
        });
    }

    /// Record a generation failure. Bad model output is skipped; provider
    /// and I/O failures abort the run.
    fn absorb<T>(&mut self, id: &str, r: Result<T>) -> Result<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) if e.kind() == ErrorKind::Validation => {
                log::warn!("{id}: {e}");
                self.skip(id, e.to_string());
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

enum Unit<'a> {
    Element(&'a CandidateSet, &'a ElementNode),
    Component(&'a CandidateSet),
}

/// Run element-level and component-level generation over every candidate.
///
/// Output order follows the input order and seeds are derived from ids, so
/// the result does not depend on `exec`.
pub fn synthesize(
    sets: &[CandidateSet],
    client: &Client,
    cfg: &SynthConfig,
    exec: Exec,
) -> Result<SynthOutput> {
    let mut units = Vec::new();
    for set in sets {
        if set.tree.component.is_some() {
            units.push(Unit::Component(set));
        }
        units.extend(set.candidates.iter().map(|n| Unit::Element(set, n)));
    }
    let parts = exec.try_map(&units, |u| match u {
        Unit::Element(set, node) => synth_element(set, node, client, cfg),
        Unit::Component(set) => synth_component(set, client, cfg),
    })?;
    let mut out = SynthOutput::default();
    for p in parts {
        out.extend(p);
    }
    Ok(out)
}

fn frame(set: &CandidateSet, cfg: &SynthConfig) -> Result<ImageInfo> {
    ImageInfo::with_resize(
        set.tree.screenshot_ref.to_string_lossy(),
        set.tree.image,
        &cfg.resize,
    )
}

fn stats(cfg: &SynthConfig, set: &CandidateSet, bbox: &BoundingBox) -> Result<Option<CropStats>> {
    match crop_stats_for(&cfg.image_root.join(&set.tree.screenshot_ref), bbox) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == ErrorKind::Validation => Ok(None),
        Err(e) => Err(e),
    }
}

struct Target<'a> {
    bbox: Option<BoundingBox>,
    ui_type: Option<&'a str>,
    crop_stats: Option<CropStats>,
}

fn grounding_records(
    out: &mut SynthOutput,
    image: &ImageInfo,
    id: &str,
    actions: &[GroundingAction],
    target: &Target,
) -> Result<()> {
    for (k, a) in actions.iter().enumerate() {
        let rid = format!("{id}/{k}");
        let built = build_grounding_record(
            image,
            &next_move_text(&a.instantiated_instruction),
            a,
            SystemPrompt::ComputerUse,
        );
        let Some(mut r) = out.absorb(&rid, built)? else {
            continue;
        };
        r.source = Some("component".into());
        r.meta = Some(RecordMeta {
            id: rid,
            instruction: Some(a.instantiated_instruction.clone()),
            ui_type: target.ui_type.map(str::to_string),
            bbox: target.bbox,
            click: Some(a.coordinate),
            crop_stats: target.crop_stats,
        });
        out.records.push(r);
    }
    Ok(())
}

fn samples(d: &ActionDetail, cfg: &SynthConfig) -> usize {
    match d.action_space_type {
        ActionSpaceType::None | ActionSpaceType::Unique => 1,
        _ => cfg.samples_per_space,
    }
}

fn synth_element(
    set: &CandidateSet,
    node: &ElementNode,
    client: &Client,
    cfg: &SynthConfig,
) -> Result<SynthOutput> {
    let mut out = SynthOutput::default();
    let ctx = ElementContext::from_tree(&set.tree_id, &set.tree, node);
    let key = format!("{}/{}", set.tree_id, node.id);
    let Some(annotation) = out.absorb(&key, gen_element_annotation(&ctx, client))? else {
        return Ok(out);
    };
    if !annotation.usable() {
        out.skip(&key, "annotation failed the visibility or atomicity check");
        return Ok(out);
    }
    let image = frame(set, cfg)?;
    layout_records(&mut out, &image, &key, &node.bbox, &annotation)?;

    let target = Target {
        bbox: Some(node.bbox),
        ui_type: Some(&annotation.ui_type),
        crop_stats: stats(cfg, set, &node.bbox)?,
    };
    for i in 0..annotation.possible_actions.len() {
        let id = format!("{key}/a{i}");
        let Some(d) = out.absorb(&id, gen_element_action_detail(&ctx, &annotation, i, client))?
        else {
            continue;
        };
        let seed = derive_seed(cfg.seed, &format!("ground/{id}"));
        if let Some(actions) = out.absorb(&id, ground_action_detail(&d, seed, samples(&d, cfg)))? {
            grounding_records(&mut out, &image, &id, &actions, &target)?;
        }
    }
    let id = format!("{key}/continuous");
    if let Some(Some(d)) = out.absorb(&id, gen_continuous_detail(&ctx, &annotation, client))? {
        let seed = derive_seed(cfg.seed, &format!("ground/{id}"));
        if let Some(actions) =
            out.absorb(&id, ground_action_detail(&d, seed, cfg.samples_per_space))?
        {
            grounding_records(&mut out, &image, &id, &actions, &target)?;
        }
    }
    Ok(out)
}

fn layout_records(
    out: &mut SynthOutput,
    image: &ImageInfo,
    key: &str,
    bbox: &BoundingBox,
    annotation: &ElementAnnotation,
) -> Result<()> {
    for (suffix, built) in [
        (
            "describe",
            build_description_record(image, bbox, annotation),
        ),
        (
            "locate",
            build_layout_grounding_record(image, bbox, annotation),
        ),
    ] {
        let id = format!("{key}/{suffix}");
        if let Some(mut r) = out.absorb(&id, built)? {
            r.source = Some("layout".into());
            r.meta = Some(RecordMeta {
                id,
                ui_type: Some(annotation.ui_type.clone()),
                bbox: Some(*bbox),
                ..RecordMeta::default()
            });
            out.records.push(r);
        }
    }
    Ok(())
}

/// Smallest candidate containing the point, used as the target of a
/// component-level action.
fn target_node<'a>(set: &'a CandidateSet, a: &GroundingAction) -> Option<&'a ElementNode> {
    set.candidates
        .iter()
        .filter(|n| n.bbox.contains(a.coordinate))
        .min_by(|x, y| x.bbox.area().total_cmp(&y.bbox.area()))
}

fn synth_component(set: &CandidateSet, client: &Client, cfg: &SynthConfig) -> Result<SynthOutput> {
    let mut out = SynthOutput::default();
    let Some(info) = &set.tree.component else {
        return Ok(out);
    };
    let code = match (&info.code, &info.source) {
        (Some(c), _) => c.clone(),
        (None, Some(p)) => {
            let p = cfg.image_root.join(p);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?
        }
        (None, None) => String::new(),
    };
    let comp = ComponentContext {
        id: set.tree_id.clone(),
        name: info.name.clone(),
        code,
        screenshot: ImageRef::file(&set.tree.screenshot_ref),
    };
    let key = format!("{}/component", set.tree_id);
    let Some(intents) = out.absorb(&key, gen_action_intents(&comp, client))? else {
        return Ok(out);
    };
    let image = frame(set, cfg)?;
    for (i, intent) in intents.iter().enumerate() {
        let id = format!("{key}/i{i}");
        let Some(d) = out.absorb(&id, gen_action_detail(intent, i, &comp, &set.tree, client))?
        else {
            continue;
        };
        let seed = derive_seed(cfg.seed, &format!("ground/{id}"));
        let Some(actions) = out.absorb(&id, ground_action_detail(&d, seed, samples(&d, cfg)))?
        else {
            continue;
        };
        for (k, a) in actions.iter().enumerate() {
            let node = target_node(set, a);
            let target = Target {
                bbox: node.map(|n| n.bbox),
                ui_type: None,
                crop_stats: match node {
                    Some(n) => stats(cfg, set, &n.bbox)?,
                    None => None,
                },
            };
            grounding_records(
                &mut out,
                &image,
                &format!("{id}/{k}"),
                std::slice::from_ref(a),
                &target,
            )?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub rules: RuleConfig,
    pub llm: bool,
    pub visual: bool,
    pub image_root: PathBuf,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            rules: RuleConfig::default(),
            llm: false,
            visual: false,
            image_root: PathBuf::from("."),
        }
    }
}

/// Apply the rule filter, then optionally the model reviewers. Records with
/// no instruction pass untouched. Returns kept records and one report line
/// per input record.
pub fn filter_records(
    records: Vec<Record>,
    client: Option<&Client>,
    cfg: &FilterConfig,
    exec: Exec,
) -> Result<(Vec<Record>, Vec<ReportLine>)> {
    if (cfg.llm || cfg.visual) && client.is_none() {
        return Err(Error::invalid("model filters need a provider client"));
    }
    let verdicts = exec.try_map(&records, |r| verdict(r, client, cfg))?;
    let mut kept = Vec::new();
    let mut report = Vec::with_capacity(records.len());
    for (r, v) in records.into_iter().zip(verdicts) {
        let keep = v.keep;
        report.push(ReportLine::new(r.key(), v));
        if keep {
            kept.push(r);
        }
    }
    Ok((kept, report))
}

fn verdict(r: &Record, client: Option<&Client>, cfg: &FilterConfig) -> Result<Verdict> {
    let Some(meta) = &r.meta else {
        return Ok(Verdict::pass());
    };
    let Some(instruction) = &meta.instruction else {
        return Ok(Verdict::pass());
    };
    let v = rule_filter_with(
        &cfg.rules,
        instruction,
        meta.ui_type.as_deref(),
        meta.crop_stats.as_ref(),
    );
    if !v.keep {
        return Ok(v);
    }
    let Some(client) = client else {
        return Ok(v);
    };
    if cfg.llm {
        let v = llm_instruction_filter(&meta.id, instruction, client)?;
        if !v.keep {
            return Ok(v);
        }
    }
    if cfg.visual {
        if let (Some(bbox), Some(click), Some(img)) = (meta.bbox, meta.click, r.image()) {
            let dims = ImageDims::new(img.width, img.height);
            let inputs =
                VisualInputs::for_action(cfg.image_root.join(&img.image), &dims, &bbox, click)?;
            return llm_visual_filter(&meta.id, instruction, &inputs, client);
        }
    }
    Ok(Verdict::pass())
}

/// Strip meta, compress and validate; also returns the manifest.
pub fn build(records: Vec<Record>) -> Result<(Vec<Record>, DatasetManifest)> {
    let out = finalize(records)?;
    let manifest = DatasetManifest::from_records(&out);
    Ok((out, manifest))
}

/// Ground office tasks into computer-use records tagged by application.
pub fn office_records(
    tasks: &[OfficeTask],
    resize: &ResizeConfig,
    exec: Exec,
) -> Result<Vec<Record>> {
    office_records_with(tasks, DEFAULT_DRAG_OFFSET, resize, exec)
}

pub fn office_records_with(
    tasks: &[OfficeTask],
    drag_offset: [f64; 2],
    resize: &ResizeConfig,
    exec: Exec,
) -> Result<Vec<Record>> {
    exec.try_map(tasks, |t| {
        let mut action = t.ground(drag_offset)?;
        action.instantiated_instruction = t.instruction.clone();
        let image = ImageInfo::with_resize(
            t.image.path.clone(),
            ImageDims::new(t.image.width, t.image.height),
            resize,
        )?;
        let mut r = build_grounding_record(
            &image,
            &next_move_text(&t.instruction),
            &action,
            SystemPrompt::ComputerUse,
        )?;
        if let Some(id) = &t.image_id {
            r.image_id = id.clone();
        }
        r.source = Some(t.target.source().into());
        r.meta = Some(RecordMeta {
            id: t.id.clone(),
            instruction: Some(t.instruction.clone()),
            click: Some(action.coordinate),
            ..RecordMeta::default()
        });
        Ok(r)
    })
}
