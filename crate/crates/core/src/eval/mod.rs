//! Benchmark loading, prediction parsing, containment scoring and
//! per-capability reports.

mod capability;
mod predict;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use capability::{capability_of, known_element_types, Capability};
pub use predict::{parse_prediction, Frame, Prediction, PredictionLine, PredictionParser};

use crate::error::{Error, Result};
use crate::geometry::{scale_point, smart_resize_with, BoundingBox, ImageDims, ResizeConfig};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleImage {
    pub path: String,
    #[serde(flatten)]
    pub dims: ImageDims,
}

/// One benchmark row. `bbox` is in the native frame and absent exactly for refusal rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub id: String,
    pub image: SampleImage,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_instruction: Option<String>,
    #[serde(default)]
    pub bbox: Option<BoundingBox>,
    #[serde(default)]
    pub element_type: String,
    #[serde(default)]
    pub refusal: bool,
}

impl BenchmarkSample {
    pub fn capability(&self) -> Result<Capability> {
        if self.refusal {
            return Ok(Capability::Refusal);
        }
        capability_of(&self.element_type)
    }

    pub fn validate(&self) -> Result<()> {
        self.image.dims.validate()?;
        match (self.refusal, &self.bbox) {
            (true, Some(_)) => {
                return Err(Error::invalid(format!(
                    "sample {}: refusal rows must not carry a bbox",
                    self.id
                )))
            }
            (false, None) => {
                return Err(Error::invalid(format!("sample {}: missing bbox", self.id)))
            }
            (false, Some(b)) if !b.is_valid() || !b.within(&self.image.dims.native_frame()) => {
                return Err(Error::invalid(format!(
                    "sample {}: bbox outside the image",
                    self.id
                )))
            }
            _ => {}
        }
        if !self.refusal || !self.element_type.is_empty() {
            capability_of(&self.element_type)?;
        }
        Ok(())
    }

    /// Frame a prediction was made in.
    pub fn frame(&self, frame: Frame, resize: &ResizeConfig) -> Result<ImageDims> {
        match frame {
            Frame::Native => Ok(self.image.dims.native_frame()),
            Frame::Resized => match (
                self.image.dims.resized_width,
                self.image.dims.resized_height,
            ) {
                (Some(w), Some(h)) => Ok(ImageDims::new(w, h)),
                _ => Ok(smart_resize_with(self.image.dims.native_frame(), resize)?.resized_frame()),
            },
        }
    }
}

/// Parse a benchmark JSONL body, enforcing row invariants and unique ids.
pub fn parse_benchmark(text: &str) -> Result<Vec<BenchmarkSample>> {
    let mut out: Vec<BenchmarkSample> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: BenchmarkSample = serde_json::from_str(line)
            .map_err(|e| Error::invalid(format!("benchmark line {}: {e}", i + 1)))?;
        s.validate()?;
        if !seen.insert(s.id.clone()) {
            return Err(Error::DuplicateId(s.id));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_benchmark(&text)
}

/// Attach frames to raw prediction lines. Lines without a frame use `default_frame`.
pub fn resolve_predictions(
    samples: &[BenchmarkSample],
    lines: &[PredictionLine],
    default_frame: Frame,
    parser: &PredictionParser,
    resize: &ResizeConfig,
) -> Result<BTreeMap<String, Prediction>> {
    let by_id: BTreeMap<&str, &BenchmarkSample> =
        samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut out = BTreeMap::new();
    for l in lines {
        let mut p = parser.parse(&l.raw);
        if let (Prediction::Point { frame, .. }, Some(s)) = (&mut p, by_id.get(l.id.as_str())) {
            *frame = Some(s.frame(l.frame.unwrap_or(default_frame), resize)?);
        }
        if out.insert(l.id.clone(), p).is_some() {
            return Err(Error::DuplicateId(l.id.clone()));
        }
    }
    Ok(out)
}

/// Containment scoring. Points are mapped from their declared frame to the
/// native frame first; a point without a frame is taken as native.
pub fn score_sample(s: &BenchmarkSample, p: &Prediction) -> bool {
    match (s.refusal, p) {
        (true, Prediction::Refusal) => true,
        (false, Prediction::Point { point, frame }) => {
            let native = s.image.dims.native_frame();
            let from = frame.unwrap_or(native);
            match (scale_point(*point, &from, &native), &s.bbox) {
                (Ok(q), Some(b)) => b.contains(q),
                _ => false,
            }
        }
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityRow {
    pub capability: Capability,
    pub count: usize,
    pub correct: usize,
    /// Percentage; absent when the bucket is empty.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub id: String,
    pub capability: Capability,
    pub prediction: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub capabilities: Vec<CapabilityRow>,
    pub total: usize,
    pub correct: usize,
    /// Over every sample, refusal rows included.
    pub overall: Option<f64>,
    pub overall_excluding_refusal: Option<f64>,
    /// Sorted by sample id.
    pub samples: Vec<SampleVerdict>,
}

fn pct(correct: usize, count: usize) -> Option<f64> {
    (count > 0).then(|| correct as f64 * 100.0 / count as f64)
}

impl EvalReport {
    pub fn row(&self, c: Capability) -> &CapabilityRow {
        self.capabilities
            .iter()
            .find(|r| r.capability == c)
            .expect("every capability has a row")
    }
}

pub fn aggregate(
    samples: &[BenchmarkSample],
    predictions: &BTreeMap<String, Prediction>,
) -> Result<EvalReport> {
    aggregate_with(samples, predictions, Exec::default())
}

pub fn aggregate_with(
    samples: &[BenchmarkSample],
    predictions: &BTreeMap<String, Prediction>,
    exec: Exec,
) -> Result<EvalReport> {
    let mut ids = BTreeSet::new();
    for s in samples {
        if !ids.insert(s.id.as_str()) {
            return Err(Error::DuplicateId(s.id.clone()));
        }
        if !predictions.contains_key(&s.id) {
            return Err(Error::MissingPrediction(s.id.clone()));
        }
    }
    let mut verdicts = exec.try_map(samples, |s| {
        let p = &predictions[&s.id];
        Ok::<_, Error>(SampleVerdict {
            id: s.id.clone(),
            capability: s.capability()?,
            prediction: p.kind().to_string(),
            correct: score_sample(s, p),
        })
    })?;
    verdicts.sort_by(|a, b| a.id.cmp(&b.id));

    let mut counts: BTreeMap<Capability, (usize, usize)> =
        Capability::ALL.iter().map(|c| (*c, (0, 0))).collect();
    for v in &verdicts {
        let e = counts.get_mut(&v.capability).expect("closed enumeration");
        e.0 += 1;
        e.1 += v.correct as usize;
    }
    let capabilities = Capability::ALL
        .iter()
        .map(|c| {
            let (count, correct) = counts[c];
            CapabilityRow {
                capability: *c,
                count,
                correct,
                accuracy: pct(correct, count),
            }
        })
        .collect();
    let total = verdicts.len();
    let correct = verdicts.iter().filter(|v| v.correct).count();
    let (ref_n, ref_c) = counts[&Capability::Refusal];
    Ok(EvalReport {
        capabilities,
        total,
        correct,
        overall: pct(correct, total),
        overall_excluding_refusal: pct(correct - ref_c, total - ref_n),
        samples: verdicts,
    })
}

/// Original-correct x refined-correct contingency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlipTable {
    pub both_correct: usize,
    pub fixed: usize,
    pub broken: usize,
    pub both_wrong: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedComparison {
    pub original: EvalReport,
    pub refined: EvalReport,
    pub flips: FlipTable,
    /// Refined minus original overall accuracy, in points.
    pub delta: Option<f64>,
    /// Samples without a refined instruction, left out of both reports.
    pub excluded: usize,
}

pub fn compare_refined(
    samples: &[BenchmarkSample],
    original: &BTreeMap<String, Prediction>,
    refined: &BTreeMap<String, Prediction>,
) -> Result<RefinedComparison> {
    let (kept, dropped): (Vec<BenchmarkSample>, Vec<BenchmarkSample>) = samples
        .iter()
        .cloned()
        .partition(|s| s.refined_instruction.is_some());
    let a = aggregate(&kept, original)?;
    let b = aggregate(&kept, refined)?;
    let mut flips = FlipTable::default();
    for (x, y) in a.samples.iter().zip(&b.samples) {
        match (x.correct, y.correct) {
            (true, true) => flips.both_correct += 1,
            (false, true) => flips.fixed += 1,
            (true, false) => flips.broken += 1,
            (false, false) => flips.both_wrong += 1,
        }
    }
    let delta = match (a.overall, b.overall) {
        (Some(x), Some(y)) => Some(y - x),
        _ => None,
    };
    Ok(RefinedComparison {
        original: a,
        refined: b,
        flips,
        delta,
        excluded: dropped.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use proptest::prelude::*;

    fn sample(id: &str, ty: &str, bbox: Option<(f64, f64, f64, f64)>) -> BenchmarkSample {
        BenchmarkSample {
            id: id.into(),
            image: SampleImage {
                path: "s.png".into(),
                dims: ImageDims::new(1000, 800),
            },
            instruction: "do it".into(),
            refined_instruction: None,
            bbox: bbox.map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap()),
            element_type: ty.into(),
            refusal: bbox.is_none(),
        }
    }

    fn point(x: f64, y: f64) -> Prediction {
        Prediction::Point {
            point: Point::new(x, y),
            frame: None,
        }
    }

    #[test]
    fn scoring_rules() {
        let s = sample("a", "Button", Some((100.0, 100.0, 50.0, 20.0)));
        assert!(score_sample(&s, &point(125.0, 110.0)));
        assert!(score_sample(&s, &point(150.0, 120.0)));
        assert!(!score_sample(&s, &point(99.0, 110.0)));
        assert!(!score_sample(&s, &Prediction::Refusal));
        assert!(!score_sample(&s, &Prediction::Unparsable(String::new())));
        let r = sample("r", "", None);
        assert!(score_sample(&r, &Prediction::Refusal));
        assert!(!score_sample(&r, &point(1.0, 1.0)));
    }

    #[test]
    fn invariants_are_enforced() {
        let mut s = sample("a", "Button", Some((1.0, 1.0, 5.0, 5.0)));
        s.refusal = true;
        assert!(s.validate().is_err());
        let mut s = sample("a", "Button", None);
        s.refusal = false;
        assert!(s.validate().is_err());
        assert!(sample("a", "Widget", Some((1.0, 1.0, 5.0, 5.0)))
            .validate()
            .is_err());
    }

    #[test]
    fn all_refuse_and_empty_bucket() {
        let mut samples = vec![sample("r0", "", None), sample("r1", "", None)];
        samples.push(sample("b", "Button", Some((0.0, 0.0, 10.0, 10.0))));
        let preds = samples
            .iter()
            .map(|s| (s.id.clone(), Prediction::Refusal))
            .collect();
        let rep = aggregate(&samples, &preds).unwrap();
        assert_eq!(rep.row(Capability::Refusal).accuracy, Some(100.0));
        assert_eq!(rep.row(Capability::ElementRecognition).accuracy, Some(0.0));
        assert_eq!(rep.row(Capability::TextMatching).accuracy, None);
        assert_eq!(rep.overall_excluding_refusal, Some(0.0));
        let mut missing = preds.clone();
        missing.remove("b");
        assert!(matches!(
            aggregate(&samples, &missing),
            Err(Error::MissingPrediction(_))
        ));
    }

    #[test]
    fn refined_flips() {
        let mut samples: Vec<BenchmarkSample> = (0..100)
            .map(|i| {
                let mut s = sample(&format!("s{i:03}"), "Icon", Some((0.0, 0.0, 10.0, 10.0)));
                s.refined_instruction = Some("plain".into());
                s
            })
            .collect();
        samples.push(sample("unrefined", "Icon", Some((0.0, 0.0, 10.0, 10.0))));
        let hit = point(5.0, 5.0);
        let miss = point(500.0, 500.0);
        let mut orig = BTreeMap::new();
        let mut refd = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            let o = if i < 50 || (50..52).contains(&i) {
                hit.clone()
            } else {
                miss.clone()
            };
            // 50..52 break under refinement, 60..70 are fixed
            let r = if i < 50 || (60..70).contains(&i) {
                hit.clone()
            } else {
                miss.clone()
            };
            orig.insert(s.id.clone(), o);
            refd.insert(s.id.clone(), r);
        }
        let c = compare_refined(&samples, &orig, &refd).unwrap();
        assert_eq!(c.excluded, 1);
        assert_eq!((c.flips.fixed, c.flips.broken), (10, 2));
        assert!((c.delta.unwrap() - 8.0).abs() < 1e-9);
        let same = compare_refined(&samples, &orig, &orig).unwrap();
        assert_eq!((same.flips.fixed, same.flips.broken), (0, 0));
    }

    #[test]
    fn resized_predictions_are_mapped_back() {
        let s = sample("a", "Icon", Some((630.0, 350.0, 20.0, 20.0)));
        let resized = s.frame(Frame::Resized, &ResizeConfig::default()).unwrap();
        assert_eq!((resized.width, resized.height), (1008, 812));
        let p = Prediction::Point {
            point: Point::new(640.0 * 1008.0 / 1000.0, 360.0 * 812.0 / 800.0),
            frame: Some(resized),
        };
        assert!(score_sample(&s, &p));
        assert!(!score_sample(
            &s,
            &point(640.0 * 1008.0 / 1000.0 + 20.0, 360.0)
        ));
    }

    proptest! {
        #[test]
        fn scoring_is_frame_invariant(
            x in 0.0f64..1000.0, y in 0.0f64..800.0, k in 1u32..4,
            bx in 0.0f64..900.0, by in 0.0f64..700.0
        ) {
            let s = sample("a", "Icon", Some((bx, by, 100.0, 100.0)));
            let base = point(x, y);
            let scaled = Prediction::Point {
                point: Point::new(x * k as f64, y * k as f64),
                frame: Some(ImageDims::new(1000 * k, 800 * k)),
            };
            prop_assert_eq!(score_sample(&s, &base), score_sample(&s, &scaled));
        }

        #[test]
        fn overall_is_weighted_mean_and_order_free(
            rows in proptest::collection::vec((0usize..5, any::<bool>()), 1..80),
            rot in 0usize..80
        ) {
            let types = ["Label", "Icon", "Tab", "Slider", ""];
            let mut samples = Vec::new();
            let mut preds = BTreeMap::new();
            for (i, (t, hit)) in rows.iter().enumerate() {
                let id = format!("s{i}");
                let s = if *t == 4 {
                    sample(&id, "", None)
                } else {
                    sample(&id, types[*t], Some((0.0, 0.0, 10.0, 10.0)))
                };
                let p = match (*t == 4, *hit) {
                    (true, true) => Prediction::Refusal,
                    (false, true) => point(1.0, 1.0),
                    _ => Prediction::Unparsable("x".into()),
                };
                preds.insert(id, p);
                samples.push(s);
            }
            let rep = aggregate(&samples, &preds).unwrap();
            let weighted: f64 = rep.capabilities.iter()
                .filter_map(|r| r.accuracy.map(|a| a * r.count as f64))
                .sum::<f64>() / rep.total as f64;
            prop_assert!((weighted - rep.overall.unwrap()).abs() < 1e-9);
            let n = samples.len();
            samples.rotate_left(rot % n);
            prop_assert_eq!(aggregate(&samples, &preds).unwrap(), rep);
            let junk = samples.iter().map(|s| (s.id.clone(), Prediction::Unparsable(String::new()))).collect();
            prop_assert_eq!(aggregate(&samples, &junk).unwrap().overall, Some(0.0));
        }
    }
}
