use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::record::Record;
use crate::error::{Error, Result};
use crate::geometry::round_half_up;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub images: usize,
    pub lines: usize,
    pub turns: usize,
}

/// One line of the dataset as tracked by the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub image: String,
    pub turns: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceEntry {
    #[serde(flatten)]
    pub counts: Counts,
    pub records: Vec<Entry>,
}

impl SourceEntry {
    fn from_entries(records: Vec<Entry>) -> Self {
        let images: BTreeSet<&str> = records.iter().map(|e| e.image.as_str()).collect();
        SourceEntry {
            counts: Counts {
                images: images.len(),
                lines: records.len(),
                turns: records.iter().map(|e| e.turns).sum(),
            },
            records,
        }
    }
}

/// Per-source image/line/turn counts plus the ids they cover.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub sources: BTreeMap<String, SourceEntry>,
    pub total: Counts,
}

impl DatasetManifest {
    pub fn from_records(records: &[Record]) -> Self {
        let mut by_source: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        for r in records {
            by_source
                .entry(r.source_tag().to_string())
                .or_default()
                .push(Entry {
                    id: r.image_id.clone(),
                    image: r.image().map(|i| i.image.clone()).unwrap_or_default(),
                    turns: r.turns(),
                });
        }
        Self::from_sources(by_source)
    }

    fn from_sources(by_source: BTreeMap<String, Vec<Entry>>) -> Self {
        let sources: BTreeMap<String, SourceEntry> = by_source
            .into_iter()
            .map(|(k, v)| (k, SourceEntry::from_entries(v)))
            .collect();
        let all_images: BTreeSet<&str> = sources
            .values()
            .flat_map(|s| s.records.iter().map(|e| e.image.as_str()))
            .collect();
        let total = Counts {
            images: all_images.len(),
            lines: sources.values().map(|s| s.counts.lines).sum(),
            turns: sources.values().map(|s| s.counts.turns).sum(),
        };
        DatasetManifest { sources, total }
    }

    /// `(source, id)` of every line.
    pub fn ids(&self) -> BTreeSet<(&str, &str)> {
        self.sources
            .iter()
            .flat_map(|(name, s)| {
                s.records
                    .iter()
                    .map(move |e| (name.as_str(), e.id.as_str()))
            })
            .collect()
    }

    /// Plain-text table: source, images, lines, turns.
    pub fn summary_table(&self) -> String {
        let mut rows = vec![[
            "Source".to_string(),
            "# Image".into(),
            "# Line".into(),
            "# Turn".into(),
        ]];
        for (name, s) in &self.sources {
            rows.push([
                name.clone(),
                s.counts.images.to_string(),
                s.counts.lines.to_string(),
                s.counts.turns.to_string(),
            ]);
        }
        rows.push([
            "total".into(),
            self.total.images.to_string(),
            self.total.lines.to_string(),
            self.total.turns.to_string(),
        ]);
        let widths: Vec<usize> = (0..4)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            out.push_str(&format!(
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}\n",
                r[0],
                r[1],
                r[2],
                r[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            ));
        }
        out
    }
}

fn rank_key(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

/// Per-source sample of `fraction` of the lines (half-up, at least one for a
/// non-empty source). Each source is ranked by a seeded hash of the id and
/// the prefix is taken, so smaller fractions are subsets of larger ones.
pub fn stratified_subset(m: &DatasetManifest, fraction: f64, seed: u64) -> Result<DatasetManifest> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "subset fraction {fraction} is outside (0, 1]"
        )));
    }
    let mut by_source = BTreeMap::new();
    for (name, s) in &m.sources {
        let n = s.records.len();
        let k = if n == 0 {
            0
        } else {
            (round_half_up(fraction * n as f64) as usize).clamp(1, n)
        };
        let mut ranked: Vec<(usize, [u8; 32])> = s
            .records
            .iter()
            .enumerate()
            .map(|(i, e)| (i, rank_key(seed, &e.id)))
            .collect();
        ranked.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut keep: Vec<usize> = ranked.into_iter().take(k).map(|(i, _)| i).collect();
        keep.sort_unstable();
        by_source.insert(
            name.clone(),
            keep.into_iter().map(|i| s.records[i].clone()).collect(),
        );
    }
    Ok(DatasetManifest::from_sources(by_source))
}

/// Records listed in `m` under their source, in input order.
pub fn select_records(records: Vec<Record>, m: &DatasetManifest) -> Vec<Record> {
    let ids = m.ids();
    records
        .into_iter()
        .filter(|r| ids.contains(&(r.source_tag(), r.image_id.as_str())))
        .collect()
}
