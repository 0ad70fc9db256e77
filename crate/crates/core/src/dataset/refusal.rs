use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{build_refusal_record, ImageInfo, Record, RecordMeta};
use crate::error::{Error, Result};
use crate::geometry::{ImageDims, ResizeConfig};
use crate::par::Exec;

/// An instruction known to be grounded on `source_image`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolItem {
    pub id: String,
    pub instruction: String,
    pub source_image: String,
    pub category: String,
}

/// A screenshot available for pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefusalImage {
    pub path: String,
    pub width: u32,
    pub height: u32,
    pub category: String,
}

/// Pool of every instruction in grounding records that carry meta.
pub fn pool_from_records(records: &[Record]) -> (Vec<PoolItem>, Vec<RefusalImage>) {
    let mut pool = Vec::new();
    let mut images = Vec::new();
    let mut seen = BTreeSet::new();
    for r in records {
        let (Some(meta), Some(img)) = (&r.meta, r.image()) else {
            continue;
        };
        let Some(instruction) = &meta.instruction else {
            continue;
        };
        let category = r.source_tag().to_string();
        pool.push(PoolItem {
            id: meta.id.clone(),
            instruction: instruction.clone(),
            source_image: img.image.clone(),
            category: category.clone(),
        });
        if seen.insert(img.image.clone()) {
            images.push(RefusalImage {
                path: img.image.clone(),
                width: img.width,
                height: img.height,
                category,
            });
        }
    }
    (pool, images)
}

pub fn synthesize_refusals(
    pool: &[PoolItem],
    images: &[RefusalImage],
    rate: f64,
    seed: u64,
) -> Result<Vec<Record>> {
    synthesize_refusals_with(
        pool,
        images,
        rate,
        seed,
        &ResizeConfig::default(),
        Exec::default(),
    )
}

/// Keep each pool item with probability `rate` and pair it with a screenshot
/// from a different source category.
///
/// Every item draws from its own ChaCha stream, so the output does not depend
/// on the execution strategy.
pub fn synthesize_refusals_with(
    pool: &[PoolItem],
    images: &[RefusalImage],
    rate: f64,
    seed: u64,
    resize: &ResizeConfig,
    exec: Exec,
) -> Result<Vec<Record>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "refusal rate {rate} is outside [0, 1]"
        )));
    }
    let categories: BTreeSet<&str> = pool.iter().map(|p| p.category.as_str()).collect();
    if categories.len() < 2 {
        return Err(Error::CannotCrossPair);
    }
    let frames = exec.try_map(images, |i| {
        ImageInfo::with_resize(i.path.clone(), ImageDims::new(i.width, i.height), resize)
    })?;
    let picked = exec.map_indexed(pool, |idx, item| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        if !rng.random_bool(rate) {
            return None;
        }
        let candidates: Vec<usize> = (0..images.len())
            .filter(|&j| images[j].category != item.category && images[j].path != item.source_image)
            .collect();
        if candidates.is_empty() {
            log::warn!("no cross-category screenshot for pool item {}", item.id);
            return None;
        }
        let j = candidates[rng.random_range(0..candidates.len() as u32) as usize];
        let mut r = build_refusal_record(&frames[j], &item.instruction, &item.source_image);
        r.meta = Some(RecordMeta {
            id: format!("refusal/{}", item.id),
            instruction: Some(item.instruction.clone()),
            ..RecordMeta::default()
        });
        Some(r)
    });
    Ok(picked.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n: usize) -> (Vec<PoolItem>, Vec<RefusalImage>) {
        let cats = ["icon", "layout", "component"];
        let pool = (0..n)
            .map(|i| PoolItem {
                id: format!("p{i}"),
                instruction: format!("Click item {i}"),
                source_image: format!("{}/{}.png", cats[i % 3], i % 17),
                category: cats[i % 3].into(),
            })
            .collect();
        let images = (0..51)
            .map(|i| RefusalImage {
                path: format!("{}/{}.png", cats[i % 3], i % 17),
                width: 1280,
                height: 720,
                category: cats[i % 3].into(),
            })
            .collect();
        (pool, images)
    }

    #[test]
    fn rate_bounds_and_cross_pairing() {
        let (pool, images) = fixture(1000);
        let out = synthesize_refusals(&pool, &images, 0.05, 1).unwrap();
        assert!((30..=70).contains(&out.len()), "{}", out.len());
        for r in &out {
            let p = r.provenance.as_ref().unwrap();
            assert_ne!(p.instruction_source_image, p.paired_image);
            assert_ne!(
                p.instruction_source_image.split('/').next(),
                p.paired_image.split('/').next()
            );
            r.validate().unwrap();
        }
        assert_eq!(out, synthesize_refusals(&pool, &images, 0.05, 1).unwrap());
        assert!(synthesize_refusals(&pool, &images, 0.0, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn strategy_independent() {
        let (pool, images) = fixture(500);
        let cfg = ResizeConfig::default();
        let a = synthesize_refusals_with(&pool, &images, 0.2, 9, &cfg, Exec::Sequential).unwrap();
        let b = synthesize_refusals_with(&pool, &images, 0.2, 9, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_category_pool_is_rejected() {
        let (mut pool, images) = fixture(10);
        pool.iter_mut().for_each(|p| p.category = "icon".into());
        assert!(matches!(
            synthesize_refusals(&pool, &images, 0.5, 1),
            Err(Error::CannotCrossPair)
        ));
    }
}
