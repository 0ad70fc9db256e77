use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use groundsynth_core::dataset::{synthesize_refusals_with, PoolItem, RefusalImage};
use groundsynth_core::element::{parse_element_tree, ElementTree, SizeFilter};
use groundsynth_core::eval::{
    aggregate_with, known_element_types, BenchmarkSample, Prediction, SampleImage,
};
use groundsynth_core::geometry::{BoundingBox, ImageDims, Point, ResizeConfig};
use groundsynth_core::par::Exec;
use groundsynth_core::pipeline::ingest_trees;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STRATEGIES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn scoring_input(n: usize) -> (Vec<BenchmarkSample>, BTreeMap<String, Prediction>) {
    let types = known_element_types();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut samples = Vec::with_capacity(n);
    let mut preds = BTreeMap::new();
    for i in 0..n {
        let id = format!("s{i}");
        let (x, y) = (
            rng.random_range(0..1600u32) as f64,
            rng.random_range(0..900u32) as f64,
        );
        samples.push(BenchmarkSample {
            id: id.clone(),
            image: SampleImage {
                path: format!("img/{}.png", i % 100),
                dims: ImageDims::new(1920, 1080),
            },
            instruction: format!("item {i}"),
            refined_instruction: None,
            bbox: Some(BoundingBox::new(x, y, 120.0, 40.0).unwrap()),
            element_type: types[i % types.len()].to_string(),
            refusal: false,
        });
        let p = Point::new(x + rng.random_range(0..200u32) as f64, y + 20.0);
        preds.insert(
            id,
            Prediction::Point {
                point: p,
                frame: None,
            },
        );
    }
    (samples, preds)
}

fn refusal_input(n: usize) -> (Vec<PoolItem>, Vec<RefusalImage>) {
    let cats = ["component", "layout", "icon", "sheet"];
    let pool = (0..n)
        .map(|i| PoolItem {
            id: format!("q{i}"),
            instruction: format!("Click control {i}"),
            source_image: format!("{}/{}.png", cats[i % 4], i % 500),
            category: cats[i % 4].into(),
        })
        .collect();
    let images = (0..2000)
        .map(|i| RefusalImage {
            path: format!("{}/{}.png", cats[i % 4], i % 500),
            width: 1920,
            height: 1080,
            category: cats[i % 4].into(),
        })
        .collect();
    (pool, images)
}

fn trees(n: usize) -> Vec<(String, ElementTree)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..n)
        .map(|t| {
            let nodes: Vec<String> = (0..60)
                .map(|i| {
                    let (w, h) = (rng.random_range(1..400u32), rng.random_range(1..200u32));
                    let (x, y) = (rng.random_range(0..1500u32), rng.random_range(0..800u32));
                    format!(r#"{{"id": "n{i}", "bbox": [{x}, {y}, {w}, {h}], "interactive": true}}"#)
                })
                .collect();
            let doc = format!(
                r#"{{"image": {{"width": 1920, "height": 1080, "screenshot": "s.png"}}, "nodes": [{}]}}"#,
                nodes.join(",")
            );
            (format!("t{t}"), parse_element_tree(doc.as_bytes()).unwrap())
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let (samples, preds) = scoring_input(20_000);
    let mut g = c.benchmark_group("aggregate");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| aggregate_with(black_box(&samples), black_box(&preds), exec).unwrap())
        });
    }
    g.finish();

    let (pool, images) = refusal_input(50_000);
    let resize = ResizeConfig::default();
    let mut g = c.benchmark_group("refusals");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                synthesize_refusals_with(black_box(&pool), &images, 0.05, 7, &resize, exec).unwrap()
            })
        });
    }
    g.finish();

    let trees = trees(2000);
    let size = SizeFilter::default();
    let mut g = c.benchmark_group("ingest");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ingest_trees(black_box(&trees), &size, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
