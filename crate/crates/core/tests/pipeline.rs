use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use groundsynth_core::element::SizeFilter;
use groundsynth_core::par::Exec;
use groundsynth_core::pipeline::{
    filter_records, ingest_trees, load_trees, read_candidates, synthesize, write_candidates,
    CandidateSet, FilterConfig, SynthConfig, SynthOutput,
};
use groundsynth_core::provider::{Client, ScriptedMock};
use groundsynth_core::ErrorKind;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn candidates() -> Vec<CandidateSet> {
    let trees = load_trees(&fixtures().join("trees")).unwrap();
    ingest_trees(&trees, &SizeFilter::default(), Exec::Sequential).unwrap()
}

fn mock() -> Client {
    Client::mock(ScriptedMock::load(&fixtures().join("mock/pipeline.json")).unwrap())
}

fn synth() -> SynthOutput {
    let cfg = SynthConfig {
        seed: 7,
        image_root: fixtures(),
        ..SynthConfig::default()
    };
    synthesize(&candidates(), &mock(), &cfg, Exec::Parallel).unwrap()
}

fn ids(set: &CandidateSet) -> Vec<&str> {
    set.candidates.iter().map(|n| n.id.as_str()).collect()
}

#[test]
fn ingest_drops_duplicates_tiny_and_hidden_nodes() {
    let sets = candidates();
    let slider = sets.iter().find(|s| s.tree_id == "slider_panel").unwrap();
    let got = ids(slider);
    assert!(got.contains(&"reset") && !got.contains(&"reset_wrap"));
    assert!(!got.contains(&"dot"));
    assert!(!got.contains(&"tooltip"));
    assert!(got.contains(&"track"));
}

#[test]
fn candidates_round_trip_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let sets = candidates();
    write_candidates(&path, &sets).unwrap();
    let back = read_candidates(&path).unwrap();
    assert_eq!(back.len(), sets.len());
    for (a, b) in sets.iter().zip(&back) {
        assert_eq!(a.tree_id, b.tree_id);
        assert_eq!(ids(a), ids(b));
        assert_eq!(a.tree.nodes.len(), b.tree.nodes.len());
    }
}

#[test]
fn malformed_annotation_is_skipped_not_fatal() {
    let out = synth();
    assert!(!out.records.is_empty());
    assert!(
        out.skipped
            .iter()
            .any(|s| s.id.starts_with("settings_form/form")),
        "{:?}",
        out.skipped
    );
    let sources: BTreeMap<_, usize> = out.records.iter().fold(BTreeMap::new(), |mut m, r| {
        *m.entry(r.source_tag().to_string()).or_default() += 1;
        m
    });
    assert!(
        sources.contains_key("component") && sources.contains_key("layout"),
        "{sources:?}"
    );
}

#[test]
fn sequential_and_parallel_synthesis_agree() {
    let cfg = SynthConfig {
        seed: 11,
        image_root: fixtures(),
        ..SynthConfig::default()
    };
    let sets = candidates();
    let a = synthesize(&sets, &mock(), &cfg, Exec::Sequential).unwrap();
    let b = synthesize(&sets, &mock(), &cfg, Exec::Parallel).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.skipped, b.skipped);
}

#[test]
fn filter_drops_planted_records() {
    let cfg = FilterConfig {
        llm: true,
        visual: true,
        image_root: fixtures(),
        ..FilterConfig::default()
    };
    let out = synth();
    let n = out.records.len();
    let (kept, report) = filter_records(out.records, Some(&mock()), &cfg, Exec::Parallel).unwrap();
    assert_eq!(report.len(), n);
    let dropped: Vec<_> = report.iter().filter(|l| !l.keep).collect();
    assert_eq!(kept.len() + dropped.len(), n);
    for rule in ["R1", "R6", "R7"] {
        assert!(
            dropped.iter().any(|l| l.rule_id.as_deref() == Some(rule)),
            "no {rule} drop: {dropped:?}"
        );
    }
    assert!(
        dropped.iter().any(|l| l.id.contains("subscribe")),
        "{dropped:?}"
    );
}

#[test]
fn model_filters_need_a_client() {
    let cfg = FilterConfig {
        llm: true,
        ..FilterConfig::default()
    };
    let err = filter_records(Vec::new(), None, &cfg, Exec::Sequential).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Validation);
}

#[test]
fn missing_mock_response_aborts_synthesis() {
    let empty = Client::mock(ScriptedMock::strict(Vec::new()));
    let cfg = SynthConfig {
        image_root: fixtures(),
        ..SynthConfig::default()
    };
    let err = synthesize(&candidates(), &empty, &cfg, Exec::Sequential).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Provider);
}
