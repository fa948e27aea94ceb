mod common;

use std::fs;

use collab_disambig::pipeline::{run_full, run_on_corpus, RunConfig, Stage};
use collab_disambig::similarity::EmbeddingTable;
use collab_disambig::synth::{generate, SynthConfig, SynthCorpus};
use common::*;

fn synth() -> SynthCorpus {
    generate(&SynthConfig {
        seed: 11,
        n_papers: 300,
        n_topics: 4,
        n_teams: 30,
        ambiguous_names: 15,
        ..Default::default()
    })
}

fn run_text(cfg: &RunConfig, s: &SynthCorpus) -> (String, String, usize) {
    let c = index(s.records.clone());
    let emb = EmbeddingTable::hashed_for_corpus(&c, cfg.embedding_dim, cfg.seed).unwrap();
    let out = run_on_corpus(cfg, c, emb, Some(&s.gold)).unwrap();
    (
        out.gcn.to_text(&out.corpus),
        out.fit.params.to_text(),
        out.manifest.counts.merges,
    )
}

#[test]
fn runs_are_deterministic() {
    let s = synth();
    let cfg = RunConfig::default();
    assert_eq!(run_text(&cfg, &s), run_text(&cfg, &s));
}

#[test]
fn unreachable_threshold_keeps_the_scn() {
    let s = synth();
    let mut cfg = RunConfig::default();
    cfg.set("delta", "1e9").unwrap();
    cfg.set("sample_rate", "1").unwrap();
    let c = index(s.records.clone());
    let emb = EmbeddingTable::hashed_for_corpus(&c, cfg.embedding_dim, cfg.seed).unwrap();
    let out = run_on_corpus(&cfg, c, emb, Some(&s.gold)).unwrap();
    assert_eq!(out.manifest.counts.merges, 0);
    assert_eq!(partition_of(&out.gcn, &out.corpus), partition_of(&out.scn, &out.corpus));
    assert_eq!(out.manifest.stage1_metrics, out.manifest.stage2_metrics);
}

#[test]
fn config_text_round_trips() {
    let mut cfg = RunConfig::default();
    cfg.set("families", "gaussian,exponential,gaussian,exponential,multinomial,multinomial").unwrap();
    cfg.set("out_dir", "/tmp/x").unwrap();
    let back = RunConfig::from_text(&cfg.to_text()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    assert!(RunConfig::from_text("bogus = 1").is_err());
    assert!(RunConfig::from_text("eta = 1").unwrap().validate().is_err());
}

#[test]
fn full_run_writes_every_artifact() {
    let s = synth();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.tsv");
    let gold = dir.path().join("gold.tsv");
    fs::write(&corpus, s.corpus_text()).unwrap();
    fs::write(&gold, s.gold.to_text()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.corpus = Some(corpus);
    cfg.gold = Some(gold);
    cfg.out_dir = Some(dir.path().join("out"));
    let manifest = run_full(&cfg).unwrap();
    for name in ["scn.graph", "gcn.graph", "model.txt", "merges.log", "timing.tsv", "manifest.json"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(json["config_hash"], manifest.config_hash.as_str());
    assert_eq!(json["counts"]["merges"], manifest.counts.merges);
    let log = fs::read_to_string(dir.path().join("out/merges.log")).unwrap();
    assert_eq!(log.lines().count(), manifest.counts.merges);
    assert!(manifest.stage2_metrics.is_some());
}

#[test]
fn stage_failures_carry_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.corpus = Some(dir.path().join("missing.tsv"));
    cfg.out_dir = Some(dir.path().join("out"));
    let err = run_full(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
    assert_eq!(err.stage.exit_code(), 10);

    cfg.eta = 1;
    assert_eq!(run_full(&cfg).unwrap_err().stage.exit_code(), 2);

    let codes: Vec<i32> = [
        Stage::Config,
        Stage::Ingest,
        Stage::BuildScn,
        Stage::Fit,
        Stage::Merge,
        Stage::Resolve,
        Stage::Evaluate,
        Stage::Output,
    ]
    .iter()
    .map(|s| s.exit_code())
    .collect();
    assert_eq!(codes, [2, 10, 11, 12, 13, 14, 15, 16]);
}
