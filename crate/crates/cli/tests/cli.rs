use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use collab_disambig::pipeline::{RunConfig, CONFIG_KEYS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collab-disambig"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_matches_golden_normalized_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("norm.tsv");
    let stdout = ok(&["ingest", "--corpus", s(&data("tiny.tsv")), "--out", s(&out)]);
    assert!(stdout.contains("papers\t12"));
    assert!(stdout.contains("skipped\t1"));
    assert_eq!(fs::read_to_string(out).unwrap(), fs::read_to_string(data("tiny_normalized.tsv")).unwrap());
}

#[test]
fn build_scn_matches_golden_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scn.graph");
    ok(&["build-scn", "--eta", "3", "--corpus", s(&data("tiny.tsv")), "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out).unwrap(), fs::read_to_string(data("tiny_scn.graph")).unwrap());
}

#[test]
fn evaluate_prints_metrics_and_counts() {
    let stdout = ok(&[
        "evaluate",
        "--corpus",
        s(&data("tiny.tsv")),
        "--gcn",
        s(&data("tiny_scn.graph")),
        "--gold",
        s(&data("tiny_gold.tsv")),
    ]);
    // gold: 6 + 5 papers; predicted groups {5 graph}, {4 ir}, {P10}, {P11}
    // same-author pairs 15 + 10 = 25, predicted together 10 + 6 = 16, all correct
    assert!(stdout.contains("tp\t16\n"), "{stdout}");
    assert!(stdout.contains("fp\t0\n"));
    assert!(stdout.contains("fn\t9\n"));
    assert!(stdout.contains("tn\t30\n"));
    assert!(stdout.contains("micro_p\t1.0000"));
}

#[test]
fn help_lists_every_default_with_provenance() {
    let help = ok(&["--help"]);
    let cfg = RunConfig::default();
    for key in CONFIG_KEYS {
        let line = help
            .lines()
            .find(|l| l.split_whitespace().next() == Some(key))
            .unwrap_or_else(|| panic!("{key} missing from help"));
        let value = cfg.get(key).unwrap();
        if !value.is_empty() {
            assert!(line.contains(&value), "{line}");
        }
        assert!(line.contains('['), "{line}");
    }
    for key in ["alpha", "sample_rate"] {
        let line = help.lines().find(|l| l.trim_start().starts_with(key)).unwrap();
        assert!(line.contains("published method"), "{line}");
    }
    assert!(help.lines().find(|l| l.trim_start().starts_with("eta")).unwrap().contains("decided here"));
}

#[test]
fn failing_stages_use_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.tsv");
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&["ingest", "--corpus", s(&missing)]), 10);
    assert_eq!(code(&["build-scn", "--corpus", s(&data("tiny.tsv")), "--out", "x", "--eta", "1"]), 2);
    assert_eq!(
        code(&["fit", "--corpus", s(&data("tiny.tsv")), "--scn", s(&missing), "--out", "x"]),
        12
    );
    assert_eq!(
        code(&[
            "evaluate",
            "--corpus",
            s(&data("tiny.tsv")),
            "--gcn",
            s(&data("tiny_scn.graph")),
            "--gold",
            s(&missing)
        ]),
        15
    );
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "eta = three\n").unwrap();
    assert_eq!(code(&["ingest", "--corpus", s(&data("tiny.tsv")), "--config", s(&cfg)]), 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "eta = 50\n").unwrap();
    let out = dir.path().join("scn.graph");
    let from_file = ok(&["build-scn", "--config", s(&cfg), "--corpus", s(&data("tiny.tsv")), "--out", s(&out)]);
    assert!(from_file.contains("relations\t0"));
    let overridden = ok(&[
        "build-scn",
        "--config",
        s(&cfg),
        "--eta",
        "3",
        "--corpus",
        s(&data("tiny.tsv")),
        "--out",
        s(&out),
    ]);
    assert!(overridden.contains("relations\t6"));
}

#[test]
fn stagewise_commands_reproduce_the_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    ok(&["synth", "--out-dir", s(dir.path()), "--papers", "500", "--ambiguous-names", "25"]);
    let corpus = d("corpus.tsv");
    ok(&["build-scn", "--corpus", s(&corpus), "--out", s(&d("scn.graph"))]);
    ok(&["fit", "--corpus", s(&corpus), "--scn", s(&d("scn.graph")), "--out", s(&d("model.txt"))]);
    ok(&[
        "merge",
        "--corpus",
        s(&corpus),
        "--scn",
        s(&d("scn.graph")),
        "--model",
        s(&d("model.txt")),
        "--out",
        s(&d("gcn.graph")),
        "--log",
        s(&d("merges.log")),
    ]);
    let report = ok(&["run", "--corpus", s(&corpus), "--gold", s(&d("gold.tsv")), "--out-dir", s(&d("out"))]);
    assert!(report.contains("stage2\t"));
    for name in ["scn.graph", "model.txt", "gcn.graph", "merges.log"] {
        assert_eq!(
            fs::read_to_string(d(name)).unwrap(),
            fs::read_to_string(d("out").join(name)).unwrap(),
            "{name}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d("out/manifest.json")).unwrap()).unwrap();
    for key in CONFIG_KEYS {
        assert!(manifest["config"].get(key).is_some(), "{key}");
    }

    let first = fs::read_to_string(&corpus).unwrap();
    let line = first.lines().next().unwrap();
    let fields: Vec<&str> = line.split('\t').collect();
    let name = fields[4].split(';').next().unwrap().trim();
    let paper = format!("NEW1\t{}\t{}\t{}\t{}", fields[1], fields[2], fields[3], fields[4]);
    let decision = ok(&[
        "resolve",
        "--corpus",
        s(&corpus),
        "--gcn",
        s(&d("gcn.graph")),
        "--model",
        s(&d("model.txt")),
        "--paper",
        &paper,
        "--name",
        name,
    ]);
    let json: serde_json::Value = serde_json::from_str(decision.trim()).unwrap();
    assert_eq!(json["paper_id"], "NEW1");
    assert!(json["outcome"].get("AttachedTo").is_some(), "{json}");

    let wrong = run(&[
        "resolve",
        "--corpus",
        s(&corpus),
        "--gcn",
        s(&d("gcn.graph")),
        "--model",
        s(&d("model.txt")),
        "--paper",
        &paper,
        "--name",
        "Nobody Here",
    ]);
    assert_eq!(wrong.status.code(), Some(14));
}
