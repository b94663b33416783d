//! End-to-end runs of the `lexaudit` binary over the shipped fixture.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/run.toml")
}

fn lexaudit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexaudit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], out: &Path) -> String {
    let o = lexaudit(args, out);
    assert!(
        o.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn pipeline(out: &Path) -> String {
    let cfg = fixture_config();
    run_ok(&["pipeline", "--config", cfg.to_str().unwrap()], out)
}

const ARTIFACTS: &[&str] = &[
    "corpus.jsonl",
    "feature_space.json",
    "features.matrix",
    "model.json",
    "splits.json",
    "eval_report.txt",
    "eval_report.csv",
    "eval_report.json",
    "baseline_report.txt",
    "baseline_report.csv",
    "baseline_report.json",
    "audit_buckets.csv",
    "audit.svg",
    "audit_summary.txt",
    "frequency_table.csv",
    "report.txt",
    "ingest.manifest.json",
    "featurize.manifest.json",
    "train.manifest.json",
    "evaluate.manifest.json",
    "baseline.manifest.json",
    "audit.manifest.json",
    "pipeline.manifest.json",
];

#[test]
fn fixture_pipeline_writes_every_artifact_quickly() {
    let d = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let stdout = pipeline(d.path());
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "pipeline took {elapsed:?}");
    for a in ARTIFACTS {
        assert!(d.path().join(a).is_file(), "missing {a}");
    }
    assert!(stdout.contains("Out-of-Network User Level"));
    let leftovers: Vec<_> = std::fs::read_dir(d.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn fixture_report_matches_golden() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    let got = std::fs::read_to_string(d.path().join("report.txt")).unwrap();
    let want =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/expected_report.txt")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for name in ARTIFACTS {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn evaluate_with_missing_model_names_the_path() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let cfg = cfg.to_str().unwrap();
    run_ok(&["ingest", "--config", cfg], d.path());
    let missing = d.path().join("no_such_model.json");
    let o = lexaudit(
        &["evaluate", "--config", cfg, "--model", missing.to_str().unwrap()],
        d.path(),
    );
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(missing.to_str().unwrap()), "{err}");

    // the default location is checked the same way
    let o = lexaudit(&["audit", "--config", cfg], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.json"));
}

#[test]
fn stale_upstream_artifact_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let cfg = cfg.to_str().unwrap();
    run_ok(&["ingest", "--config", cfg], d.path());
    run_ok(&["featurize", "--config", cfg], d.path());
    let corpus = d.path().join("corpus.jsonl");
    let text = std::fs::read_to_string(&corpus).unwrap();
    let first_line_end = text.find('\n').unwrap() + 1;
    std::fs::write(&corpus, &text[first_line_end..]).unwrap();
    let o = lexaudit(&["train", "--config", cfg], d.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rerun `ingest`"), "{err}");
}

#[test]
fn downstream_command_before_upstream_fails_with_hint() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let o = lexaudit(&["featurize", "--config", cfg.to_str().unwrap()], d.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("run `ingest` first"));
}

#[test]
fn seed_flag_overrides_and_changes_splits() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let cfg = cfg.to_str().unwrap();
    for d in [a.path(), b.path()] {
        run_ok(&["ingest", "--config", cfg], d);
    }
    run_ok(&["baseline", "--config", cfg], a.path());
    run_ok(&["baseline", "--config", cfg, "--seed", "8"], b.path());
    let ma = std::fs::read_to_string(a.path().join("baseline.manifest.json")).unwrap();
    let mb = std::fs::read_to_string(b.path().join("baseline.manifest.json")).unwrap();
    assert!(ma.contains("\"seed\": 7") && mb.contains("\"seed\": 8"));
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        run_ok(&["generate", "--n", "120", "--dialect", "50", "--seed", "3"], d);
    }
    for f in ["tweets.jsonl", "dialect.jsonl", "communities.toml"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn shipped_fixture_matches_generator() {
    let d = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "generate",
            "--n",
            "60",
            "--positive-fraction",
            "0.4",
            "--dialect",
            "400",
            "--seed",
            "7",
        ],
        d.path(),
    );
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for f in ["tweets.jsonl", "dialect.jsonl", "communities.toml"] {
        assert_eq!(
            std::fs::read(d.path().join(f)).unwrap(),
            std::fs::read(fx.join(f)).unwrap(),
            "{f}"
        );
    }
}
