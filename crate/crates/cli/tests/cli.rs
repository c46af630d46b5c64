use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn mibci(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mibci"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MIBCI_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = mibci(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{
  "name": "small",
  "subjects": 2,
  "base_seed": 5,
  "paradigm": { "runs": 1, "trials_per_run": 20 },
  "evaluation": { "repeats": 1, "folds": 4, "screen_threshold": 0.6 },
  "exports": { "recordings": false, "plans": true, "psd": false, "patterns": false },
  "output_dir": "from-config"
}"#,
    )
    .unwrap();
    path
}

#[test]
fn version_lists_formats() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--version", "-V"] {
        let text = ok(&[flag], dir.path());
        assert!(text.starts_with("mibci 0.1.0"), "{text}");
        for f in ["csv-v1", "tsv-v1", "epk-v1", "plan-v1"] {
            assert!(text.contains(f), "{text}");
        }
    }
}

#[test]
fn usage_and_validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        mibci(&["plan", "--paradigm", "nope"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(mibci(&[], dir.path()).status.code(), Some(1));
    let missing = mibci(&["filter", "--in", "absent.epk", "--out", "x.epk"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    let bad = mibci(
        &[
            "plan",
            "--paradigm",
            "arrow",
            "--seed",
            "1",
            "--trials-per-run",
            "7",
            "--out",
            "p.json",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(!dir.path().join("p.json").exists());
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.csv"), "value\n1\n2\n4\n").unwrap();
    std::fs::write(dir.path().join("y.csv"), "value\n2\n3\n5\n").unwrap();
    let out = mibci(&["ttest", "--x", "x.csv", "--y", "y.csv"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        &[
            "--dry-run",
            "plan",
            "--paradigm",
            "writing",
            "--seed",
            "3",
            "--out",
            "plan.json",
        ],
        dir.path(),
    );
    assert!(text.contains("would write plan.json"), "{text}");
    assert!(text.contains("config="), "{text}");

    let cfg = small_config(dir.path());
    let stages = ok(&["run", cfg.to_str().unwrap(), "--dry-run"], dir.path());
    assert!(stages.lines().count() > 1, "{stages}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mibci"));
        cmd.arg("run")
            .arg(&cfg)
            .args(extra)
            .current_dir(dir.path())
            .env_remove("MIBCI_OUTPUT_DIR");
        if let Some(v) = env {
            cmd.env("MIBCI_OUTPUT_DIR", v);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&[], None);
    assert!(dir.path().join("from-config/report.json").exists());
    run(&[], Some("from-env"));
    assert!(dir.path().join("from-env/report.json").exists());
    run(&["--out-dir", "from-flag"], Some("from-env-2"));
    assert!(dir.path().join("from-flag/report.json").exists());
    assert!(!dir.path().join("from-env-2").exists());

    let a = std::fs::read(dir.path().join("from-config/report.json")).unwrap();
    let b = std::fs::read(dir.path().join("from-flag/report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 16);
    let plan = std::fs::read_to_string(dir.path().join("from-config/plans/S01_writing.json")).unwrap();
    assert!(plan.contains(report["config_hash"].as_str().unwrap()));
    let strip = |bytes: &[u8]| {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        v["config"]["output_dir"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn likert_and_ttest_reproduce_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(
        &["likert", "--in", examples().join("tableI.csv").to_str().unwrap()],
        dir.path(),
    );
    assert!(text.contains("arrow: 3.6±1.1 (n = 10)"), "{text}");
    assert!(text.contains("writing: 2.4±1.1 (n = 10)"), "{text}");
    let t = ok(
        &[
            "ttest",
            "--x",
            examples().join("tableI_arrow.csv").to_str().unwrap(),
            "--y",
            examples().join("tableI_writing.csv").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(t.contains("t = 4.129") && t.contains("df = 9"), "{t}");
}

#[test]
fn subcommand_chain_tags_outputs_with_hash() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "plan",
            "--paradigm",
            "arrow",
            "--seed",
            "11",
            "--runs",
            "1",
            "--trials-per-run",
            "40",
            "--out",
            "plan.json",
        ],
        vec![
            "simulate",
            "--plan",
            "plan.json",
            "--seed",
            "12",
            "--out",
            "rec.csv",
            "--markers",
            "m.tsv",
        ],
        vec![
            "epoch",
            "--in",
            "rec.csv",
            "--markers",
            "m.tsv",
            "--out",
            "raw.epk",
        ],
        vec![
            "filter", "--in", "raw.epk", "--low", "8", "--high", "30", "--out", "f.epk",
        ],
        vec!["psd", "--in", "f.epk", "--class", "R", "--out", "psd.csv"],
        vec!["csp-fit", "--in", "f.epk", "--pairs", "2", "--out", "csp.json"],
        vec!["patterns-export", "--model", "csp.json", "--out", "patterns.csv"],
        vec![
            "features", "--in", "f.epk", "--model", "csp.json", "--out", "feat.csv",
        ],
        vec!["train", "--in", "feat.csv", "--out", "svm.json"],
        vec![
            "crossval",
            "--in",
            "rec.csv",
            "--markers",
            "m.tsv",
            "--repeats",
            "2",
            "--folds",
            "5",
            "--seed",
            "1",
            "--out",
            "cv.json",
        ],
    ];
    for step in &steps {
        let text = ok(step, d);
        assert!(text.contains("wrote"), "{step:?}: {text}");
    }
    for file in [
        "plan.json",
        "rec.csv",
        "m.tsv",
        "psd.csv",
        "csp.json",
        "patterns.csv",
        "feat.csv",
        "svm.json",
        "cv.json",
    ] {
        let text = std::fs::read_to_string(d.join(file)).unwrap();
        assert!(text.contains("config"), "{file} lacks a config hash");
    }
    let cv: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("cv.json")).unwrap()).unwrap();
    let acc = cv["summary"]["mean_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(cv["provenance"]["seed"], 1);
}
