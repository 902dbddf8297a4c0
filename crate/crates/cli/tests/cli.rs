use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segwords"))
        .args(args)
        .env("SEGWORDS_THREADS", "2")
        .output()
        .expect("run segwords")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn must(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

const SMALL_SPEC: &str = "num_utterances = 14\nseed = 3\n";

/// Synthesizes and prepares a 14-utterance corpus (10/2/2 split).
fn small_prepared(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.toml");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    must(run(&["synth", "--spec", s(&spec), "--out", s(&dir.join("corpus"))]));
    let prep = dir.join("prep");
    must(run(&[
        "prepare",
        "--manifest",
        s(&dir.join("corpus/manifest.csv")),
        "--annotations",
        s(&dir.join("corpus/annotations.csv")),
        "--out",
        s(&prep),
    ]));
    prep
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    for out in ["a", "b"] {
        must(run(&["synth", "--spec", s(&spec), "--out", s(&dir.path().join(out))]));
    }
    for f in ["manifest.csv", "annotations.csv", "wav/synth_0007.wav"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("a/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 15);
    assert_eq!(manifest.lines().filter(|l| l.ends_with(",test")).count(), 2);
}

#[test]
fn malformed_synth_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown", "num_utterances = 5\nbogus = 1\n"),
        ("split", "num_utterances = 5\n[split]\ntrain = 1\nval = 1\ntest = 1\n"),
        ("range", "word_duration_ms = [400.0, 100.0]\n"),
    ] {
        let spec = dir.path().join(format!("{name}.toml"));
        std::fs::write(&spec, text).unwrap();
        let out = run(&["synth", "--spec", s(&spec), "--out", s(&dir.path().join(name))]);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
}

#[test]
fn prepare_writes_one_label_line_per_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let prep = small_prepared(dir.path());
    let labels = std::fs::read_to_string(prep.join("labels.txt")).unwrap();
    assert_eq!(labels.lines().count(), 14);
    let aug = std::fs::read_to_string(prep.join("labels_train_aug.txt")).unwrap();
    assert_eq!(aug.lines().count(), 10);
    let widths: Vec<usize> = labels
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().split(' ').count())
        .collect();
    assert!(
        widths.windows(2).all(|w| w[0] == w[1]),
        "labels are padded to one length"
    );
    let stats = std::fs::read_to_string(prep.join("stats.txt")).unwrap();
    assert!(stats.starts_with("mean="));
}

#[test]
fn prepare_without_annotations_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    must(run(&[
        "synth",
        "--spec",
        s(&spec),
        "--out",
        s(&dir.path().join("corpus")),
    ]));
    let out = run(&[
        "prepare",
        "--manifest",
        s(&dir.path().join("corpus/manifest.csv")),
        "--out",
        s(&dir.path().join("prep")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("synth_0000"));
}

#[test]
fn train_is_deterministic_and_logs_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let prep = small_prepared(dir.path());
    for m in ["m1.txt", "m2.txt"] {
        must(run(&[
            "train",
            "--prepared",
            s(&prep),
            "--out",
            s(&dir.path().join(m)),
            "--max-epochs",
            "15",
        ]));
    }
    let a = std::fs::read(dir.path().join("m1.txt")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("m2.txt")).unwrap());
    let log = std::fs::read_to_string(dir.path().join("m1.txt.log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,train_loss,val_r"));
    assert!(log.lines().count() >= 3);

    let pred = dir.path().join("pred.csv");
    must(run(&[
        "segment",
        "--prepared",
        s(&prep),
        "--model",
        s(&dir.path().join("m1.txt")),
        "--out",
        s(&pred),
        "--segments",
        s(&dir.path().join("seg.csv")),
    ]));
    assert!(std::fs::read_to_string(&pred)
        .unwrap()
        .starts_with("utterance_id,time_s\n"));
    let report = must(run(&[
        "eval",
        "--pred",
        s(&pred),
        "--refs",
        s(&prep.join("refs_test.csv")),
    ]));
    assert!(report.contains("r_value="));
}

#[test]
fn divergent_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let prep = small_prepared(dir.path());
    let out = run(&[
        "train",
        "--prepared",
        s(&prep),
        "--out",
        s(&dir.path().join("m.txt")),
        "--learning-rate",
        "1e308",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn segment_rejects_frame_duration_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "segment",
        "--logits",
        s(&golden().join("logits")),
        "--frame-ms",
        "20",
        "--out",
        s(&dir.path().join("p.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_of_references_against_themselves_is_perfect() {
    let refs = golden().join("refs.csv");
    let report = must(run(&["eval", "--pred", s(&refs), "--refs", s(&refs)]));
    assert!(report.contains("r_value=1.000000\n"), "{report}");
    assert!(report.contains("os=0.000000\n"));
}

#[test]
fn eval_rejects_predictions_for_unknown_utterances() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p.csv");
    std::fs::write(&pred, "utterance_id,time_s\nnobody,0.5\n").unwrap();
    let out = run(&["eval", "--pred", s(&pred), "--refs", s(&golden().join("refs.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_from_rates_reproduces_published_row() {
    let out = must(run(&["eval", "--from-rates", "0.8999,0.7928,-0.1187"]));
    let get = |k: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(k)?.strip_prefix('=')?.parse().ok())
            .unwrap()
    };
    assert!((get("f_value") - 0.8427).abs() <= 0.002);
    assert!((get("r_value") - 0.8489).abs() <= 0.002);
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let refs = golden().join("refs.csv");
    for (name, text) in [
        ("version", "version = 2\n"),
        ("unknown", "version = 1\n[eval]\nfoo = 1\n"),
    ] {
        let cfg = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let out = run(&["eval", "--config", s(&cfg), "--pred", s(&refs), "--refs", s(&refs)]);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let cfg = dir.path().join("ok.toml");
    std::fs::write(&cfg, "version = 1\n[eval]\ntolerance_ms = 20.0\n").unwrap();
    let report = must(run(&[
        "eval",
        "--config",
        s(&cfg),
        "--pred",
        s(&refs),
        "--refs",
        s(&refs),
    ]));
    assert!(report.contains("tolerance_s=0.020000"));
}

#[test]
fn sweep_over_tolerance_and_empty_values() {
    let dir = tempfile::tempdir().unwrap();
    let prep = small_prepared(dir.path());
    let out = must(run(&[
        "sweep",
        "--prepared",
        s(&prep),
        "--axis",
        "tolerance",
        "--values",
        "10,40",
        "--max-epochs",
        "5",
    ]));
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("axis,value,n_hit"));
    let hits = |r: &str| r.split(',').nth(2).unwrap().parse::<usize>().unwrap();
    assert!(hits(rows[2]) >= hits(rows[1]));

    let out = run(&["sweep", "--prepared", s(&prep), "--axis", "selection", "--values", ""]);
    assert_eq!(out.status.code(), Some(2));
}
