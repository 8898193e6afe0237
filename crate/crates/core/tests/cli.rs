use std::path::Path;
use std::process::{Command, Output};

fn codraw(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codraw")).args(args).current_dir(cwd).env("CODRAW_LOG", "error").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(codraw(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(codraw(&["similarity", "--truth", "a.json"], dir.path()).status.code(), Some(2));
    assert_eq!(codraw(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn data_errors_exit_3_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = codraw(&["stats", "--corpus", "missing.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[data-error]: "), "{err}");
}

#[test]
fn similarity_prints_six_decimals_and_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let truth = r#"[{"type":0,"flip":"faceLeft","size":"small","x":0.2,"y":0.1},
                    {"type":10,"flip":"faceLeft","size":"large","x":0.8,"y":0.6}]"#;
    let pred = r#"[{"type":0,"flip":"faceLeft","size":"small","x":0.2,"y":0.1},
                   {"type":10,"flip":"faceLeft","size":"large","x":0.1,"y":0.6}]"#;
    std::fs::write(dir.path().join("t.json"), truth).unwrap();
    std::fs::write(dir.path().join("p.json"), pred).unwrap();
    let out = codraw(&["similarity", "--truth", "t.json", "--pred", "p.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // unary (5 + 4.3) / 2, pairwise -1 / 2
    assert_eq!(stdout(&out).trim(), "4.150000");

    let out = codraw(&["similarity", "--truth", "t.json", "--pred", "p.json", "--breakdown"], dir.path());
    let b: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(b["n_int"], 2);
    assert_eq!(b["pairwise_total"], -0.5);

    std::fs::write(dir.path().join("w.json"), "[5, 0, 0, 0, 0, 0, 0, 0]").unwrap();
    let out = codraw(&["similarity", "--truth", "t.json", "--pred", "p.json", "--weights", "w.json"], dir.path());
    assert_eq!(stdout(&out).trim(), "5.000000");

    std::fs::write(dir.path().join("w.json"), "[5, 1]").unwrap();
    let out = codraw(&["similarity", "--truth", "t.json", "--pred", "p.json", "--weights", "w.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn pipeline_and_crosstalk_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = codraw(&["synth", "--out", "rel", "--seed", "2", "--train", "40", "--val", "6", "--test", "6"], d);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = codraw(&["ingest", "--release", "rel", "--out", "corpus.jsonl"], d);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("dialogs 52 "));
    assert!(d.join("corpus.jsonl.manifest.json").exists());

    let out = codraw(&["split", "--corpus", "corpus.jsonl", "--seed", "1", "--hash", "--out", "split.json"], d);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let base = ["eval-pair", "--corpus", "corpus.jsonl", "--split", "split.json", "--teller", "rb:teller_train"];
    let out = codraw(&[&base[..], &["--drawer", "rb:teller_train"]].concat(), d);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).starts_with("error[crosstalk-violation]"));

    let out = codraw(&[&base[..], &["--drawer", "rb:drawer_train"]].concat(), d);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = stdout(&out).split_whitespace().nth(1).unwrap().to_owned();
    assert!(d.join(&report).exists());
    let again = codraw(&[&base[..], &["--drawer", "rb:drawer_train", "--jobs", "3"]].concat(), d);
    assert_eq!(stdout(&again), stdout(&out), "reports are content-addressed and independent of --jobs");

    let out = codraw(&["eval-script", "--corpus", "corpus.jsonl", "--drawer", "rb:drawer_train", "--split-name", "drawer_train"], d);
    assert_eq!(out.status.code(), Some(4), "scoring a drawer on its own training data is refused");

    let out = codraw(&["train-drawer", "--corpus", "corpus.jsonl", "--seed", "0", "--out", "x.json", "--partition", "teller_train"], d);
    assert_eq!(out.status.code(), Some(4));

    let out = codraw(&["eval-pair", "--corpus", "corpus.jsonl", "--teller", "rb:nowhere", "--drawer", "noop"], d);
    assert_eq!(out.status.code(), Some(2));
}
