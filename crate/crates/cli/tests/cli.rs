//! Command-line behaviour: output formats, determinism and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixattn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fixattn")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dump_patterns_match_golden_files() {
    assert_eq!(stdout(&fixattn(&["dump-patterns", "--kind", "prev", "--length", "7"])), golden("prev_token_7.csv"));
    assert_eq!(stdout(&fixattn(&["dump-patterns", "--kind", "4", "--length", "7"])), golden("left_context_7.csv"));
    let word = fixattn(&["dump-patterns", "--kind", "current", "--sentence", "a master of science fic@@ tion .", "--word"]);
    assert_eq!(stdout(&word), golden("current_word_fiction.csv"));
    assert_eq!(stdout(&fixattn(&["dump-patterns", "--kind", "last", "--length", "1"])), "1.0\n");
}

#[test]
fn usage_errors_exit_one() {
    let out = fixattn(&["train", "--heads", "9F", "--out", "unused"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for label in ["8L", "7Ftoken+1L", "7Fword+1L", "8Ftoken", "1L"] {
        assert!(err.contains(label), "{err}");
    }
    assert_eq!(fixattn(&["dump-patterns", "--kind", "sideways", "--length", "3"]).status.code(), Some(1));
    assert_eq!(fixattn(&["dump-patterns", "--kind", "prev", "--length", "3", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(fixattn(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn params_table_reports_base_deltas() {
    let text = stdout(&fixattn(&["params", "--base"]));
    let row = |label: &str| -> Vec<String> {
        text.lines()
            .find(|l| l.starts_with(&format!("{label}\t")))
            .unwrap()
            .split('\t')
            .map(String::from)
            .collect()
    };
    assert_eq!(row("8L")[5], "0");
    assert_eq!(row("7Ftoken+1L")[5], "2752512");
    assert_eq!(row("8Ftoken")[5], (2752512 + 393216).to_string());
    let json: serde_json::Value = serde_json::from_str(&stdout(&fixattn(&["params", "--json", "--d-model", "16", "--enc-layers", "1"]))).unwrap();
    assert!(json["presets"].as_array().unwrap().len() == 5);
}

#[test]
fn train_translate_evaluate_compose() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("copy");
    stdout(&fixattn(&["gen-data", "--task", "copy", "--vocab-size", "8", "--sentences", "120", "--test", "20", "--max-sent-len", "5", "--out-prefix", s(&prefix)]));
    let model = dir.path().join("model");
    let src = dir.path().join("copy.src");
    let tgt = dir.path().join("copy.tgt");
    let log = stdout(&fixattn(&[
        "train", "--src", s(&src), "--tgt", s(&tgt), "--d-model", "16", "--d-ff", "16", "--steps", "20", "--log-every", "10", "--batch-tokens", "60", "--out", s(&model),
    ]));
    assert!(log.starts_with("step,loss,token_accuracy,seconds\n"));
    assert_eq!(log.lines().count(), 3);

    let test_src = dir.path().join("copy.test.src");
    let test_ref = dir.path().join("copy.test.tgt");
    let a = stdout(&fixattn(&["translate", "--model", s(&model), "--input", s(&test_src)]));
    let b = stdout(&fixattn(&["translate", "--model", s(&model), "--input", s(&test_src), "--threads", "3"]));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 20);

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(stdout(&fixattn(&["translate", "--model", s(&model), "--input", s(&empty)])), "");
    let unk = dir.path().join("unk.txt");
    std::fs::write(&unk, "never seen tokens\n").unwrap();
    assert_eq!(stdout(&fixattn(&["translate", "--model", s(&model), "--input", s(&unk)])).lines().count(), 1);

    let json: serde_json::Value = serde_json::from_str(&stdout(&fixattn(&[
        "evaluate", "--model", s(&model), "--src", s(&test_src), "--ref", s(&test_ref), "--by-length", "--json",
    ])))
    .unwrap();
    for key in ["bleu", "precisions", "bp", "buckets"] {
        assert!(json.get(key).is_some(), "{key}");
    }

    let fixture = dir.path().join("copy.test.contrastive.tsv");
    let c: serde_json::Value = serde_json::from_str(&stdout(&fixattn(&["score-contrastive", "--model", s(&model), "--fixture", s(&fixture), "--json"]))).unwrap();
    assert!(c.get("accuracy").is_some());

    let hyps = dir.path().join("hyps.txt");
    std::fs::write(&hyps, &a).unwrap();
    let p: serde_json::Value = serde_json::from_str(&stdout(&fixattn(&["bootstrap", "--hyps-a", s(&hyps), "--hyps-b", s(&hyps), "--ref", s(&test_ref), "--resamples", "50", "--json"]))).unwrap();
    assert_eq!(p["p_value"], 1.0);
    assert_eq!(p["wins_a"], 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(fixattn(&["translate", "--model", s(&missing), "--input", s(&missing)]).status.code(), Some(2));
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    std::fs::write(&a, "x y\nz\n").unwrap();
    std::fs::write(&b, "x y\n").unwrap();
    let out = fixattn(&["train", "--src", s(&a), "--tgt", s(&b), "--steps", "1", "--out", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
}
