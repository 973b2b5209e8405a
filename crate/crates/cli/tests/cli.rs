use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TEMPLATES: &str = "U00:%x[0,0]\nU01:%x[-1,0]\nU02:%x[-1,0]/%x[0,0]\nB\n";

fn sapo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sapo"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Temporary directory with a generated training corpus, held-out corpus and
/// template file.
fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    for (name, seed, count) in [("train.txt", "7", "120"), ("heldout.txt", "8", "40")] {
        let out = sapo(p, &["generate", "--count", count, "--seed", seed, "--output", name]);
        assert_eq!(code(&out), 0, "{out:?}");
    }
    fs::write(p.join("tpl.txt"), TEMPLATES).unwrap();
    dir
}

fn train(dir: &Path, algo: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--algo",
        algo,
        "--train",
        "train.txt",
        "--templates",
        "tpl.txt",
        "--heldout",
        "heldout.txt",
        "--model-out",
        "model.txt",
        "--curves",
        "curve.csv",
    ];
    args.extend_from_slice(extra);
    if !extra.contains(&"--epochs") {
        args.extend_from_slice(&["--epochs", "3"]);
    }
    sapo(dir, &args)
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    for name in ["a.txt", "b.txt"] {
        let out = sapo(p, &["generate", "--count", "100", "--seed", "7", "--output", name]);
        assert_eq!(code(&out), 0);
        assert_eq!(stdout(&out).lines().count(), 1);
    }
    assert_eq!(fs::read(p.join("a.txt")).unwrap(), fs::read(p.join("b.txt")).unwrap());
    sapo(p, &["generate", "--count", "100", "--seed", "8", "--output", "c.txt"]);
    assert_ne!(fs::read(p.join("a.txt")).unwrap(), fs::read(p.join("c.txt")).unwrap());
}

#[test]
fn sapo_training_writes_model_and_curve() {
    let dir = workspace();
    let p = dir.path();
    let out = train(p, "sapo", &[]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert_eq!(stdout(&out).lines().count(), 1);
    assert!(stdout(&out).contains("heldout_accuracy="));
    let curve = fs::read_to_string(p.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert!(curve.starts_with("epoch,objective,heldout_metric,w_complexity,epoch_seconds\n"));
    assert!(curve.lines().skip(1).all(|l| l.ends_with(',')));
    assert!(fs::read_to_string(p.join("model.txt")).unwrap().contains("meta\talgorithm\tsapo"));
}

#[test]
fn timing_column_is_opt_in() {
    let dir = workspace();
    let p = dir.path();
    assert_eq!(code(&train(p, "perc", &["--timing"])), 0);
    let curve = fs::read_to_string(p.join("curve.csv")).unwrap();
    for line in curve.lines().skip(1) {
        let seconds: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(seconds > 0.0);
    }
}

#[test]
fn every_algorithm_trains_reproducibly() {
    let dir = workspace();
    let p = dir.path();
    let algos = ["sapo", "crf-sgd", "perc", "perc-avg", "mira", "mira-avg", "mira-nbest", "mira-nbest-avg"];
    for algo in algos {
        let extra: &[&str] = if algo == "sapo" || algo.starts_with("mira-nbest") {
            &["--search", "beam", "--beam", "4"]
        } else {
            &[]
        };
        let first = train(p, algo, extra);
        assert_eq!(code(&first), 0, "{algo}: {first:?}");
        let model = fs::read(p.join("model.txt")).unwrap();
        let curve = fs::read(p.join("curve.csv")).unwrap();
        let second = train(p, algo, extra);
        assert_eq!(stdout(&first), stdout(&second), "{algo}");
        assert_eq!(model, fs::read(p.join("model.txt")).unwrap(), "{algo}");
        assert_eq!(curve, fs::read(p.join("curve.csv")).unwrap(), "{algo}");
    }
}

#[test]
fn invalid_flags_are_validation_errors() {
    let dir = workspace();
    let p = dir.path();
    let cases: &[(&str, &[&str])] = &[
        ("perc", &["--n", "5"]),
        ("mira", &["--lr", "0.1"]),
        ("crf-sgd", &["--search", "beam"]),
        ("sapo", &["--mira-c", "1"]),
        ("sapo", &["--beam", "10"]),
        ("sapo", &["--epochs", "0"]),
        ("sapo", &["--n", "0"]),
        ("sapo", &["--lr", "-1"]),
        ("sapo", &["--lr-decay", "2"]),
        ("sapo", &["--l2", "-0.5"]),
        ("sapo", &["--lr", "1", "--l2", "500"]),
    ];
    for (algo, extra) in cases {
        let out = train(p, algo, extra);
        assert_eq!(code(&out), 1, "{algo} {extra:?}: {out:?}");
        assert!(stdout(&out).is_empty());
        assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1, "{algo} {extra:?}: {out:?}");
    }
    assert!(!p.join("model.txt").exists());
    assert_eq!(code(&sapo(p, &["train", "--algo", "nope"])), 1);
    assert_eq!(code(&sapo(p, &["frobnicate"])), 1);
}

#[test]
fn missing_and_malformed_files_are_io_errors() {
    let dir = workspace();
    let p = dir.path();
    let out = sapo(p, &["decode", "--model", "absent.txt", "--input", "train.txt", "--output", "o.txt"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.txt"));
    fs::write(p.join("ragged.txt"), "a B\nb c D\n").unwrap();
    let out = sapo(p, &["train", "--algo", "perc", "--train", "ragged.txt", "--templates", "tpl.txt"]);
    assert_eq!(code(&out), 2);
    fs::write(p.join("bad_model.txt"), "version\t99\n").unwrap();
    let out = sapo(p, &["decode", "--model", "bad_model.txt", "--input", "train.txt", "--output", "o.txt"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn diverging_training_is_a_numeric_error() {
    let dir = workspace();
    let out = train(dir.path(), "sapo", &["--lr", "1e308", "--l2", "0"]);
    assert_eq!(code(&out), 3, "{out:?}");
}

#[test]
fn decoding_the_training_data_reproduces_the_training_accuracy() {
    let dir = workspace();
    let p = dir.path();
    assert_eq!(code(&train(p, "perc-avg", &[])), 0);
    let out = sapo(p, &["decode", "--model", "model.txt", "--input", "train.txt", "--output", "pred.txt"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let line = stdout(&out);
    let field = |key: &str| -> f64 {
        line.split_whitespace()
            .find_map(|f| f.strip_prefix(key))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(field("accuracy=") + 1e-6 >= field("model_train_accuracy="), "{line}");

    // decode output carries gold then prediction, which eval reads directly
    let out = sapo(p, &["eval", "--gold", "pred.txt"]);
    assert_eq!(code(&out), 0);
    assert!((field("accuracy=") - stdout(&out)[9..17].parse::<f64>().unwrap()).abs() < 1e-6);
}

fn blocks(text: &str) -> Vec<(f64, Vec<String>)> {
    let mut out = Vec::new();
    for block in text.split("\n\n").filter(|b| !b.trim().is_empty()) {
        let mut lines = block.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# sequence "));
        let prob: f64 = header.rsplit(' ').next().unwrap().parse().unwrap();
        out.push((prob, lines.map(|l| l.rsplit(' ').next().unwrap().to_string()).collect()));
    }
    out
}

#[test]
fn nbest_output_is_normalized_and_consistent_with_decode() {
    let dir = workspace();
    let p = dir.path();
    assert_eq!(code(&train(p, "sapo", &[])), 0);
    let args = |extra: &[&'static str]| -> Vec<&'static str> {
        let mut a = vec!["decode", "--model", "model.txt", "--input", "heldout.txt"];
        a.extend_from_slice(extra);
        a
    };
    assert_eq!(code(&sapo(p, &args(&["--output", "plain.txt"]))), 0);
    assert_eq!(code(&sapo(p, &args(&["--output", "one.txt", "--nbest", "1"]))), 0);
    let plain = fs::read_to_string(p.join("plain.txt")).unwrap();
    let plain_tags: Vec<Vec<String>> = plain
        .split("\n\n")
        .filter(|b| !b.trim().is_empty())
        .map(|b| b.lines().map(|l| l.rsplit(' ').next().unwrap().to_string()).collect())
        .collect();
    let one = blocks(&fs::read_to_string(p.join("one.txt")).unwrap());
    assert_eq!(one.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>(), plain_tags);
    assert!(one.iter().all(|(prob, _)| (prob - 1.0).abs() <= 1e-12));

    assert_eq!(code(&sapo(p, &args(&["--output", "five.txt", "--nbest", "5"]))), 0);
    let text = fs::read_to_string(p.join("five.txt")).unwrap();
    let mut sums = std::collections::BTreeMap::new();
    for (header, (prob, _)) in text.lines().filter(|l| l.starts_with('#')).zip(blocks(&text)) {
        let seq: usize = header.split(' ').nth(2).unwrap().parse().unwrap();
        *sums.entry(seq).or_insert(0.0) += prob;
    }
    assert_eq!(sums.len(), plain_tags.len());
    assert!(sums.values().all(|s: &f64| (s - 1.0).abs() <= 1e-9));

    let out = sapo(p, &["nbest", "--model", "model.txt", "--input", "heldout.txt", "--output", "beam.txt", "--n", "5", "--search", "beam", "--beam", "50"]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert_eq!(fs::read_to_string(p.join("beam.txt")).unwrap(), text);
    assert_eq!(code(&sapo(p, &args(&["--output", "z.txt", "--nbest", "0"]))), 1);
}

#[test]
fn column_mismatch_is_rejected() {
    let dir = workspace();
    let p = dir.path();
    assert_eq!(code(&train(p, "perc", &[])), 0);
    fs::write(p.join("wide.txt"), "a b c d\n").unwrap();
    let out = sapo(p, &["decode", "--model", "model.txt", "--input", "wide.txt", "--output", "o.txt"]);
    assert_eq!(code(&out), 1, "{out:?}");
}

#[test]
fn eval_scores_identical_files_as_perfect() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("g.txt"), "He B-NP\nreckons B-VP\nthe B-NP\ncurrent I-NP\n").unwrap();
    let out = sapo(p, &["eval", "--gold", "g.txt", "--pred", "g.txt"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("accuracy=1.000000"));
    let out = sapo(p, &["eval", "--gold", "g.txt", "--pred", "g.txt", "--metric", "chunk-f1", "--per-tag", "t.csv"]);
    assert!(stdout(&out).starts_with("chunk_f1=1.000000"), "{out:?}");
    assert!(fs::read_to_string(p.join("t.csv")).unwrap().contains("NP,"));
    fs::write(p.join("short.txt"), "He B-NP\n").unwrap();
    assert_eq!(code(&sapo(p, &["eval", "--gold", "g.txt", "--pred", "short.txt"])), 1);
}

#[test]
fn diagnose_exhaustive_n_has_no_tail() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("t.txt"), "a X\nb Y\na X\n\nb Y\nb X\na Y\n").unwrap();
    fs::write(p.join("tpl.txt"), TEMPLATES).unwrap();
    let out = sapo(p, &["train", "--algo", "sapo", "--train", "t.txt", "--templates", "tpl.txt", "--epochs", "2", "--model-out", "m.txt"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let out = sapo(p, &["diagnose", "--model", "m.txt", "--input", "t.txt", "--n-list", "1,8", "--output", "d.csv"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let csv = fs::read_to_string(p.join("d.csv")).unwrap();
    let row = |n: &str| csv.lines().find(|l| l.starts_with(&format!("{n},"))).unwrap().to_string();
    assert!(row("1").rsplit(',').next().unwrap().parse::<f64>().unwrap() > 0.0);
    assert_eq!(row("8").rsplit(',').next().unwrap(), "0");
    assert_eq!(code(&sapo(p, &["diagnose", "--model", "m.txt", "--input", "t.txt", "--n-list", "0"])), 1);
}

#[test]
fn help_lists_flags_with_defaults() {
    let dir = TempDir::new().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("train", &["--algo", "--n", "--lr", "--l2", "--epochs", "--seed", "--search", "--beam", "--curves", "--model-out", "--lr-decay", "--mira-c", "--heldout"]),
        ("decode", &["--model", "--input", "--output", "--nbest"]),
        ("nbest", &["--n", "--search", "--beam"]),
        ("eval", &["--metric", "--per-tag"]),
        ("diagnose", &["--n-list", "--l2"]),
        ("generate", &["--count", "--seed", "--separability"]),
    ];
    for (cmd, flags) in cases {
        let out = sapo(dir.path(), &[cmd, "--help"]);
        assert_eq!(code(&out), 0);
        let help = stdout(&out);
        for flag in *flags {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
        let optional = help.lines().filter(|l| l.trim_start().starts_with("--") && !l.contains("--help"));
        for line in optional {
            let required = ["--algo", "--train ", "--templates", "--model ", "--input", "--output", "--gold", "--pred", "--curves", "--model-out", "--heldout", "--per-tag", "--timing"]
                .iter()
                .any(|f| line.trim_start().starts_with(f));
            assert!(required || line.contains("[default"), "{cmd}: {line}");
        }
    }
}
