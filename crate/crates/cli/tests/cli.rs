use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lexsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lexsim(args);
    assert!(
        out.status.success(),
        "lexsim {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic dataset with built priors.
fn toy() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "synth", "--out", s(&data), "--seed", "5", "--words", "60", "--nonwords", "30", "--dim", "12",
        "--n-subjects", "3", "--trials-per-subject", "80",
    ]);
    let cfg = data.join("config.toml");
    ok(&["--config", s(&cfg), "build"]);
    (dir, cfg)
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn full_rank_lexicon_builds_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let words = ["back", "lack", "tack", "sack", "hat", "cat", "dog", "frog", "log", "bog"];
    fs::write(dir.path().join("lex.txt"), words.join("\n")).unwrap();
    let mut emb = String::new();
    for (i, w) in words.iter().enumerate() {
        let v: Vec<String> = (0..8).map(|j| ((i * 8 + j) as f64 * 1.37).sin().to_string()).collect();
        emb.push_str(&format!("{w} {}\n", v.join(" ")));
    }
    fs::write(dir.path().join("emb.txt"), emb).unwrap();
    let out = dir.path().join("priors");
    let (lex, embp) = (dir.path().join("lex.txt"), dir.path().join("emb.txt"));
    let args = ["build", "--lexicon", s(&lex), "--embeddings", s(&embp), "--out", s(&out)];
    ok(&args);
    let report = fs::read_to_string(out.join("evaluation.toml")).unwrap();
    assert!(report.contains("comprehension_accuracy_at_1 = 1.0"), "{report}");

    let first: Vec<Vec<u8>> = ["F.lxm", "G.lxm", "D.lxm"].iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    ok(&args);
    let second: Vec<Vec<u8>> = ["F.lxm", "G.lxm", "D.lxm"].iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn missing_embeddings_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (lex, nope) = (dir.path().join("lex.txt"), dir.path().join("nope.txt"));
    fs::write(&lex, "back\n").unwrap();
    let out = lexsim(&["build", "--lexicon", s(&lex), "--embeddings", s(&nope), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("embeddings"));
    let out = lexsim(&["build", "--lexicon", s(&lex), "--out", s(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn simulate_needs_priors() {
    let (dir, cfg) = toy();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = lexsim(&["--config", s(&cfg), "simulate", "--priors", s(&empty)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("priors"));
}

#[test]
fn both_modes_and_subject_filter() {
    let (dir, cfg) = toy();
    let out = dir.path().join("both");
    ok(&["--config", s(&cfg), "simulate", "--mode", "both", "--out", s(&out)]);
    for m in ["static", "dynamic"] {
        assert_eq!(csv_files(&out.join(m)), ["1.csv", "2.csv", "3.csv", "skipped.csv"]);
    }
    assert!(out.join("data_dictionary.csv").exists());

    let sub = dir.path().join("sub");
    ok(&["--config", s(&cfg), "simulate", "--mode", "dynamic", "--subjects", "1,2", "--out", s(&sub)]);
    assert_eq!(csv_files(&sub.join("dynamic")), ["1.csv", "2.csv", "skipped.csv"]);
    assert!(!sub.join("static").exists());
}

fn columns(path: &Path, drop: &[&str]) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            l.split(',')
                .zip(&header)
                .filter(|(_, h)| !drop.contains(h))
                .map(|(v, _)| v.to_string())
                .collect()
        })
        .collect()
}

#[test]
fn zero_rates_match_static_and_compare_is_penalty_free() {
    let (dir, cfg) = toy();
    let out = dir.path().join("zero");
    ok(&["--config", s(&cfg), "simulate", "--eta-fg", "0", "--eta-d", "0", "--out", s(&out)]);
    for f in ["1.csv", "2.csv", "3.csv"] {
        let st = columns(&out.join("static").join(f), &["yes_activation"]);
        let dy = columns(&out.join("dynamic").join(f), &["yes_activation"]);
        assert_eq!(st, dy, "{f}");
        let ya = columns(&out.join("dynamic").join(f), &[]);
        let text = fs::read_to_string(out.join("dynamic").join(f)).unwrap();
        let idx = text.lines().next().unwrap().split(',').position(|h| h == "yes_activation").unwrap();
        assert!(ya.iter().all(|r| r[idx] == "0.0"));
    }
    ok(&["--config", s(&cfg), "compare", "--out", s(&out)]);
    let report = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut aic = std::collections::HashMap::new();
    for line in report.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        aic.insert((f[0].to_string(), f[1].to_string(), f[2].to_string()), f[5].to_string());
    }
    for subj in ["1", "2", "3"] {
        for set in ["words", "nonwords"] {
            let key = |m: &str| (subj.to_string(), set.to_string(), m.to_string());
            assert_eq!(aic[&key("static")], aic[&key("dynamic")]);
        }
    }
}

#[test]
fn compare_single_subject_and_mismatch() {
    let (dir, cfg) = toy();
    let out = dir.path().join("one");
    ok(&["--config", s(&cfg), "simulate", "--subjects", "2", "--out", s(&out)]);
    let stdout = ok(&["--config", s(&cfg), "compare", "--out", s(&out)]);
    assert!(stdout.contains("subjects   1"), "{stdout}");
    let summary = fs::read_to_string(out.join("comparison_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let path = out.join("dynamic").join("2.csv");
    let text = fs::read_to_string(&path).unwrap();
    let trimmed: Vec<&str> = text.lines().collect();
    fs::write(&path, trimmed[..trimmed.len() - 1].join("\n") + "\n").unwrap();
    let res = lexsim(&["--config", s(&cfg), "compare", "--out", s(&out)]);
    assert!(!res.status.success());

    let missing = dir.path().join("nothing");
    assert!(!lexsim(&["--config", s(&cfg), "compare", "--out", s(&missing)]).status.success());
}

#[test]
fn outputs_are_deterministic_across_runs_and_workers() {
    let (dir, cfg) = toy();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["--config", s(&cfg), "simulate", "--workers", "1", "--out", s(&a)]);
    ok(&["--config", s(&cfg), "simulate", "--workers", "4", "--out", s(&b)]);
    ok(&["--config", s(&cfg), "compare", "--out", s(&a)]);
    ok(&["--config", s(&cfg), "compare", "--out", s(&b)]);
    for rel in ["static/1.csv", "dynamic/3.csv", "dynamic/skipped.csv", "comparison.csv", "comparison_summary.csv"] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
    ok(&["--config", s(&cfg), "simulate", "--workers", "2", "--out", s(&a)]);
    assert_eq!(fs::read(a.join("dynamic/2.csv")).unwrap(), fs::read(b.join("dynamic/2.csv")).unwrap());
}

#[test]
fn flags_override_config_and_bad_values_fail() {
    let (dir, cfg) = toy();
    let out = dir.path().join("ov");
    // config says mode = "both"; the flag wins.
    ok(&["--config", s(&cfg), "simulate", "--mode", "static", "--out", s(&out)]);
    assert!(out.join("static").exists() && !out.join("dynamic").exists());
    assert!(!lexsim(&["--config", s(&cfg), "simulate", "--workers", "0", "--out", s(&out)]).status.success());
    assert!(!lexsim(&["--config", s(&cfg), "simulate", "--eta-fg", "-1", "--out", s(&out)]).status.success());
    assert!(!lexsim(&["--config", s(&cfg), "simulate", "--mode", "sideways"]).status.success());
}

#[test]
fn evaluate_rewrites_report() {
    let (dir, cfg) = toy();
    let out = dir.path().join("eval");
    let stdout = ok(&["--config", s(&cfg), "evaluate", "--out", s(&out)]);
    assert!(stdout.contains("comprehension accuracy"));
    let built = fs::read(cfg.parent().unwrap().join("run/priors/evaluation.toml")).unwrap();
    assert_eq!(fs::read(out.join("evaluation.toml")).unwrap(), built);
}
