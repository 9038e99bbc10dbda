use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use topicscan::cli::{read_rows, CurveRow, Failure};
use topicscan::corpus::{load_uci, synthesize, SynthParams};
use topicscan::VerdictRecord;

fn topicscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topicscan"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn synth(dir: &Path, topics: usize, seed: u64, docs: usize) -> PathBuf {
    let out = dir.join(format!("syn{topics}-{seed}"));
    let o = topicscan(&[
        "synth",
        "--topics",
        &topics.to_string(),
        "--words",
        "60",
        "--docs",
        &docs.to_string(),
        "--doc-len",
        "30",
        "--seed",
        &seed.to_string(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scan.toml");
    fs::write(&path, body).unwrap();
    path
}

fn small_config(data: &Path, extra: &str) -> String {
    format!(
        "out = \"results\"\nt_min = 2\nt_max = 3\nseeds = [0]\niterations = 5\nfold_in_iterations = 5\n{extra}\n\
         [[datasets]]\nname = \"toy\"\ndocword = \"{}\"\nvocab = \"{}\"\n",
        data.join("docword.txt").display(),
        data.join("vocab.txt").display()
    )
}

fn rows_per_metric(rows: &[CurveRow]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.metric.as_str().to_string()).or_default() += 1;
    }
    m
}

#[test]
fn scan_writes_one_row_per_metric_and_topic_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 1, 40);
    let cfg = write_config(dir.path(), &small_config(&data, ""));
    let o = topicscan(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let rows = read_rows(&dir.path().join("results/curves/toy.csv")).unwrap();
    let per_metric = rows_per_metric(&rows);
    assert_eq!(per_metric.len(), 26);
    assert!(per_metric.values().all(|&n| n == 2), "{per_metric:?}");
    let rpc: Vec<&CurveRow> = rows.iter().filter(|r| r.metric.as_str() == "rpc").collect();
    assert_eq!((rpc[0].topics, rpc[0].defined), (2, 0));
    assert_eq!((rpc[1].topics, rpc[1].defined), (3, 1));
    let failures: Vec<Failure> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results/failures-scan.json")).unwrap()).unwrap();
    assert!(failures.is_empty());
}

#[test]
fn rerun_is_idempotent_and_force_recomputes_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 2, 40);
    let cfg = write_config(dir.path(), &small_config(&data, "metrics = [\"bic\", \"coherence\", \"rpc\"]"));
    let cfg = cfg.to_str().unwrap();
    let curve = dir.path().join("results/curves/toy.csv");

    assert_eq!(code(&topicscan(&["scan", "--config", cfg])), 0);
    let first = fs::read(&curve).unwrap();

    let o = topicscan(&["scan", "--config", cfg]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("0 cells to train, 2 already present"));
    assert_eq!(fs::read(&curve).unwrap(), first);

    let o = topicscan(&["scan", "--config", cfg, "--force", "--workers", "2"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 cells to train, 0 already present"));
    assert_eq!(fs::read(&curve).unwrap(), first);
}

#[test]
fn widening_the_grid_only_trains_new_cells() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 3, 40);
    let cfg_path = write_config(dir.path(), &small_config(&data, "metrics = [\"bic\"]"));
    assert_eq!(code(&topicscan(&["scan", "--config", cfg_path.to_str().unwrap()])), 0);
    let body = small_config(&data, "metrics = [\"bic\"]").replace("t_max = 3", "t_max = 4");
    write_config(dir.path(), &body);
    let o = topicscan(&["scan", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 cells to train, 2 already present"));
    let rows = read_rows(&dir.path().join("results/curves/toy.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.topics).collect::<Vec<_>>(), vec![2, 3, 4]);
}

#[test]
fn missing_vocab_fails_without_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 4, 40);
    fs::remove_file(data.join("vocab.txt")).unwrap();
    let cfg = write_config(dir.path(), &small_config(&data, ""));
    let o = topicscan(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("results/curves/toy.csv").exists());
    let failures: Vec<Failure> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results/failures-scan.json")).unwrap()).unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].dataset, "toy");
    assert!(failures[0].family.is_none());
}

#[test]
fn failing_cells_are_listed_and_the_rest_kept() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 5, 40);
    // two background topics cannot fit a model with T = 2
    let extra = "metrics = [\"bic\"]\n[[families]]\nkind = \"sparse\"\nbackground_count = 2\n";
    let cfg = write_config(dir.path(), &small_config(&data, extra));
    let o = topicscan(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let failures: Vec<Failure> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results/failures-scan.json")).unwrap()).unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!((failures[0].family.as_deref(), failures[0].topics), (Some("sparse"), Some(2)));
    let rows = read_rows(&dir.path().join("results/curves/toy.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].topics, 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "t_min = 9\nt_max = 3\n");
    assert_eq!(code(&topicscan(&["scan", "--config", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&topicscan(&["scan"])), 2);
    assert_eq!(code(&topicscan(&["scan", "--config", "/nonexistent/scan.toml"])), 2);
    let ok = write_config(dir.path(), "");
    assert_eq!(code(&topicscan(&["scan", "--config", ok.to_str().unwrap(), "--workers", "0"])), 2);
    assert_eq!(code(&topicscan(&["frobnicate"])), 2);
}

#[test]
fn stability_curve_counts_determinism_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 6, 60);
    let extra = "[stability]\nsubsamples = 3\nt_max = 4\n";
    let cfg = write_config(dir.path(), &small_config(&data, extra));
    let cfg = cfg.to_str().unwrap();
    let path = dir.path().join("results/curves/toy.instability.csv");

    assert_eq!(code(&topicscan(&["stability", "--config", cfg])), 0);
    let rows = read_rows(&path).unwrap();
    assert_eq!(rows.iter().map(|r| r.topics).collect::<Vec<_>>(), vec![2, 3, 4]);
    assert!(rows.iter().all(|r| r.metric.as_str() == "instability" && (0.0..=1.0).contains(&r.value)));
    let first = fs::read(&path).unwrap();
    assert_eq!(code(&topicscan(&["stability", "--config", cfg, "--force"])), 0);
    assert_eq!(fs::read(&path).unwrap(), first);

    fs::remove_file(data.join("docword.txt")).unwrap();
    let o = topicscan(&["stability", "--config", cfg, "--force"]);
    assert_eq!(code(&o), 1);
    let failures: Vec<Failure> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results/failures-stability.json")).unwrap())
            .unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn report_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 7, 60);
    let body = small_config(&data, "metrics = [\"bic\", \"renyi-1\", \"d-avg-js\"]\nseeds = [0, 1]")
        .replace("t_max = 3", "t_max = 6")
        .replace("seeds = [0]\n", "")
        + "expected = [3, 3]\n";
    let cfg = write_config(dir.path(), &body);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&topicscan(&["scan", "--config", cfg])), 0);
    assert_eq!(code(&topicscan(&["stability", "--config", cfg, "--workers", "1"])), 0);
    let o = topicscan(&["report", "--config", cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let res = dir.path().join("results");
    let verdicts: Vec<VerdictRecord> =
        serde_json::from_str(&fs::read_to_string(res.join("verdicts/toy.json")).unwrap()).unwrap();
    // 3 metrics x 2 seeds plus one instability curve
    assert_eq!(verdicts.len(), 7);

    let perf = fs::read_to_string(res.join("performance.csv")).unwrap();
    let lines: Vec<&str> = perf.lines().collect();
    assert_eq!(lines[0], "metric,jaccard,informativity,expected");
    let metrics: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(metrics, vec!["bic", "d-avg-js", "instability", "renyi-1"]);
    assert_eq!(fs::read_to_string(res.join("performance.txt")).unwrap().lines().count(), 5);

    let plots: Vec<PathBuf> = fs::read_dir(res.join("plots")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(plots.len(), 7);
    for p in plots {
        let text = fs::read_to_string(&p).unwrap();
        assert!(!text.is_empty());
        for line in text.lines() {
            let cols: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(cols.len(), 2, "{}", p.display());
            cols[0].parse::<usize>().unwrap();
            assert!(cols[1].parse::<f64>().unwrap().is_finite());
        }
    }
    let categories = fs::read_to_string(res.join("categories.csv")).unwrap();
    assert_eq!(categories.lines().count(), 1 + 4);
    assert!(!res.join("missing.txt").exists());
}

#[test]
fn report_lists_missing_curves() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3, 8, 40);
    let mut body = small_config(&data, "metrics = [\"bic\"]");
    body += "\n[[datasets]]\nname = \"absent\"\ndocword = \"x.txt\"\nvocab = \"y.txt\"\n";
    let cfg = write_config(dir.path(), &body);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&topicscan(&["scan", "--config", cfg])), 1);
    assert_eq!(code(&topicscan(&["report", "--config", cfg])), 1);
    let res = dir.path().join("results");
    let missing = fs::read_to_string(res.join("missing.txt")).unwrap();
    assert!(missing.contains("absent: no scan curves"));
    let verdicts: Vec<VerdictRecord> =
        serde_json::from_str(&fs::read_to_string(res.join("verdicts/toy.json")).unwrap()).unwrap();
    // two-point curves cannot be banded and are reported as uninformative
    assert_eq!(verdicts.len(), 1);
    assert_eq!(verdicts[0].category, topicscan::Category::Uninformative);
}

#[test]
fn synth_round_trips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), 4, 9, 30);
    let (corpus, dropped) = load_uci(&a.join("docword.txt"), &a.join("vocab.txt")).unwrap();
    assert!(dropped.dropped_doc_ids.is_empty());
    let expected = synthesize::<f64>(&SynthParams {
        topics: 4,
        words: 60,
        docs: 30,
        doc_len: 30,
        concentration: 0.05,
        seed: 9,
    })
    .unwrap();
    let terms = |c: &topicscan::Corpus| c.documents().iter().map(|d| d.terms().to_vec()).collect::<Vec<_>>();
    assert_eq!(terms(&corpus), terms(&expected.corpus));
    let phi = fs::read_to_string(a.join("phi.csv")).unwrap();
    assert_eq!(phi.lines().next().unwrap(), "topic_0,topic_1,topic_2,topic_3");
    assert_eq!(phi.lines().count(), 1 + 60);
    let theta = fs::read_to_string(a.join("theta.csv")).unwrap();
    assert_eq!(theta.lines().count(), 1 + 4);
    assert_eq!(theta.lines().nth(1).unwrap().split(',').count(), 30);

    let again = dir.path().join("again");
    let o = topicscan(&[
        "synth", "--topics", "4", "--words", "60", "--docs", "30", "--doc-len", "30", "--seed", "9", "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    for f in ["docword.txt", "vocab.txt", "phi.csv", "theta.csv", "dataset.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
    let toml = fs::read_to_string(a.join("dataset.toml")).unwrap();
    assert!(toml.contains("expected = [4, 4]"));
}

#[test]
fn synth_single_topic_config_is_scannable() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1, 10, 20);
    let theta = fs::read_to_string(data.join("theta.csv")).unwrap();
    assert_eq!(theta.lines().count(), 2);
    assert!(theta.lines().nth(1).unwrap().split(',').all(|v| v == "1"));
    let toml = fs::read_to_string(data.join("dataset.toml")).unwrap();
    assert!(toml.contains("expected = [1, 1]") && toml.contains("t_min = 1") && toml.contains("t_max = 4"));

    // dataset.toml is itself a scan config
    let cfg = data.join("dataset.toml");
    let body = format!("seeds = [0]\niterations = 3\nmetrics = [\"perplexity\"]\n{toml}");
    fs::write(&cfg, body).unwrap();
    let o = topicscan(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&data.join("results/curves/synthetic.csv")).unwrap();
    let ts: BTreeSet<usize> = rows.iter().map(|r| r.topics).collect();
    assert_eq!(ts, (1..=4).collect());
}

#[test]
fn synth_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert_eq!(code(&topicscan(&["synth", "--topics", "0", "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&topicscan(&["synth", "--out", out.to_str().unwrap()])), 2);
}
