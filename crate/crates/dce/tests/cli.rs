use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dce"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FAST: &[&str] = &["--no-sync", "--retry-delay-ms", "0", "-q"];

fn run(out: &Path, batches: u32, arm: &str, seed: u64, extra: &[&str]) -> Output {
    let b = format!("batches={batches}");
    let s = format!("seed={seed}");
    let mut args = vec![
        "run",
        "--out",
        out.to_str().unwrap(),
        "--arm",
        arm,
        "--set",
        &b,
        "--set",
        &s,
        "--set",
        "sim_concepts=600",
    ];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    dce(&args)
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn tsv_value(table: &str, key: &str) -> String {
    table
        .lines()
        .find_map(|l| {
            let mut f = l.split('\t');
            (f.next() == Some(key)).then(|| f.next().unwrap_or("").to_string())
        })
        .unwrap_or_else(|| panic!("{key} missing from\n{table}"))
}

#[test]
fn run_populates_run_dir() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("a");
    let o = run(&out, 6, "dce", 42, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["config.cfg", "runlog.jsonl", "batches.jsonl", "timings.jsonl", "checkpoint.json", "memory/entries.log", "memory/meta"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = run(&out, 6, "dce", 42, &[]);
    assert_eq!(code(&o), 2, "existing run dir must be refused");
}

#[test]
fn pause_and_resume_matches_straight_run() {
    let t = tempfile::tempdir().unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    assert_eq!(code(&run(&a, 9, "dce", 5, &[])), 0);
    assert_eq!(code(&run(&b, 9, "dce", 5, &["--max-batches", "4"])), 0);
    let o = dce(&["analyze", b.to_str().unwrap(), "--out", t.path().join("partial").to_str().unwrap()]);
    assert_eq!(code(&o), 4, "paused run is incomplete input");
    assert!(t.path().join("partial/summary.tsv").exists());
    let mut args = vec!["run", "--resume", b.to_str().unwrap()];
    args.extend_from_slice(FAST);
    let o = dce(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(a.join("runlog.jsonl")).unwrap(), fs::read(b.join("runlog.jsonl")).unwrap());

    let mut args = vec!["run", "--resume", b.to_str().unwrap(), "--set", "tau=0.2"];
    args.extend_from_slice(FAST);
    assert_eq!(code(&dce(&args)), 2, "changed config must not resume");
}

#[test]
fn config_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("x");
    assert_eq!(code(&run(&out, 5, "dce", 1, &["--set", "tau=3"])), 2);
    assert_eq!(code(&run(&out, 5, "dce", 1, &["--set", "volume=11"])), 2);
    let cfg = t.path().join("bad.cfg");
    fs::write(&cfg, "this is not a config\n").unwrap();
    let o = dce(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = dce(&["run", "--arm", "everything", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn analyze_reports_without_touching_the_run() {
    let t = tempfile::tempdir().unwrap();
    let naive = t.path().join("naive");
    assert_eq!(code(&run(&naive, 100, "naive", 42, &[])), 0);
    let before = snapshot(&naive);
    let rep = t.path().join("rep");
    let o = dce(&[
        "analyze",
        naive.to_str().unwrap(),
        "--out",
        rep.to_str().unwrap(),
        "--confusion",
        "--collapse-thresholds",
        "0.80,0.85,0.90",
        "--permutations",
        "200",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(before, snapshot(&naive));

    let collapse = fs::read_to_string(rep.join("collapse.tsv")).unwrap();
    let rates: Vec<f64> = collapse
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 3);
    assert!(rates[0] >= rates[1] && rates[1] >= rates[2], "{rates:?}");

    let confusion = fs::read_to_string(rep.join("confusion.tsv")).unwrap();
    let total: usize = confusion
        .lines()
        .skip(1)
        .take(2)
        .flat_map(|l| l.split('\t').skip(1).map(|x| x.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 500);
    let summary = fs::read_to_string(rep.join("summary.tsv")).unwrap();
    assert_eq!(tsv_value(&summary, "generated"), "500");
    for f in ["series.tsv", "edv_formulations.tsv", "clusters.tsv", "coherence.tsv", "strategy.tsv"] {
        assert!(rep.join(f).exists(), "{f}");
    }
    let series = fs::read_to_string(rep.join("series.tsv")).unwrap();
    assert_eq!(series.lines().count(), 101);

    let plot = t.path().join("plot");
    let o = dce(&["export-plot-data", naive.to_str().unwrap(), "--out", plot.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let emb = fs::read_to_string(plot.join("embeddings.tsv")).unwrap();
    assert_eq!(emb.lines().count(), 501);
    assert_eq!(before, snapshot(&naive));
}

#[test]
fn full_dce_run_reports_zero_collapse() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("dce");
    assert_eq!(code(&run(&d, 100, "dce", 42, &[])), 0);
    let rep = t.path().join("rep");
    let o = dce(&["analyze", d.to_str().unwrap(), "--out", rep.to_str().unwrap(), "--permutations", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(rep.join("summary.tsv")).unwrap();
    assert_eq!(tsv_value(&summary, "collapse_rate@0.85"), "0");
    let strategy = fs::read_to_string(rep.join("strategy.tsv")).unwrap();
    assert_eq!(strategy.lines().filter(|l| l.starts_with("strategy\t")).count(), 4);
}

#[test]
fn sweep_runs_each_value() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("sweep");
    let mut args = vec![
        "sweep", "--param", "delta", "--values", "0.80,0.85,0.90,0.95", "--out", out.to_str().unwrap(),
        "--set", "batches=6", "--set", "sim_concepts=600",
    ];
    args.extend_from_slice(&FAST[..3]);
    let o = dce(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(out.join("comparison.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 4);
    let replayed: Vec<usize> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(replayed.windows(2).all(|w| w[0] <= w[1]), "{replayed:?}");

    let o = dce(&["sweep", "--param", "tau", "--values", "", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = dce(&["sweep", "--param", "tau", "--values", "0.1,1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn seed_rotation_baseline_command() {
    let t = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for seed in [42u64, 123, 456] {
        let d = t.path().join(format!("naive-{seed}"));
        assert_eq!(code(&run(&d, 8, "naive", seed, &[])), 0);
        dirs.push(d);
    }
    let out = t.path().join("base");
    let mut args = vec!["baseline-seed-rotation"];
    let names: Vec<String> = dirs.iter().map(|d| d.display().to_string()).collect();
    args.extend(names.iter().map(String::as_str));
    args.extend(["--out", out.to_str().unwrap()]);
    let o = dce(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.tsv")).unwrap();
    assert_eq!(tsv_value(&summary, "pooled"), "120");

    let o = dce(&["baseline-seed-rotation", &names[0], "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    let d = t.path().join("dce");
    assert_eq!(code(&run(&d, 8, "dce", 1, &[])), 0);
    let o = dce(&["baseline-seed-rotation", &names[0], d.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "arm mismatch");
}
