use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_replica-rank"))
}

const REGIONS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/regions15.csv");

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn replica-rank")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr_errors(o: &Output) -> Vec<String> {
    let v: serde_json::Value = serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)));
    v["errors"]
        .as_array()
        .expect("errors array")
        .iter()
        .map(|e| e.as_str().unwrap().to_owned())
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rank_to(dir: &TempDir, name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.path().join(name);
    let mut args = vec![
        "rank",
        "--matrix",
        REGIONS,
        "--n",
        "4",
        "--clients",
        "Ireland:10,Sydney:3,NVirginia:5",
        "--out",
        path_str(&out),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    (o, out)
}

#[test]
fn ingest_builds_symmetric_matrix() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("samples.csv");
    fs::write(
        &samples,
        "src,dst,timestamp,rtt_ms\n\
         Ireland,Tokyo,1555343280,200\n\
         Tokyo,Ireland,1555343282,210\n\
         Ireland,Sydney,,250\n\
         Sydney,Tokyo,,110\n\
         Sydney,Tokyo,,112\n",
    )
    .unwrap();
    let out = dir.path().join("matrix.csv");
    let o = run(&["ingest", "--samples", path_str(&samples), "--out", path_str(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "site,Ireland,Tokyo,Sydney\n\
         Ireland,0,205.000,250.000\n\
         Tokyo,205.000,0,111.000\n\
         Sydney,250.000,111.000,0\n"
    );
}

#[test]
fn ingest_reports_missing_pair() {
    let dir = TempDir::new().unwrap();
    let samples = dir.path().join("samples.csv");
    fs::write(&samples, "src,dst,timestamp,rtt_ms\nIreland,Tokyo,,200\nTokyo,Sydney,,100\n").unwrap();
    let out = dir.path().join("matrix.csv");
    let o = run(&["ingest", "--samples", path_str(&samples), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let errors = stderr_errors(&o);
    assert!(errors[0].contains("(Ireland, Sydney)"), "{errors:?}");
    assert!(!out.exists());
}

#[test]
fn enumerate_counts() {
    let o = run(&["enumerate", "--count", "--matrix", REGIONS, "--n", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "5460");
    let o = run(&["enumerate", "--count", "--site-count", "30", "--n", "4"]);
    assert_eq!(stdout(&o).trim(), "109620");
    let o = run(&["enumerate", "--count", "--site-count", "15", "--n", "4", "--leaderless"]);
    assert_eq!(stdout(&o).trim(), "1365");
    let o = run(&["enumerate", "--matrix", REGIONS, "--n", "3", "--sites", "Tokyo,Seoul,Sydney"]);
    assert_eq!(
        stdout(&o).lines().collect::<Vec<_>>(),
        ["Seoul|Sydney,Tokyo", "Sydney|Seoul,Tokyo", "Tokyo|Seoul,Sydney"]
    );
    let o = run(&["enumerate", "--count", "--site-count", "3", "--n", "4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn estimate_prints_latency_and_trace() {
    let base = [
        "estimate",
        "--matrix",
        REGIONS,
        "--leader",
        "Ireland",
        "--followers",
        "London,Paris,Frankfurt",
        "--clients",
        "Ireland:10,Sydney:3,NVirginia:5",
    ];
    let o = run(&base);
    assert!(o.status.success(), "{o:?}");
    let latency: f64 = stdout(&o).trim().parse().unwrap();
    assert!(latency > 0.0);

    let mut verbose = base.to_vec();
    verbose.extend(["--verbose", "--oracle"]);
    let o = run(&verbose);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["latency_ms"].as_f64().unwrap() - latency).abs() <= 1e-9 * latency);
    assert_eq!(v["trace"]["replicas"][0], "Ireland");
    assert_eq!(v["trace"]["s_pro"].as_array().unwrap().len(), 4);
    assert_eq!(v["trace"]["responses"].as_array().unwrap().len(), 3);
    let oracle = v["oracle_latency_ms"].as_f64().unwrap();
    assert!((oracle - latency).abs() <= 1e-9 * latency);
    assert_eq!(v["oracle_events"], 1 + 4 + 16 + 16 + 12);

    let mut simple = base.to_vec();
    simple.extend(["--estimator", "simple"]);
    let o = run(&simple);
    let s: f64 = stdout(&o).trim().parse().unwrap();
    assert!(s > latency);
}

#[test]
fn estimate_rejects_bad_fault_bound() {
    let o = run(&[
        "estimate",
        "--matrix",
        REGIONS,
        "--leader",
        "Ireland",
        "--followers",
        "London,Paris,Frankfurt",
        "--clients",
        "Atlantis",
        "--f",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let errors = stderr_errors(&o);
    assert!(errors.iter().any(|e| e.contains("Atlantis")), "{errors:?}");
}

#[test]
fn rank_writes_full_ranking_deterministically() {
    let dir = TempDir::new().unwrap();
    let (o, first) = rank_to(&dir, "a.csv", &[]);
    assert!(o.status.success(), "{o:?}");
    let summary = stdout(&o);
    assert!(summary.contains("deployments: 5460"), "{summary}");
    assert!(summary.contains("best: "));

    let text = fs::read_to_string(&first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,leader,followers,latency_ms"));
    assert_eq!(lines.count(), 5460);

    let (_, second) = rank_to(&dir, "b.csv", &[]);
    let (_, parallel) = rank_to(&dir, "c.csv", &["--workers", "4"]);
    let bytes = fs::read(&first).unwrap();
    assert_eq!(fs::read(second).unwrap(), bytes);
    assert_eq!(fs::read(parallel).unwrap(), bytes);
}

#[test]
fn rank_validates_before_evaluating() {
    let dir = TempDir::new().unwrap();
    let (o, out) = rank_to(&dir, "bad.csv", &["--workers", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_errors(&o)[0].contains("worker"));
    assert!(!out.exists());
    let (o, out) = rank_to(&dir, "bad.csv", &["--f", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_errors(&o).iter().any(|e| e.contains("f = 2")));
    assert!(!out.exists());
}

#[test]
fn rank_reads_json_config_and_flags_override() {
    let dir = TempDir::new().unwrap();
    fs::copy(REGIONS, dir.path().join("m.csv")).unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"matrix":"m.csv","clients":"Sydney","n":4,"f":1,"estimator":"simple","output":"from_config.csv","sites":["Tokyo","Seoul","Sydney","Singapore","Mumbai"]}"#,
    )
    .unwrap();
    let o = run(&["rank", "--config", path_str(&config)]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(dir.path().join("from_config.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 * 4);

    let out = dir.path().join("override.csv");
    let o = run(&["rank", "--config", path_str(&config), "--n", "5", "--out", path_str(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(out).unwrap().lines().count(), 1 + 5);
}

#[test]
fn compare_against_self_reversed_and_other_estimator() {
    let dir = TempDir::new().unwrap();
    let (_, detailed) = rank_to(&dir, "detailed.csv", &[]);
    let (_, simple) = rank_to(&dir, "simple.csv", &["--estimator", "simple"]);
    let scatter = dir.path().join("scatter.csv");

    let o = run(&[
        "compare",
        "--estimated",
        path_str(&detailed),
        "--reference",
        path_str(&detailed),
        "--matrix",
        REGIONS,
        "--scatter",
        path_str(&scatter),
    ]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    assert!(s.contains("rmse: 0\n") && s.contains("cc: 1\n"), "{s}");
    let sc = fs::read_to_string(&scatter).unwrap();
    assert!(sc.starts_with("deployment,rank_estimated,rank_reference\n"));
    assert_eq!(sc.lines().count(), 5461);

    let o = run(&[
        "compare",
        "--estimated",
        path_str(&detailed),
        "--reference",
        path_str(&simple),
        "--matrix",
        REGIONS,
        "--verbose",
    ]);
    assert!(o.status.success(), "{o:?}");
    let s = stdout(&o);
    let field = |key: &str| -> f64 {
        s.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert!(field("rmse:").is_finite() && field("rmse:") > 0.0);
    assert!((-1.0..=1.0).contains(&field("cc:")));
    assert!((-1.0..=1.0).contains(&field("latency_cc:")));

    // Negate latencies to reverse the order.
    let text = fs::read_to_string(&detailed).unwrap();
    let mut reversed = String::from("deployment,latency_ms\n");
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let label = format!("{}|{}", cols[1], cols[2].replace(';', ","));
        let latency: f64 = cols[3].parse().unwrap();
        reversed.push_str(&format!("\"{label}\",{}\n", -latency));
    }
    let rev_path = dir.path().join("reversed.csv");
    fs::write(&rev_path, reversed).unwrap();
    let o = run(&[
        "compare",
        "--estimated",
        path_str(&detailed),
        "--reference",
        path_str(&rev_path),
        "--matrix",
        REGIONS,
    ]);
    let s = stdout(&o);
    let cc: f64 = s.lines().find_map(|l| l.strip_prefix("cc:")).unwrap().trim().parse().unwrap();
    // Exact ties keep canonical order on both sides, so reversal can be off by a hair.
    assert!(cc < -0.999, "{s}");
}

#[test]
fn compare_reports_set_mismatch() {
    let dir = TempDir::new().unwrap();
    let (_, full) = rank_to(&dir, "full.csv", &[]);
    let partial = dir.path().join("partial.csv");
    fs::write(&partial, "deployment,latency_ms\n\"Tokyo|Seoul,Sydney,Oregon\",100\n").unwrap();
    let o = run(&[
        "compare",
        "--estimated",
        path_str(&full),
        "--reference",
        path_str(&partial),
        "--matrix",
        REGIONS,
    ]);
    assert_eq!(o.status.code(), Some(1));
    let errors = stderr_errors(&o);
    assert!(errors[0].contains("5459 differing"), "{errors:?}");
}

#[test]
fn usage_errors_exit_with_input_code() {
    let o = run(&["enumerate", "--count", "--n", "four"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr_errors(&o).is_empty());
    assert!(run(&["--help"]).status.success());
}

#[test]
fn missing_input_file_is_an_input_error() {
    let o = run(&["enumerate", "--count", "--matrix", "/nonexistent/m.csv", "--n", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_errors(&o)[0].contains("/nonexistent/m.csv"));
}
