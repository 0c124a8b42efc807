use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rank1sense"));
    c.env_remove("RANK1SENSE_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_to(args: &[&str], out: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    run(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Data rows of a CSV written by the CLI: no echo line, no header.
fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let args = [
        "run", "--d", "30", "--k", "2", "--kappa", "2", "--m", "3000", "--iters", "10", "--method", "naive", "--seed",
        "7",
    ];
    let o = run_to(&args, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 11);
    assert_eq!(rows.iter().map(|r| r[2].parse::<usize>().unwrap()).collect::<Vec<_>>(), (0..=10).collect::<Vec<_>>());

    let summary = read_json(&dir.path().join("trace.csv.summary.json"));
    let s = &summary["runs"][0];
    // 2T + 1 blocks plus the extra final-fit block.
    assert_eq!(s["total_samples"], 22 * 3000);
    assert!(s["final_rel_error"].as_f64().unwrap() <= 1e-6);
    let phases = &s["phase_millis"];
    for key in ["sampling", "init", "iterate", "final_fit", "total"] {
        assert!(phases[key].as_f64().unwrap() >= 0.0, "{key}");
    }
    assert_eq!(summary["config"]["seed"], 7);
}

#[test]
fn missing_or_bad_parameters_are_usage_errors() {
    for args in [
        vec!["run", "--d", "30", "--k", "2"],
        vec!["run", "--d", "30", "--k", "abc", "--m", "100"],
        vec!["run", "--d", "30", "--k", "2", "--m", ""],
        vec!["run", "--d", "30", "--k", "2", "--m", "100", "--method", "exact"],
        vec!["run", "--d", "10", "--k", "2", "--m", "10"],
        vec!["run", "--d", "10", "--k", "1", "--kappa", "3", "--m", "100"],
        vec!["sweep-m", "--d", "10", "--k", "2", "--m", "40", "--trials", "0"],
        vec!["proof-diagnostics", "--d", "3", "--k", "2", "--m", "100"],
        vec!["no-such-command"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{args:?}");
    }
    let missing = run(&["run", "--d", "30", "--k", "2"]);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("Usage: rank1sense run"));
}

#[test]
fn empty_m_list_from_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"d": 10, "k": 2, "m": []}"#).unwrap();
    let o = run(&["sweep-m", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let o = run(&["run", "--d", "10", "--k", "2", "--m", "100", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(code(&o), 1);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert_eq!(err["error"]["command"], "run");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"d": 10, "k": 2, "m": [200], "iters": 3, "seed": 5, "format": "json"}"#).unwrap();
    let out = dir.path().join("run.json");
    let o = run_to(&["run", "--config", cfg.to_str().unwrap(), "--seed", "6", "--iters", "2"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&out);
    assert_eq!(doc["config"]["seed"], 6);
    assert_eq!(doc["config"]["iters"], 2);
    assert_eq!(doc["config"]["d"], 10);
    assert_eq!(doc["runs"][0]["trace"].as_array().unwrap().len(), 3);
}

#[test]
fn csv_output_starts_with_resolved_config() {
    let o = run(&["check-operators", "--d", "6", "--k", "2", "--m", "300"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let first = text.lines().next().unwrap();
    let echo: Value = serde_json::from_str(first.strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(echo["command"], "check-operators");
    assert_eq!(echo["kappa"], 2.0);
    assert_eq!(echo["eps"], 0.1);
    assert_eq!(echo["m"], serde_json::json!([300]));
}

#[test]
fn identical_flags_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["sweep-m", "--d", "8", "--k", "2", "--m", "40,80", "--trials", "1", "--iters", "5", "--seed", "3"],
        &["sweep-m", "--d", "8", "--k", "2", "--m", "40,80", "--trials", "3", "--iters", "5", "--seed", "3"],
        &["run", "--d", "8", "--k", "2", "--m", "200", "--iters", "4", "--trials", "2", "--no-timings"],
        &["check-operators", "--d", "8", "--k", "2", "--m", "500,1000", "--trials", "2"],
        &["proof-diagnostics", "--d", "8", "--k", "2", "--m", "200", "--trials", "2"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let a = dir.path().join(format!("a{i}.csv"));
        let b = dir.path().join(format!("b{i}.csv"));
        assert_eq!(code(&run_to(args, &a)), 0, "{args:?}");
        let o = bin().args(*args).args(["--out", b.to_str().unwrap()]).env("RANK1SENSE_THREADS", "1").output().unwrap();
        assert_eq!(code(&o), 0, "{args:?}");
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{args:?}");
    }
}

#[test]
fn sweep_success_grows_with_samples() {
    // d·k = 20; m spans 1× to 16× of it.
    let o = run(&["sweep-m", "--d", "10", "--k", "2", "--m", "20,40,80,160,320", "--trials", "6", "--iters", "8"]);
    assert_eq!(code(&o), 0);
    let rows = data_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 5);
    let success: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(success.windows(2).all(|w| w[0] <= w[1]), "{success:?}");
    assert_eq!(success[4], 1.0);
    let errors: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(errors[4] < errors[0], "{errors:?}");
}

#[test]
fn operator_checks_are_reports_not_assertions() {
    let o = run(&["check-operators", "--d", "10", "--k", "2", "--m", "2000", "--eps", "0", "--trials", "2"]);
    assert_eq!(code(&o), 0);
    let rows = data_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[10..].iter().all(|c| c == "false"), "{r:?}");
    }
}

#[test]
fn operator_checks_pass_with_many_samples() {
    let o = run(&["check-operators", "--d", "20", "--k", "2", "--m", "100000", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let passed = &doc["rows"][0]["passed"];
    for key in ["init", "b_x", "b_y", "g_x", "g_y"] {
        assert_eq!(passed[key], true, "{key}: {}", doc["rows"][0]);
    }
}

#[test]
fn proof_diagnostics_report_the_exact_identity() {
    let o = run(&["proof-diagnostics", "--d", "8", "--k", "2", "--m", "400,1600", "--trials", "3", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert!(r["f_identity_residual"].as_f64().unwrap() <= 1e-6, "{r}");
        assert!(r["dist"].as_f64().unwrap() <= 0.1 + 1e-12);
    }
}

#[test]
fn bench_single_cell_gives_single_row() {
    let o = run(&["bench-regression", "--d", "12", "--k", "2", "--m", "1000"]);
    assert_eq!(code(&o), 0);
    let rows = data_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..4], ["12", "2", "1000", "1"]);
}

#[test]
fn bench_sketched_residual_matches_naive() {
    let o = run(&["bench-regression", "--d", "10", "--k", "3", "--m", "600,1200", "--trials", "2", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    for cell in doc["rows"].as_array().unwrap() {
        let raw = cell["raw"].as_array().unwrap();
        assert_eq!(raw.len(), 4);
        for pair in raw.chunks(2) {
            assert_eq!(pair[0]["method"], "naive");
            assert_eq!(pair[1]["method"], "sketched");
            let (naive, sketched) = (pair[0]["residual"].as_f64().unwrap(), pair[1]["residual"].as_f64().unwrap());
            assert!(sketched <= (1.0 + 1e-6) * naive, "{sketched} vs {naive}");
        }
    }
}

#[test]
fn sketched_run_records_residual_and_equivalence() {
    let o = run(&[
        "run",
        "--d",
        "10",
        "--k",
        "2",
        "--m",
        "400",
        "--iters",
        "6",
        "--method",
        "sketched",
        "--sketch-eps",
        "1e-6",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let s = &doc["runs"][0]["summary"];
    assert!(s["solver_residual"].as_f64().unwrap() >= 0.0);
    assert_eq!(s["naive_equivalent"], true, "{s}");
    assert!(s["naive_gap"].as_f64().unwrap() <= 1e-5);
}
