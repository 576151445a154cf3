//! End-to-end tests of the `hdmean` binary: exit-code contract, output
//! formats, and byte-level determinism of the simulate pipeline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hdmean"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(path: &Path, contents: &str) {
    std::fs::write(path, contents).unwrap();
}

/// A 12×3 matrix whose rows drift deterministically; nothing special about
/// the values beyond being non-constant.
fn sample_matrix_csv() -> String {
    let mut out = String::new();
    for t in 0..12 {
        let tf = t as f64;
        out.push_str(&format!(
            "{},{},{}\n",
            (tf * 0.7).sin(),
            (tf * 1.3).cos() * 0.5,
            0.25 * tf.sqrt() - 0.4
        ));
    }
    out
}

struct Dir {
    _guard: tempfile::TempDir,
    path: PathBuf,
}

fn tmp() -> Dir {
    let guard = tempfile::tempdir().unwrap();
    let path = guard.path().to_path_buf();
    Dir { _guard: guard, path }
}

#[test]
fn one_sample_happy_path_text_and_json() {
    let dir = tmp();
    let input = dir.path.join("x.csv");
    write(&input, &sample_matrix_csv());

    let out = run(&[
        "test",
        "one-sample",
        "--input",
        input.to_str().unwrap(),
        "--m-order",
        "1",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("p-value"), "{text}");
    assert!(text.contains("n = 12, p = 3, M = 1"), "{text}");

    let out = run(&[
        "test",
        "one-sample",
        "--input",
        input.to_str().unwrap(),
        "--m-order",
        "1",
        "--json",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["n"], 12);
    assert_eq!(value["p"], 3);
    assert_eq!(value["m_order"], 1);
    let p = value["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(value["reject"], p < 0.05);
    assert!(value["diagnostics"]["tr_omega_hat"].is_number());
}

#[test]
fn two_sample_happy_path() {
    let dir = tmp();
    let input1 = dir.path.join("x1.csv");
    let input2 = dir.path.join("x2.csv");
    write(&input1, &sample_matrix_csv());
    // Second sample: same texture, shifted.
    let shifted: String = sample_matrix_csv()
        .lines()
        .map(|l| format!("{l}\n"))
        .collect();
    write(&input2, &shifted);

    let out = run(&[
        "test",
        "two-sample",
        "--input1",
        input1.to_str().unwrap(),
        "--input2",
        input2.to_str().unwrap(),
        "--m-order",
        "0",
        "--alpha",
        "0.1",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n1 = 12, n2 = 12, p = 3, M = 0"), "{text}");
}

#[test]
fn missing_input_is_a_data_error() {
    let out = run(&[
        "test",
        "one-sample",
        "--input",
        "/nonexistent/x.csv",
        "--m-order",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_matrix_is_a_data_error() {
    let dir = tmp();
    let input = dir.path.join("bad.csv");
    write(&input, "1.0,2.0\n3.0,oops\n1.0,2.0\n4.0,5.0\n5.0,6.0\n6.0,7.0\n");
    let out = run(&[
        "test",
        "one-sample",
        "--input",
        input.to_str().unwrap(),
        "--m-order",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn bad_alpha_is_a_config_error() {
    let dir = tmp();
    let input = dir.path.join("x.csv");
    write(&input, &sample_matrix_csv());
    let out = run(&[
        "test",
        "one-sample",
        "--input",
        input.to_str().unwrap(),
        "--m-order",
        "0",
        "--alpha",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constant_data_is_a_degenerate_statistic() {
    let dir = tmp();
    let input = dir.path.join("flat.csv");
    let row = "1.0,1.0,1.0\n".repeat(12);
    write(&input, &row);
    let out = run(&[
        "test",
        "one-sample",
        "--input",
        input.to_str().unwrap(),
        "--m-order",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("variance"));
}

fn tiny_config(seed: u64, dump: Option<&str>) -> String {
    let dump_line = dump
        .map(|d| format!("\"dump_pvalues\": \"{d}\",\n"))
        .unwrap_or_default();
    format!(
        r#"{{
        "schema_version": 1,
        "seed": {seed},
        {dump_line}
        "scenarios": [{{
            "kind": "one-sample",
            "id": "smoke",
            "model": {{"type": "parametric", "p": 5, "m": 6, "m_order": 1,
                       "phi1": 0.6, "phi2": 0.4, "w": 0.8}},
            "n": 20,
            "specified_m": 1,
            "mean": "null",
            "alpha": 0.05,
            "replicates": 6
        }}]
    }}"#
    )
}

#[test]
fn simulate_writes_deterministic_summary() {
    let dir = tmp();
    let cfg = dir.path.join("exp.json");
    write(&cfg, &tiny_config(99, None));
    let out1 = dir.path.join("s1.csv");
    let out2 = dir.path.join("s2.csv");

    let r1 = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out1.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(r1.status.success(), "stderr: {}", String::from_utf8_lossy(&r1.stderr));
    let r2 = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
        "--threads",
        "3",
    ]);
    assert!(r2.status.success());

    let s1 = std::fs::read(&out1).unwrap();
    let s2 = std::fs::read(&out2).unwrap();
    assert_eq!(s1, s2, "summaries differ across thread counts");
    let text = String::from_utf8(s1).unwrap();
    assert!(text.starts_with("scenario,statistic,"), "{text}");
    assert!(text.contains("smoke,t-new,one-sample,20,0,5,1,0.05,6,"), "{text}");
    // The exclusion policy is stated on stdout.
    assert!(String::from_utf8_lossy(&r1.stdout).contains("excluded from rate"));
}

#[test]
fn simulate_dump_feeds_qq_export() {
    let dir = tmp();
    let dump = dir.path.join("pvals.csv");
    let cfg = dir.path.join("exp.json");
    write(&cfg, &tiny_config(7, Some(dump.to_str().unwrap())));
    let out = dir.path.join("summary.csv");

    let r = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let dump_text = std::fs::read_to_string(&dump).unwrap();
    assert!(dump_text.starts_with("scenario,n,p,m,replicate,statistic,p_value,reject"));

    let qq = dir.path.join("qq.csv");
    let r = run(&[
        "qq",
        "--pvalues",
        dump.to_str().unwrap(),
        "--out",
        qq.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let qq_text = std::fs::read_to_string(&qq).unwrap();
    let lines: Vec<&str> = qq_text.trim_end().split('\n').collect();
    assert_eq!(lines[0], "theoretical,empirical");
    assert_eq!(lines.len(), 1 + 6);
    // Empirical column is sorted.
    let emp: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(emp.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn invalid_config_json_and_schema_are_config_errors() {
    let dir = tmp();
    let cfg = dir.path.join("broken.json");
    write(&cfg, "{ not json");
    let out_path = dir.path.join("out.csv");
    let r = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));

    write(&cfg, &tiny_config(1, None).replace("\"schema_version\": 1", "\"schema_version\": 9"));
    let r = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));

    let r = run(&["simulate", "--config", "/nonexistent.json", "--out", out_path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn qq_accepts_plain_column_and_rejects_empty() {
    let dir = tmp();
    let pvals = dir.path.join("p.csv");
    write(&pvals, "p_value\n0.5\n");
    let out_path = dir.path.join("qq.csv");
    let r = run(&["qq", "--pvalues", pvals.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let row = text.trim_end().split('\n').nth(1).unwrap();
    let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells, vec![0.5, 0.5]);

    write(&pvals, "");
    let r = run(&["qq", "--pvalues", pvals.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));

    write(&pvals, "0.5\nnot-a-number\n");
    let r = run(&["qq", "--pvalues", pvals.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn reproduce_table_smoke_and_bad_table_number() {
    let dir = tmp();
    let out_path = dir.path.join("t2.csv");
    let r = run(&[
        "reproduce-table",
        "--table",
        "2",
        "--reps",
        "2",
        "--seed",
        "5",
        "--out",
        out_path.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.trim_end().split('\n').collect();
    assert!(lines[0].starts_with("table,block,model,n,statistic,"));
    assert_eq!(lines.len(), 1 + 27);
    assert!(lines[1].starts_with("2,size,M1,40,t-new,1,2,"), "{}", lines[1]);

    let r = run(&[
        "reproduce-table",
        "--table",
        "9",
        "--reps",
        "2",
        "--seed",
        "5",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
}
