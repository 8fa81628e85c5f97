use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kerrlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kerrlab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn trapped_radius_is_three_without_spin() {
    let dir = tempfile::tempdir().unwrap();
    let out = kerrlab(dir.path(), &["--a", "0", "trapped-radius", "--ratios", "-3,-1,0,0.5,2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trapped-radius.csv")).unwrap();
    let rows = data_rows(&csv);
    let zero: Vec<_> = rows.iter().filter(|r| r[0].parse::<f64>().unwrap() == 0.0).collect();
    assert_eq!(zero.len(), 5);
    for r in zero {
        let ra: f64 = r[3].parse().unwrap();
        assert!((ra - 3.0).abs() < 1e-10, "{ra}");
    }
}

#[test]
fn csv_header_and_jsonl_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = kerrlab(dir.path(), &["--seed", "11", "strichartz"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("strichartz.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# kerrlab "));
    assert_eq!(lines[1], "# command: strichartz");
    assert!(lines[2].starts_with("# config_sha256: "));
    assert_eq!(lines[2].len(), "# config_sha256: ".len() + 64);
    assert_eq!(lines[3], "# seed: 11");
    assert!(lines[4].starts_with("# units: "));
    let jsonl = fs::read_to_string(dir.path().join("strichartz.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), data_rows(&csv).len());
    for l in jsonl.lines() {
        serde_json::from_str::<serde_json::Value>(l).unwrap();
    }
}

#[test]
fn strichartz_table_matches_exact_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[strichartz]\nextra = [[0.75, 8.0, 4.8], [0.25, 8.0, 8.0], [0.0, 4.0, 2.4]]\n").unwrap();
    let out = kerrlab(dir.path(), &["--config", cfg.to_str().unwrap(), "strichartz"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("strichartz.csv")).unwrap();
    let labels: Vec<String> = data_rows(&csv).into_iter().map(|r| r[3].clone()).collect();
    assert_eq!(labels[..4], ["sharp", "sharp", "nonsharp", "invalid"]);
    // 1/8 + 3/4.8 = 3/4 with 1/8 + 1/4.8 < 1/2; 1/8 + 3/8 != 5/4; 1/4 + 1/2.4 > 1/2.
    assert_eq!(labels[4..], ["nonsharp", "invalid", "invalid"]);
}

#[test]
fn unknown_config_key_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[black_hole]\nspinn = 0.2\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = kerrlab(&out_dir, &["--config", cfg.to_str().unwrap(), "strichartz"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spinn"));
    assert!(!out_dir.exists());
}

#[test]
fn invalid_parameters_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = kerrlab(dir.path(), &["--a", "0.9", "trapped-radius"]);
    assert_eq!(out.status.code(), Some(1));
    let out = kerrlab(dir.path(), &["--a", "0.1", "evolve", "--duration", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "5", "--threads", "2", "weights", "--points", "21"];
    assert!(kerrlab(a.path(), &args).status.success());
    assert!(kerrlab(b.path(), &args).status.success());
    for f in ["weights.csv", "weights.jsonl"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[black_hole]\nspin = 0.2\n").unwrap();
    let out = kerrlab(dir.path(), &["--config", cfg.to_str().unwrap(), "--seed", "9", "strichartz"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("strichartz.csv")).unwrap();
    assert!(csv.contains("# seed: 9\n"));
}
