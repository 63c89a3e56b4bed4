//! End-to-end runs of the `affinebody` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affinebody")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn spectrum_example_writes_csv_with_provenance() {
    let o = run(&["spectrum", "--kind", "aff-aff", "--n", "2", "--A", "1", "--B", "0.5", "--m", "1", "--n-label", "2",
        "--potential", "harmonic:kappa=1", "--count", "3", "--convergence", "false"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].starts_with("# seed = 1"));
    assert!(lines[2].starts_with("# config = {\"kind\":\"aff-aff\""));
    assert_eq!(lines[3], "level,energy,residual");
    assert_eq!(lines.len(), 7);
    let energy = lines[4].split(',').nth(1).unwrap();
    let mantissa = energy.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 12, "{energy}");
}

#[test]
fn json_report_keys_are_stable() {
    let o = run(&["spectrum", "--n", "2", "--m", "0", "--n-label", "2", "--count", "2", "--format", "json",
        "--grid=-4:4:24,0:6:24"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys[..4], ["command", "version", "seed", "config"]);
    assert_eq!(v["config"]["grid"], "-4:4:24,0:6:24");
    let block = &v["convergence"];
    assert_eq!(block["levels"].as_array().unwrap().len(), 3);
}

#[test]
fn half_integer_sector_is_a_validation_error() {
    let o = run(&["spectrum", "--n", "3", "--s", "1/2", "--j", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("half-integer"));
}

#[test]
fn unknown_flags_are_errors() {
    for sub in ["reps", "geometry-check", "spectrum", "planar", "validate-wavefunction", "acceptance"] {
        let o = run(&[sub, "--no-such-flag"]);
        assert_eq!(o.status.code(), Some(1), "{sub}");
    }
}

#[test]
fn help_lists_every_flag() {
    for sub in ["reps", "geometry-check", "spectrum", "planar", "validate-wavefunction", "acceptance"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for flag in ["--config", "--kind", "--n-label", "--potential", "--seed", "--out-dir", "--export-amplitudes"] {
            assert!(text.contains(flag), "{sub} help lacks {flag}");
        }
    }
}

#[test]
fn non_convergence_exits_with_two_and_keeps_partial_levels() {
    let o = run(&["spectrum", "--n", "3", "--s", "1/2", "--j", "1/2", "--grid=-4:4:10,0:5:10,0:5:10",
        "--method", "lanczos", "--max-iterations", "12", "--count", "4", "--format", "json"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["converged"], false);
    assert!(!v["levels"].as_array().unwrap().is_empty());
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "A = 2.0\nB = 0.25\ncount = 2\nconvergence = false\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = run(&["planar", "--config", c, "--A", "3.0", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["config"]["A"], 3.0);
    assert_eq!(v["config"]["B"], 0.25);
    assert_eq!(v["config"]["count"], 2);
    assert_eq!(v["config"]["tol"], 1e-8);

    std::fs::write(&cfg, "kappa = 1.0\n").unwrap();
    assert_eq!(run(&["planar", "--config", c]).status.code(), Some(1));
}

#[test]
fn geometry_check_passes() {
    let o = run(&["geometry-check", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["seed"], 11);
    for c in v["checks"].as_array().unwrap() {
        let keys: Vec<&String> = c.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["check", "residual", "tolerance", "pass"]);
    }
}

#[test]
fn reps_dumps_row_major_pairs() {
    let o = run(&["reps", "--s", "1", "--rotation", "0,0,1.5"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["dim"], 3);
    let d = v["D"].as_array().unwrap();
    assert_eq!(d.len(), 3);
    // D = exp(-i k S3) is diagonal with D_00 = exp(-1.5 i)
    assert!((d[0][0][0].as_f64().unwrap() - 1.5f64.cos()).abs() < 1e-12);
    assert!((d[0][0][1].as_f64().unwrap() + 1.5f64.sin()).abs() < 1e-12);
}

#[test]
fn dalembert_planar_ground_levels() {
    let o = run(&["planar", "--kind", "dalembert", "--I", "1", "--potential", "harmonic:kappa=1",
        "--grid", "0:8:200,0:8:200", "--count", "1", "--convergence", "false", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let e = json(&o)["sectors"][0]["levels"][0]["energy"].as_f64().unwrap();
    assert!((e - 2.0).abs() < 1e-3, "{e}");
}

fn exported(dir: &Path) -> Output {
    run(&["spectrum", "--n", "3", "--s", "1/2", "--j", "1/2", "--potential", "harmonic:kappa=1",
        "--grid=-4:4:10,0:5:10,0:5:10", "--count", "1", "--convergence", "false",
        "--out-dir", dir.to_str().unwrap(), "--export-amplitudes", "--export-matrix"])
}

#[test]
fn exported_amplitude_validates() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(exported(dir.path()).status.code(), Some(0));
    let coo = std::fs::read_to_string(dir.path().join("operator.coo")).unwrap();
    assert!(coo.lines().nth(2).unwrap().starts_with("# config = "));
    let amp = dir.path().join("level-0.amp");
    let o = run(&["validate-wavefunction", "--input", amp.to_str().unwrap(), "--mc-samples", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = json(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["file_metadata"]["command"], "spectrum");
}

#[test]
fn corrupt_amplitude_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.amp");
    std::fs::write(&bad, b"not an amplitude").unwrap();
    let o = run(&["validate-wavefunction", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["validate-wavefunction"]).status.code(), Some(1));
}
