use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zeronoise::reproduce::list_files;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zeronoise"));
    c.env_remove("ZERONOISE_OUT");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("spawn")
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    list_files(dir)
        .unwrap()
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(dir.join(&p)).unwrap();
            (p, bytes)
        })
        .collect()
}

#[test]
fn hjb1_on_the_narrow_asymmetric_interval_gives_one_third() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ex2_asym_narrow.json");
    let o = run(&["hjb1", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("hjb1.csv")).unwrap();
    let (x, u) = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|s| s.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .unwrap();
    assert!(x.abs() < 1e-12);
    assert!((u - 1.0 / 3.0).abs() < 2e-3, "u(0) = {u}");
}

#[test]
fn repeated_runs_are_byte_identical_and_jobs_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ex1_sqrt.json");
    let cfg = cfg.to_str().unwrap();
    let mut snaps = vec![];
    for (tag, jobs) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(tag);
        for sub in ["simulate", "selection-law", "sweep", "hjb2", "oracle1d", "ode"] {
            let o = run(&["--quick", "--jobs", jobs, sub, "--config", cfg], &out);
            assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        }
        snaps.push(snapshot(&out));
    }
    assert!(snaps[0].len() >= 10);
    assert_eq!(snaps[0], snaps[1]);
    assert_eq!(snaps[0], snaps[2]);
}

#[test]
fn quick_reproduction_writes_verdicts_and_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--quick", "reproduce", "example24"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("example24/verdicts.json")).unwrap()).unwrap();
    assert_eq!(v["all_passed"], true);
    assert_eq!(v["quick"], true);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("3^(2/3)/(1+3^(2/3)) = 0.675334"));
}

#[test]
fn output_directory_override_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ex2_asym_narrow.json");
    let o = bin()
        .env("ZERONOISE_OUT", dir.path().join("env"))
        .args(["--out", dir.path().join("flag").to_str().unwrap(), "--quick", "hjb1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("env/hjb1.csv").exists());
    assert!(!dir.path().join("flag").exists());
}

#[test]
fn malformed_config_reports_the_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"name\": \"x\",\n  \"field\": {\"label\": \"ex1-sqrt\", \"params\": {}},\n  \"sde\": 3\n}\n").unwrap();
    let o = run(&["hjb1", "--config", bad.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn dimension_mismatch_is_rejected_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("prod2d_common.json")).unwrap().replace(
        "\"kind\": \"ball\", \"center\": [0.0, 0.0], \"radius\": 0.25",
        "\"kind\": \"interval\", \"l\": -1.0, \"r\": 1.0",
    );
    let cfg = dir.path().join("mismatch.json");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("o");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension"));
    assert!(!out.join("ensemble.csv").exists());
}

#[test]
fn failed_assumption_check_exits_nonzero_with_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ex2_asym_narrow.json");
    let o = run(&["check-assumptions", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("assumptions.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn unknown_reproduction_name_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "example99"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
