use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_assoclt"))
        .args(args)
        .env_remove("ASSOCLT_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

#[test]
fn help_documents_acceptance_flags() {
    for sub in ["check", "clt", "report", "cf", "generate", "analyze"] {
        let text = stdout(&[sub, "--help"]);
        for flag in [
            "--family",
            "--n-grid",
            "--n <N>",
            "--reps",
            "--seed",
            "--block-rule",
            "--exec",
            "--out",
            "--config",
            "--set",
        ] {
            assert!(text.contains(flag), "`{sub} --help` lacks {flag}");
        }
    }
    assert!(stdout(&["check", "--help"]).contains("--conditions"));
    assert!(stdout(&["report", "--help"]).contains("--theorem"));
    assert!(stdout(&["--help"]).contains("report"));
}

#[test]
fn usage_errors_exit_nonzero() {
    let o = run(&["frobnicate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = run(&["check", "--family", "iid-normal", "--n-grid", "256", "--bogus"]);
    assert!(!o.status.success());
}

#[test]
fn decreasing_grid_is_a_config_error() {
    let o = run(&["check", "--family", "iid-normal", "--n-grid", "10:5:x2"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n_grid") && err.contains("not increasing"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn config_diagnostics_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"family\": {\"kind\": \"iid\", \"dist\": {\"dist\": \"normal\"}},\n  \"n_grid\": [1,\n").unwrap();
    let o = run(&["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json:4"), "{}", String::from_utf8_lossy(&o.stderr));

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"family": {"kind": "iid", "dist": {"dist": "normal"}}, "n_grid": [64], "repz": 3}"#).unwrap();
    let o = run(&["check", "--config", unknown.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("repz"));

    let o = run(&["check", "--n-grid", "64"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("family"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"family": {"kind": "iid", "dist": {"dist": "normal"}}, "n_grid": [64, 128, 256, 512], "seed": 3}"#,
    )
    .unwrap();
    let v = json(&[
        "check",
        "--config",
        cfg.to_str().unwrap(),
        "--conditions",
        "Ha",
        "--seed",
        "9",
        "--set",
        "tolerances.limit_tol=0.02",
    ]);
    assert_eq!(v["provenance"]["master_seed"], 9);
    assert_eq!(v["provenance"]["overrides"], serde_json::json!(["seed=9", "tolerances.limit_tol=0.02"]));
    assert_eq!(v["reports"][0]["thresholds"]["limit_tol"], 0.02);
    assert_eq!(v["reports"][0]["grid"].as_array().unwrap().len(), 4);
}

#[test]
fn check_emits_reports_with_provenance() {
    let v = json(&[
        "check", "--family", "iid-normal", "--n-grid", "256:65536:x2", "--conditions", "Ha,Hb,Hc", "--seed", "42",
    ]);
    assert_eq!(v["provenance"]["tool"], "assoclt");
    assert!(v["provenance"]["config_hash"].as_str().unwrap().len() >= 8);
    let ids: Vec<_> = v["reports"].as_array().unwrap().iter().map(|r| r["condition_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["Ha", "Hb", "Hc"]);
    assert_eq!(v["reports"][0]["verdict"], "holds_empirically");
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

/// Same argv, twice per execution mode: all four output sets are identical.
fn assert_deterministic(args: &[&str]) {
    let mut runs = Vec::new();
    for exec in ["sequential", "parallel", "parallel", "auto"] {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args.to_vec();
        a.extend(["--exec", exec, "--out", dir.path().to_str().unwrap()]);
        stdout(&a);
        let f = files(dir.path());
        assert!(!f.is_empty());
        runs.push(f);
    }
    for r in &runs[1..] {
        assert!(r == &runs[0], "{args:?} differs across runs");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_exec_modes() {
    assert_deterministic(&["clt", "--family", "geo-gauss:rho=0.5", "--n", "1024", "--reps", "1000", "--seed", "7"]);
    assert_deterministic(&[
        "check", "--family", "markov:p0=0.8,p1=0.7", "--n-grid", "64:1024:x2", "--reps", "1000", "--seed", "2",
    ]);
    assert_deterministic(&[
        "report", "--theorem", "GapDemo", "--family", "iid-normal", "--n-grid", "256:4096:x2", "--reps", "500",
    ]);
    assert_deterministic(&[
        "report", "--theorem", "T2", "--family", "geo-gauss:rho=0.3", "--n-grid", "64:1024:x2", "--reps", "500",
        "--format", "csv",
    ]);
    assert_deterministic(&["cf", "--family", "geo-gauss:rho=0.5", "--n", "1024", "--reps", "1000", "--seed", "3"]);
    assert_deterministic(&["generate", "--family", "iid-exp", "--n", "16", "--reps", "20", "--format", "bin"]);
}

#[test]
fn cf_rows_are_csv_with_provenance() {
    let text = stdout(&[
        "cf", "--family", "geo-gauss:rho=0.5", "--n", "4096", "--block-rule", "fixed:64", "--reps", "1000",
    ]);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# tool=assoclt"));
    assert!(lines.next().unwrap().contains("ell=64 m=64 r=0"));
    assert!(lines.next().unwrap().starts_with("t,re,im,stderr,gap,bound,holds"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn generate_csv_layout() {
    let text = stdout(&["generate", "--family", "iid-normal", "--n", "3", "--reps", "2", "--seed", "5"]);
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].contains("family_hash=") && lines[0].contains("seed=5"));
    assert_eq!(lines[1], "replicate,index,value");
    assert_eq!(lines.len(), 2 + 6);
    assert!(lines[2].starts_with("0,1,"));
}

#[test]
fn analyze_reports_covariance_summary() {
    let v = json(&["analyze", "--family", "geo-gauss:rho=0.5", "--n", "1024", "--reps", "1000"]);
    assert_eq!(v["source"], "analytic");
    assert_eq!(v["sigma2"], 3.0);
    assert_eq!(v["u"][0], serde_json::json!([1, 2.0]));
    assert_eq!(v["probes"]["association"]["violation"], false);
    let v = json(&["analyze", "--family", "common-factor", "--n", "64", "--reps", "1000"]);
    assert_eq!(v["sigma2"], "infinite");
}

#[test]
fn report_exit_code_ignores_verdicts() {
    // the conditions fail here, but a report was produced
    let v = json(&[
        "report", "--theorem", "T1_general", "--family", "common-factor:dist=exp", "--n-grid", "256:4096:x2",
        "--reps", "500",
    ]);
    assert_eq!(v["conditions_verdict"], "fails_empirically");
    assert_eq!(v["clt"]["pass"], false);
    assert_eq!(v["consistency"]["status"], "consistent");
    let o = run(&["report", "--theorem", "T9", "--family", "iid-normal", "--n-grid", "64"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn multi_file_formats_need_out() {
    let o = run(&["report", "--theorem", "T2", "--family", "iid-normal", "--n-grid", "64:256:x2", "--format", "csv"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--out"));
    let o = run(&["clt", "--family", "iid-normal", "--n", "64", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_assoclt"))
        .args(["clt", "--family", "iid-normal", "--n", "64", "--reps", "200"])
        .env("ASSOCLT_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("clt.json").exists());
}
