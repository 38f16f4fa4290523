use std::path::Path;
use std::process::{Command, Output};

fn ldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldp-fisher")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

#[test]
fn fisher_reports_the_trace() {
    let out = ldp(&["fisher", "--model", "bernoulli", "--theta", "0.5", "--channel", "binary-rr", "--epsilon", "1.0986122886681098"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["trace"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["source_trace"].as_f64().unwrap(), 4.0);
    assert!(v["trace"].as_f64().unwrap() <= v["variance_bound"].as_f64().unwrap());
}

#[test]
fn fisher_reads_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q.toml");
    std::fs::write(&cfg, "model = \"multinomial\"\nd = 2\ntheta = [0.3, 0.3]\nchannel = \"yebarg\"\neps = 1.0\nw = 1\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = ldp(&["fisher", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("fisher.json")).unwrap()).unwrap();
    assert!(v["eps_star"].as_f64().unwrap() <= 1.0 + 1e-12);
    let missing = ldp(&["fisher", "--config", cfg.to_str().unwrap(), "--channel", "yebarg", "--w", "3"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bounds_from_flags_and_config() {
    let out = ldp(&["bounds", "--model", "discrete", "--d", "2,4", "--eps", "1", "--n", "1000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("DiscreteDistribution"));
    let dir = tempfile::tempdir().unwrap();
    let out = ldp(&["bounds", "--config", &fixture("subsample.toml"), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    assert_eq!(rows[0]["report"]["corollary"], "s_sparse_low_privacy");
}

#[test]
fn simulate_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = ldp(&["simulate", "--config", &fixture("determinism.toml"), "--seed", "3", "--out", dir.path().to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("determinism.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "schema_version,mechanism,d,s,eps,n,trials,risk_mean,risk_stderr,vt_bound,rate_formula,ratio,seed"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("1,yebarg,") && r.ends_with(",3")));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("determinism.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["config"]["seed"], 3);
}

#[test]
fn verify_small_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v.toml");
    std::fs::write(&cfg, "trace_instances = 10\nfuzz_channels_per_eps = 10\n").unwrap();
    let out = ldp(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
    assert!(dir.path().join("verify.json").exists());
}

#[test]
fn errors_exit_with_code_two() {
    let out = ldp(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ldp(&["simulate", "--config", "/nonexistent/x.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reading"));
    let out = ldp(&["fisher", "--model", "bernoulli", "--theta", "1.0", "--channel", "binary-rr", "--epsilon", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
