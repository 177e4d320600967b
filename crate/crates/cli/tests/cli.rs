use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bpve(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bpve"));
    cmd.args(args).env_remove("BPVE_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("BPVE_OUT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const GW: &str = r#"{"kind": "constant", "dist": {"kind": "finite_pmf", "probs": [0.25, 0.25, 0.5]}}"#;

#[test]
fn list_presets_names_all_three() {
    let out = bpve(&["list-presets"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["critical_two_point", "supercritical_mu0.2", "cooling_doubling_blocks"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn conditions_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &format!(r#"{{"experiment": "conditions", "environment": {GW}}}"#));
    let out_dir = dir.path().join("out");
    let out = bpve(&["run", &cfg, "--out", out_dir.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    let a1 = results["results"]["reports"][0]["partial_sum"].as_f64().unwrap();
    assert!((a1 - 2.2).abs() < 1e-9);
    let digest = results["config_digest"].as_str().unwrap();
    let csv = fs::read_to_string(out_dir.join("conditions.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_digest={digest}\n")));
    assert!(out_dir.join("resolved_config.json").exists());
}

#[test]
fn out_dir_from_environment_and_thread_independence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "w.json",
        &format!(r#"{{"experiment": "w_positivity", "n": 40, "replicas": 3000, "environment": {GW}}}"#),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(bpve(&["run", &cfg, "--threads", "1"], Some(&a)).status.success());
    assert!(bpve(&["run", &cfg, "--threads", "3", "--out", b.to_str().unwrap()], None).status.success());
    let ra = fs::read(a.join("results.json")).unwrap();
    let rb = fs::read(b.join("results.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn resolved_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"experiment": "survival", "n": 30, "replicas": 500, "environment": {"preset": "critical_two_point"}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(bpve(&["run", &cfg, "--out", a.to_str().unwrap()], None).status.success());
    let echo = a.join("resolved_config.json");
    assert!(bpve(&["run", echo.to_str().unwrap(), "--out", b.to_str().unwrap()], None).status.success());
    assert_eq!(fs::read(a.join("results.json")).unwrap(), fs::read(b.join("results.json")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();
    let missing_env = write(dir.path(), "m.json", r#"{"experiment": "survival"}"#);
    let r = bpve(&["run", &missing_env, "--out", out], None);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("environment"));

    let too_long = write(
        dir.path(),
        "r.json",
        &format!(r#"{{"experiment": "survival", "n": 5, "horizon": 100000000, "environment": {GW}}}"#),
    );
    assert_eq!(bpve(&["run", &too_long, "--out", out], None).status.code(), Some(3));

    let heavy = r#"{"kind": "constant", "dist": {"kind": "power_law_tail", "alpha": 0.5, "p0": 0.2}}"#;
    let l2 = write(dir.path(), "l.json", &format!(r#"{{"experiment": "l2", "replicas": 10, "environment": {heavy}}}"#));
    assert_eq!(bpve(&["run", &l2, "--out", out], None).status.code(), Some(4));
}

#[test]
fn resume_with_other_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();
    let first = write(dir.path(), "1.json", &format!(r#"{{"experiment": "survival", "n": 10, "replicas": 100, "environment": {GW}}}"#));
    let second = write(dir.path(), "2.json", &format!(r#"{{"experiment": "survival", "n": 11, "replicas": 100, "environment": {GW}}}"#));
    assert!(bpve(&["run", &first, "--out", out], None).status.success());
    assert_eq!(bpve(&["run", &second, "--out", out], None).status.code(), Some(2));
    assert!(bpve(&["run", &second, "--out", out, "--force"], None).status.success());
}
