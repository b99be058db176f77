use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/experiment.toml")
}

fn mcfqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcfqkd")).args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {stderr}"))
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (headers, rows)
}

#[test]
fn validate_reports_the_assignment() {
    let out = mcfqkd(&["--config", config().to_str().unwrap(), "validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "valid");
    assert_eq!(v["plan"]["quantum_core"], 2);
}

#[test]
fn run_figure_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mcfqkd(&[
        "--config",
        config().to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "run-figure",
        "fig6",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (headers, rows) = read_rows(&dir.path().join("fig6.csv"));
    assert_eq!(headers[0], "drop_length_km");
    assert!(headers.iter().any(|h| h == "skr_bps"));
    assert_eq!(rows.len(), 31);
    // Nine significant digits in scientific notation.
    let cell = &rows[1][0];
    assert_eq!(cell.split('e').next().unwrap().replace(['.', '-'], "").len(), 9, "{cell}");
}

#[test]
fn sweep_is_reproducible_for_a_seed() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = mcfqkd(&[
            "--config",
            config().to_str().unwrap(),
            "--output",
            dir.path().to_str().unwrap(),
            "--seed",
            seed,
            "--mc-gates",
            "200000",
            "sweep",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(dir.path().join("sweep_drop_length_km.csv")).unwrap()
    };
    let a = run("3");
    assert_eq!(a, run("3"));
    assert_ne!(a, run("4"));
    assert!(a.lines().next().unwrap().contains("mc_qber_mu"));
}

#[test]
fn calibrate_prints_fitted_parameters() {
    let out = mcfqkd(&["--config", config().to_str().unwrap(), "calibrate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rho0 = v["rho0"].as_f64().unwrap();
    assert!(rho0 > 1e-10 && rho0 < 2e-10, "{rho0}");
    assert_eq!(v["residuals"].as_array().unwrap().len(), 5);
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let out = mcfqkd(&["--config", config().to_str().unwrap(), "run-figure", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["category"], "usage");
}

#[test]
fn bad_arguments_are_usage_errors() {
    let out = mcfqkd(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["category"], "usage");
}

#[test]
fn missing_config_is_a_config_error() {
    let out = mcfqkd(&["--config", "/nonexistent/scenario.toml", "validate"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["category"], "config");
}

#[test]
fn invalid_scenario_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config()).unwrap().replace("mu_signal = 0.6", "mu_signal = 0.1");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let out = mcfqkd(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(out.status.code(), Some(4));
    let err = error_json(&out);
    assert_eq!(err["category"], "validation");
    assert!(err["message"].as_str().unwrap().contains("protocol"));
}
