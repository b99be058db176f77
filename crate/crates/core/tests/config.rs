use std::path::{Path, PathBuf};

use mcfqkd_core::cwas::Demands;
use mcfqkd_core::scenario::{load_config, run_figure, sweep, Figure, ScenarioConfig};
use mcfqkd_core::{Error, Topology};

fn experiment_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/experiment.toml")
}

#[test]
fn shipped_config_is_the_laboratory_testbed() {
    let cfg = load_config(&experiment_path()).unwrap();
    assert_eq!(cfg.topology, Topology::experiment());
    assert_eq!(cfg.cwas.as_ref().unwrap().demands, Demands::experiment());
    assert!(cfg.physics.rho0.is_none());
    assert!(cfg.detector.misalignment.is_none());
}

#[test]
fn shipped_config_calibrates() {
    let cfg = load_config(&experiment_path()).unwrap();
    let cal = cfg.calibration().unwrap().expect("calibration runs");
    assert!((cal.e_det - 0.02).abs() < 1e-3, "{}", cal.e_det);
    assert!((cal.rho0 / 1.3e-10 - 1.0).abs() < 0.01, "{}", cal.rho0);
    assert!(cal.residuals.iter().all(|r| r.error().abs() < 2e-4), "{:?}", cal.residuals);

    let fixed = cfg.calibrated().unwrap();
    assert!(fixed.calibration().unwrap().is_none());
    assert_eq!(fixed.model().unwrap(), cfg.model().unwrap());
}

#[test]
fn every_figure_runs_on_the_shipped_config() {
    let cfg = load_config(&experiment_path()).unwrap().calibrated().unwrap();
    let model = cfg.model().unwrap();
    for name in ["fig3", "fig4", "fig5", "fig6", "fig7"] {
        let fig: Figure = name.parse().unwrap();
        let tables = run_figure(fig, &cfg, &model).unwrap();
        assert!(!tables.is_empty());
        assert!(tables.iter().all(|t| !t.rows.is_empty()), "{name}");
    }
    let t = sweep(&cfg, &model).unwrap();
    assert_eq!(t.rows.len(), 31);
}

#[test]
fn missing_targets_file_is_a_config_error() {
    let text = std::fs::read_to_string(experiment_path()).unwrap();
    let mut cfg = ScenarioConfig::parse(&text, "mem").unwrap();
    cfg.base_dir = PathBuf::from("/nonexistent");
    assert!(matches!(cfg.model(), Err(Error::Config(_))));
}

#[test]
fn invalid_scenario_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(experiment_path())
        .unwrap()
        .replace("efficiency = 0.08", "efficiency = 1.5")
        .replace("length_km = 1.0\nattenuation_db_per_km = 0.2", "length_km = -1.0\nattenuation_db_per_km = 0.2");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    match load_config(&path) {
        Err(Error::Validation(v)) => {
            assert!(v.iter().any(|s| s.starts_with("detector")), "{v:?}");
            assert!(v.iter().any(|s| s.starts_with("topology")), "{v:?}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}
