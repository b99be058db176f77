use std::path::Path;

use mcfqkd_bench::{scenario, E_DET, RHO0};
use mcfqkd_core::scenario::load_config;

#[test]
fn fixture_tracks_the_shipped_scenario() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/experiment.toml");
    let shipped = load_config(&path).unwrap().calibrated().unwrap();
    let fixture = scenario();
    assert_eq!(fixture.topology, shipped.topology);
    assert_eq!(fixture.protocol, shipped.protocol);
    assert_eq!(fixture.detector.dead_time_ns, shipped.detector.dead_time_ns);
    assert!((shipped.physics.rho0.unwrap() / RHO0 - 1.0).abs() < 1e-3);
    assert!((shipped.detector.misalignment.unwrap() / E_DET - 1.0).abs() < 1e-3);
}
