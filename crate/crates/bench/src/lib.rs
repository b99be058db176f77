//! Shared fixtures for the benchmarks: the laboratory scenario with fixed
//! noise parameters, so nothing reads files while timing.

use std::path::PathBuf;

use mcfqkd_core::cwas::{Demands, LaunchPowers};
use mcfqkd_core::scenario::{
    CwasConfig, DetectorConfig, FigureSettings, MonteCarloSettings, OutputSettings, PhysicsConfig, ScenarioConfig,
    SweepAxis, SweepVariable,
};
use mcfqkd_core::wtdm::MuxLossModel;
use mcfqkd_core::{ProtocolParams, SystemModel, Topology};

/// Calibrated values of the shipped scenario.
pub const RHO0: f64 = 1.3e-10;
pub const E_DET: f64 = 0.02;

pub fn scenario() -> ScenarioConfig {
    ScenarioConfig {
        topology: Topology::experiment(),
        cwas: Some(CwasConfig { demands: Demands::experiment(), launch: LaunchPowers::experiment() }),
        protocol: ProtocolParams::default(),
        detector: DetectorConfig {
            efficiency: 0.08,
            gate_width_ns: 1.0,
            dark_count_per_gate: 1e-6,
            misalignment: Some(E_DET),
            dead_time_ns: 30_000.0,
        },
        physics: PhysicsConfig { rho0: Some(RHO0), ..PhysicsConfig::default() },
        calibration: None,
        splitter_losses: None,
        mux: MuxLossModel::default(),
        figures: FigureSettings::default(),
        sweep: vec![SweepAxis { variable: SweepVariable::DropLengthKm, start: 0.0, stop: 3.0, steps: 31, onus: None }],
        monte_carlo: MonteCarloSettings::default(),
        output: OutputSettings::default(),
        base_dir: PathBuf::new(),
    }
}

pub fn model() -> SystemModel {
    scenario().model().expect("fixture model builds")
}
