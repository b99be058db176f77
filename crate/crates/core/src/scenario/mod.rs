//! Scenario files, calibration, figure runners and parameter sweeps.
//!
//! A scenario is a TOML file; unknown keys are rejected. See
//! `configs/experiment.toml` for a fully commented example.

mod calibrate;
mod figures;
mod sweep;
mod table;

pub use calibrate::{calibrate, CalibrationResult, CalibrationTargets, Residual, TargetPoint};
pub use figures::{filtered_pair, headline, max_drop_length, run_figure, with_drop_length, ChannelMask, Figure};
pub use sweep::{sweep, SweepAxis, SweepVariable};
pub use table::{Table, Value};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cwas::{assign, validate_plan, Demands, LaunchPowers};
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::physics::{PhysicsParams, RamanProfile, DEFAULT_ICXT_DB_PER_KM, DEFAULT_REJECTION_FLOOR_DB};
use crate::qkd::{DetectorParams, ProtocolParams};
use crate::topology::{validate, Topology};
use crate::wtdm::{MuxLossModel, SplitterLossTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub gate_width_ns: f64,
    pub dark_count_per_gate: f64,
    /// Calibrated from the targets file when absent.
    #[serde(default)]
    pub misalignment: Option<f64>,
    #[serde(default)]
    pub dead_time_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Peak Raman cross-section in 1/(km·GHz); calibrated when absent.
    #[serde(default)]
    pub rho0: Option<f64>,
    #[serde(default = "default_anti_stokes")]
    pub anti_stokes_ratio: f64,
    #[serde(default = "default_floor")]
    pub rejection_floor_db: f64,
    #[serde(default = "default_icxt")]
    pub icxt_coupling_db_per_km: f64,
}

fn default_anti_stokes() -> f64 {
    RamanProfile::DEFAULT_ANTI_STOKES_RATIO
}
fn default_floor() -> f64 {
    DEFAULT_REJECTION_FLOOR_DB
}
fn default_icxt() -> f64 {
    DEFAULT_ICXT_DB_PER_KM
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            rho0: None,
            anti_stokes_ratio: default_anti_stokes(),
            rejection_floor_db: default_floor(),
            icxt_coupling_db_per_km: default_icxt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CwasConfig {
    pub demands: Demands,
    pub launch: LaunchPowers,
}

/// Knobs of the figure runners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureSettings {
    pub drop_max_km: f64,
    pub drop_steps: usize,
    /// Splitter ratios of the per-case splitter comparison.
    pub splitter_ratios: Vec<u32>,
    /// Plain-fiber feeder compared against the MCF plus attenuator.
    pub ssmf_feeder_km: f64,
    pub ssmf_attenuation_db_per_km: f64,
    /// Narrow filter and short gate of the filtering study.
    pub strict_passband_ghz: f64,
    pub strict_filter_loss_db: f64,
    pub strict_gate_ns: f64,
    pub strict_drop_km: f64,
    /// Users and receiver counts of the receiver study.
    pub receiver_onus: u32,
    pub receivers: Vec<u32>,
}

impl Default for FigureSettings {
    fn default() -> Self {
        Self {
            drop_max_km: 3.0,
            drop_steps: 31,
            splitter_ratios: vec![1, 2, 3],
            ssmf_feeder_km: 20.0,
            ssmf_attenuation_db_per_km: 0.2,
            strict_passband_ghz: 30.0,
            strict_filter_loss_db: 0.8,
            strict_gate_ns: 0.18,
            strict_drop_km: 2.0,
            receiver_onus: 64,
            receivers: vec![1, 2, 4, 8, 16, 32, 64],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSettings {
    /// Gates per intensity; Monte Carlo columns are omitted when unset.
    #[serde(default)]
    pub num_gates: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Targets file, relative to the scenario file.
    pub targets: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: Topology,
    #[serde(default)]
    pub cwas: Option<CwasConfig>,
    pub protocol: ProtocolParams,
    pub detector: DetectorConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub calibration: Option<CalibrationConfig>,
    /// Splitter loss table override as `[ratio, dB]` pairs.
    #[serde(default)]
    pub splitter_losses: Option<Vec<(u32, f64)>>,
    #[serde(default)]
    pub mux: MuxLossModel,
    #[serde(default)]
    pub figures: FigureSettings,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub monte_carlo: MonteCarloSettings,
    #[serde(default)]
    pub output: OutputSettings,
    /// Directory of the scenario file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    /// Every inconsistency in the scenario; empty when it is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = validate(&self.topology).into_iter().map(|s| format!("topology: {s}")).collect();
        if let Some(c) = &self.cwas {
            match assign(&self.topology, &c.demands) {
                Ok(plan) => v.extend(validate_plan(&plan, &self.topology).into_iter().map(|s| format!("cwas: {s}"))),
                Err(e) => v.push(format!("cwas: {e}")),
            }
        }
        if let Err(e) = self.protocol.validate() {
            v.push(format!("protocol: {e}"));
        }
        if let Err(e) = self.detector_params(self.detector.misalignment.unwrap_or(0.0)).validate() {
            v.push(format!("detector: {e}"));
        }
        if let Err(e) = RamanProfile::new(self.physics.rho0.unwrap_or(0.0), self.physics.anti_stokes_ratio) {
            v.push(format!("physics: {e}"));
        }
        if self.physics.icxt_coupling_db_per_km > 0.0 {
            v.push("physics: icxt_coupling_db_per_km must be negative".into());
        }
        if let Err(e) = self.splitter_table() {
            v.push(format!("splitter_losses: {e}"));
        }
        if self.sweep.len() > 1 {
            v.push(format!("sweep: exactly one axis per run, found {}", self.sweep.len()));
        }
        for axis in &self.sweep {
            v.extend(axis.violations().into_iter().map(|s| format!("sweep: {s}")));
        }
        if self.calibration.is_none() && (self.physics.rho0.is_none() || self.detector.misalignment.is_none()) {
            v.push("calibration: rho0 or misalignment missing and no targets file given".into());
        }
        v
    }

    pub fn detector_params(&self, misalignment: f64) -> DetectorParams {
        DetectorParams {
            efficiency: self.detector.efficiency,
            gate_width_ns: self.detector.gate_width_ns,
            dark_count_per_gate: self.detector.dark_count_per_gate,
            misalignment,
            dead_time_ns: self.detector.dead_time_ns,
        }
    }

    pub fn physics_params(&self, rho0: f64) -> Result<PhysicsParams> {
        Ok(PhysicsParams {
            raman: RamanProfile::new(rho0, self.physics.anti_stokes_ratio)?,
            rejection_floor_db: self.physics.rejection_floor_db,
            icxt_coupling_db_per_km: self.physics.icxt_coupling_db_per_km,
        })
    }

    pub fn model_with(&self, rho0: f64, misalignment: f64) -> Result<SystemModel> {
        Ok(SystemModel {
            protocol: self.protocol.clone(),
            detector: self.detector_params(misalignment),
            physics: self.physics_params(rho0)?,
        })
    }

    pub fn splitter_table(&self) -> Result<SplitterLossTable> {
        match &self.splitter_losses {
            Some(entries) => SplitterLossTable::new(entries.iter().copied()),
            None => Ok(SplitterLossTable::default()),
        }
    }

    pub fn targets_path(&self) -> Option<PathBuf> {
        self.calibration.as_ref().map(|c| self.base_dir.join(&c.targets))
    }

    /// Runs the calibration if the scenario leaves `rho0` or `misalignment`
    /// open.
    pub fn calibration(&self) -> Result<Option<CalibrationResult>> {
        if self.physics.rho0.is_some() && self.detector.misalignment.is_some() {
            return Ok(None);
        }
        let path = self
            .targets_path()
            .ok_or_else(|| Error::Config("rho0/misalignment missing and no calibration targets given".into()))?;
        let targets = CalibrationTargets::load(&path)?;
        calibrate(&targets, self).map(Some)
    }

    /// The fully parameterised model, calibrating first when needed.
    pub fn model(&self) -> Result<SystemModel> {
        let cal = self.calibration()?;
        let rho0 = self.physics.rho0.or(cal.as_ref().map(|c| c.rho0)).unwrap_or_default();
        let e_det = self.detector.misalignment.or(cal.as_ref().map(|c| c.e_det)).unwrap_or_default();
        self.model_with(rho0, e_det)
    }

    /// Same scenario with calibrated values written in.
    pub fn calibrated(&self) -> Result<Self> {
        let model = self.model()?;
        let mut out = self.clone();
        out.physics.rho0 = Some(model.physics.raman.rho0);
        out.detector.misalignment = Some(model.detector.misalignment);
        Ok(out)
    }
}

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::parse(&text, &path.display().to_string())?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    Ok(cfg)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// The laboratory scenario with fixed noise parameters, no file access.
    pub fn scenario() -> ScenarioConfig {
        ScenarioConfig {
            topology: Topology::experiment(),
            cwas: Some(CwasConfig { demands: Demands::experiment(), launch: LaunchPowers::experiment() }),
            protocol: ProtocolParams::default(),
            detector: DetectorConfig {
                efficiency: 0.08,
                gate_width_ns: 1.0,
                dark_count_per_gate: 1e-6,
                misalignment: Some(0.02),
                dead_time_ns: 25_000.0,
            },
            physics: PhysicsConfig { rho0: Some(1.3e-10), ..PhysicsConfig::default() },
            calibration: None,
            splitter_losses: None,
            mux: MuxLossModel::default(),
            figures: FigureSettings::default(),
            sweep: vec![],
            monte_carlo: MonteCarloSettings::default(),
            output: OutputSettings::default(),
            base_dir: PathBuf::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::scenario;
    use super::*;

    #[test]
    fn built_in_scenario_is_valid() {
        assert!(scenario().violations().is_empty(), "{:?}", scenario().violations());
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let cfg = scenario();
        let text = toml::to_string(&cfg).unwrap();
        let back = ScenarioConfig::parse(&text, "mem").unwrap();
        assert_eq!(back, cfg);
        let bad = format!("{text}\nbogus_key = 1\n");
        assert!(matches!(ScenarioConfig::parse(&bad, "mem"), Err(Error::Config(_))));
    }

    #[test]
    fn negative_length_and_two_axes_are_violations() {
        let mut cfg = scenario();
        cfg.topology.onus[0].drop.length_km = -1.0;
        assert!(!cfg.violations().is_empty());

        let mut cfg = scenario();
        let axis = SweepAxis { variable: SweepVariable::DropLengthKm, start: 0.0, stop: 3.0, steps: 31, onus: None };
        cfg.sweep = vec![axis.clone(), axis];
        assert!(cfg.violations().iter().any(|s| s.contains("exactly one axis")));
    }
}
