//! Fits the two free noise parameters to measured QBER points: the
//! misalignment error from the quiet-link QBER, then the Raman magnitude from
//! the upstream-only QBER nearest 1 km of drop fiber.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::figures::{with_drop_length, ChannelMask};
use super::ScenarioConfig;
use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetPoint {
    pub drop_length_km: f64,
    pub qber: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    /// QBER with every classical carrier off.
    pub baseline_qber: f64,
    #[serde(default = "one_km")]
    pub baseline_drop_km: f64,
    /// QBER with only the upstream carrier on, against drop length.
    pub upstream: Vec<TargetPoint>,
}

fn one_km() -> f64 {
    1.0
}

impl CalibrationTargets {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub label: String,
    pub drop_length_km: f64,
    pub target: f64,
    pub model: f64,
}

impl Residual {
    pub fn error(&self) -> f64 {
        self.model - self.target
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub rho0: f64,
    pub e_det: f64,
    pub residuals: Vec<Residual>,
}

/// Bisection for an increasing `f` on `[lo, hi]`.
fn solve_increasing(mut lo: f64, mut hi: f64, target: f64, what: &str, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::NoBracket(format!("{what}: target {target} outside the reachable range [{f_lo}, {f_hi}]")));
    }
    while hi - lo > REL_TOL * hi.abs().max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn calibrate(targets: &CalibrationTargets, cfg: &ScenarioConfig) -> Result<CalibrationResult> {
    let nearest = targets
        .upstream
        .iter()
        .min_by(|a, b| (a.drop_length_km - 1.0).abs().total_cmp(&(b.drop_length_km - 1.0).abs()))
        .ok_or_else(|| Error::Config("calibration needs at least one upstream QBER point".into()))?;
    let quiet = ChannelMask::NONE.apply(&cfg.topology);
    let upstream = ChannelMask::case(5).expect("valid case").apply(&cfg.topology);
    let id = cfg.topology.onus.first().map(|o| o.id).ok_or_else(|| Error::Config("topology has no ONU".into()))?;

    let baseline_at = |e_det: f64| -> Result<f64> {
        let model = cfg.model_with(0.0, e_det)?;
        Ok(model.evaluate(&with_drop_length(&quiet, targets.baseline_drop_km), id)?.qber.qber_total)
    };
    let e_det = solve_increasing(0.0, 0.5, targets.baseline_qber, "baseline QBER", baseline_at)?;

    let upstream_at = |rho0: f64, km: f64| -> Result<f64> {
        let model = cfg.model_with(rho0, e_det)?;
        Ok(model.evaluate(&with_drop_length(&upstream, km), id)?.qber.qber_total)
    };
    let mut hi = 1e-12;
    while upstream_at(hi, nearest.drop_length_km)? < nearest.qber && hi < 1e-3 {
        hi *= 10.0;
    }
    let rho0 = solve_increasing(0.0, hi, nearest.qber, "upstream QBER", |r| upstream_at(r, nearest.drop_length_km))?;

    let mut residuals = vec![Residual {
        label: "baseline".into(),
        drop_length_km: targets.baseline_drop_km,
        target: targets.baseline_qber,
        model: cfg
            .model_with(rho0, e_det)?
            .evaluate(&with_drop_length(&quiet, targets.baseline_drop_km), id)?
            .qber
            .qber_total,
    }];
    for p in &targets.upstream {
        residuals.push(Residual {
            label: "upstream".into(),
            drop_length_km: p.drop_length_km,
            target: p.qber,
            model: upstream_at(rho0, p.drop_length_km)?,
        });
    }
    Ok(CalibrationResult { rho0, e_det, residuals })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::scenario;
    use super::*;

    fn synthetic(cfg: &ScenarioConfig, rho0: f64, e_det: f64) -> CalibrationTargets {
        let model = cfg.model_with(rho0, e_det).unwrap();
        let quiet = ChannelMask::NONE.apply(&cfg.topology);
        let us = ChannelMask::case(5).unwrap().apply(&cfg.topology);
        let q = |t: &crate::topology::Topology, km: f64| {
            model.evaluate(&with_drop_length(t, km), 1).unwrap().qber.qber_total
        };
        CalibrationTargets {
            baseline_qber: q(&quiet, 1.0),
            baseline_drop_km: 1.0,
            upstream: [0.5, 1.0, 1.6].iter().map(|&km| TargetPoint { drop_length_km: km, qber: q(&us, km) }).collect(),
        }
    }

    #[test]
    fn recovers_forward_model_parameters() {
        let cfg = scenario();
        for (rho0, e_det) in [(3e-10, 0.02), (1e-9, 0.01), (5e-11, 0.035)] {
            let r = calibrate(&synthetic(&cfg, rho0, e_det), &cfg).unwrap();
            assert!((r.rho0 / rho0 - 1.0).abs() < 1e-4, "{} vs {rho0}", r.rho0);
            assert!((r.e_det / e_det - 1.0).abs() < 1e-4, "{} vs {e_det}", r.e_det);
            assert_eq!(r.residuals.len(), 4);
            assert!(r.residuals.iter().all(|x| x.error().abs() < 1e-8));
        }
    }

    #[test]
    fn unreachable_targets() {
        let cfg = scenario();
        let mut t = synthetic(&cfg, 3e-10, 0.02);
        t.baseline_qber = 0.6;
        assert!(matches!(calibrate(&t, &cfg), Err(Error::NoBracket(_))));
        let mut t = synthetic(&cfg, 3e-10, 0.02);
        t.upstream[1].qber = 0.7;
        assert!(matches!(calibrate(&t, &cfg), Err(Error::NoBracket(_))));
        let mut t = synthetic(&cfg, 3e-10, 0.02);
        t.upstream.clear();
        assert!(calibrate(&t, &cfg).is_err());
    }
}
