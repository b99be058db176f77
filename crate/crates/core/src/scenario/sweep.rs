//! One-dimensional parameter sweeps.
//!
//! Output columns, in order:
//! `step, variable, value, group_size, per_onu_clock_hz, loss_db, background,
//! qber_in, qber_mcf_ds, qber_mcf_us, qber_ssmf_ds, qber_ssmf_us, qber_total,
//! skr_bps`, followed by `mc_gain_mu, mc_gain_mu_sigma, mc_qber_mu,
//! mc_qber_mu_sigma` when Monte Carlo is enabled. Step `i` of the Monte Carlo
//! columns uses seed `seed + i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::figures::with_drop_length;
use super::table::{Table, Value};
use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::qkd::{monte_carlo_intensity, ChannelBudget};
use crate::topology::quantum_path;
use crate::wtdm::plan_schedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    DropLengthKm,
    /// Receiver count for `onus` users; values are rounded to integers.
    Receivers,
    UpstreamPowerDbm,
    DownstreamPowerDbm,
    FeederLossDb,
    GateWidthNs,
}

impl SweepVariable {
    fn name(&self) -> &'static str {
        match self {
            SweepVariable::DropLengthKm => "drop_length_km",
            SweepVariable::Receivers => "receivers",
            SweepVariable::UpstreamPowerDbm => "upstream_power_dbm",
            SweepVariable::DownstreamPowerDbm => "downstream_power_dbm",
            SweepVariable::FeederLossDb => "feeder_loss_db",
            SweepVariable::GateWidthNs => "gate_width_ns",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    /// Number of rows; 0 behaves like 1 (a single row at `start`).
    pub steps: usize,
    /// Number of users sharing receivers, for the receiver sweep.
    #[serde(default)]
    pub onus: Option<u32>,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps.max(1);
        if n == 1 {
            return vec![self.start];
        }
        (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.start.is_finite() || !self.stop.is_finite() {
            v.push("start and stop must be finite".to_string());
            return v;
        }
        let lo = self.start.min(self.stop);
        match self.variable {
            SweepVariable::DropLengthKm | SweepVariable::FeederLossDb if lo < 0.0 => {
                v.push(format!("{} must stay >= 0", self.variable.name()));
            }
            SweepVariable::GateWidthNs if lo <= 0.0 => v.push("gate_width_ns must stay > 0".into()),
            SweepVariable::Receivers => {
                if lo < 1.0 {
                    v.push("receivers must stay >= 1".into());
                }
                if !self.onus.is_some_and(|m| m >= 1) {
                    v.push("receiver sweep needs `onus` >= 1".into());
                }
            }
            _ => {}
        }
        v
    }
}

struct Point {
    group_size: u32,
    per_onu_clock_hz: f64,
    report: crate::model::LinkReport,
    mc: Option<[f64; 4]>,
}

fn evaluate_step(cfg: &ScenarioConfig, model: &SystemModel, axis: &SweepAxis, step: usize, x: f64) -> Result<Point> {
    let mut t = cfg.topology.clone();
    let mut model = model.clone();
    let id = t.onus.first().map(|o| o.id).ok_or_else(|| Error::Config("topology has no ONU".into()))?;
    let clock = model.protocol.clock_rate_hz;
    let mut schedule = plan_schedule(1, 1, clock)?;
    match axis.variable {
        SweepVariable::DropLengthKm => t = with_drop_length(&t, x),
        SweepVariable::Receivers => {
            schedule = plan_schedule(axis.onus.unwrap_or(1), x.round().max(1.0) as u32, clock)?;
            let loss = cfg.splitter_table()?.loss_db(schedule.group_size)?;
            t = t.with_onu_splitter(id, schedule.group_size, loss);
        }
        SweepVariable::UpstreamPowerDbm | SweepVariable::DownstreamPowerDbm => {
            for onu in &mut t.onus {
                let ch = if axis.variable == SweepVariable::UpstreamPowerDbm {
                    onu.upstream.as_mut()
                } else {
                    onu.downstream.as_mut()
                };
                let ch = ch.ok_or_else(|| {
                    Error::Config(format!("ONU {} has no {} carrier to sweep", onu.id, axis.variable.name()))
                })?;
                ch.launch_power_dbm = x;
            }
        }
        SweepVariable::FeederLossDb => t.feeder_extra_loss_db = x,
        SweepVariable::GateWidthNs => model.detector.gate_width_ns = x,
    }
    let path = quantum_path(&t, id)?;
    let report = model.evaluate_path(&path, schedule.per_onu_clock_hz)?;
    let mc = match cfg.monte_carlo.num_gates {
        Some(gates) => {
            let budget = ChannelBudget::new(report.transmittance, report.background)?;
            let s = monte_carlo_intensity(
                model.protocol.mu_signal,
                &budget,
                model.detector.misalignment,
                gates,
                cfg.monte_carlo.seed.wrapping_add(step as u64),
            )?;
            Some([s.gain(), s.gain_sigma(), s.qber(), s.qber_sigma()])
        }
        None => None,
    };
    Ok(Point { group_size: schedule.group_size, per_onu_clock_hz: schedule.per_onu_clock_hz, report, mc })
}

/// Runs the scenario's single sweep axis. Steps are evaluated in parallel;
/// rows come out in step order.
pub fn sweep(cfg: &ScenarioConfig, model: &SystemModel) -> Result<Table> {
    let axis = match cfg.sweep.as_slice() {
        [axis] => axis,
        [] => return Err(Error::Config("scenario defines no [[sweep]] axis".into())),
        more => return Err(Error::Validation(vec![format!("sweep: exactly one axis per run, found {}", more.len())])),
    };
    let violations = axis.violations();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let values = axis.values();
    let points: Vec<Point> =
        values.par_iter().enumerate().map(|(i, &x)| evaluate_step(cfg, model, axis, i, x)).collect::<Result<_>>()?;

    let mut headers = vec![
        "step",
        "variable",
        "value",
        "group_size",
        "per_onu_clock_hz",
        "loss_db",
        "background",
        "qber_in",
        "qber_mcf_ds",
        "qber_mcf_us",
        "qber_ssmf_ds",
        "qber_ssmf_us",
        "qber_total",
        "skr_bps",
    ];
    let with_mc = cfg.monte_carlo.num_gates.is_some();
    if with_mc {
        headers.extend(["mc_gain_mu", "mc_gain_mu_sigma", "mc_qber_mu", "mc_qber_mu_sigma"]);
    }
    let mut table = Table::new(format!("sweep_{}", axis.variable.name()), &headers);
    for (i, (x, p)) in values.iter().zip(points).enumerate() {
        let r = &p.report;
        let q = &r.qber;
        let mut row: Vec<Value> = vec![
            i.into(),
            axis.variable.name().into(),
            (*x).into(),
            p.group_size.into(),
            p.per_onu_clock_hz.into(),
            r.loss_db.into(),
            r.background.into(),
            q.qber_in.into(),
            q.qber_mcf_ds.into(),
            q.qber_mcf_us.into(),
            q.qber_ssmf_ds.into(),
            q.qber_ssmf_us.into(),
            q.qber_total.into(),
            r.skr_bps.into(),
        ];
        if let Some(mc) = p.mc {
            row.extend(mc.map(Value::from));
        }
        table.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::scenario;
    use super::*;

    fn run(axis: SweepAxis) -> Table {
        let mut cfg = scenario();
        cfg.sweep = vec![axis];
        let model = cfg.model().unwrap();
        sweep(&cfg, &model).unwrap()
    }

    #[test]
    fn drop_sweep_is_monotone() {
        let t = run(SweepAxis { variable: SweepVariable::DropLengthKm, start: 0.0, stop: 3.0, steps: 31, onus: None });
        assert_eq!(t.rows.len(), 31);
        let q = t.floats("qber_total");
        assert!(q.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn zero_steps_is_one_row() {
        let t = run(SweepAxis { variable: SweepVariable::DropLengthKm, start: 1.0, stop: 3.0, steps: 0, onus: None });
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn receiver_sweep_is_monotone() {
        let t = run(SweepAxis { variable: SweepVariable::Receivers, start: 1.0, stop: 8.0, steps: 8, onus: Some(64) });
        let s = t.floats("skr_bps");
        assert!(s.windows(2).all(|w| w[1] >= w[0]), "{s:?}");
    }

    #[test]
    fn monte_carlo_columns_are_reproducible() {
        let mut cfg = scenario();
        cfg.sweep =
            vec![SweepAxis { variable: SweepVariable::GateWidthNs, start: 0.2, stop: 1.0, steps: 3, onus: None }];
        cfg.monte_carlo = super::super::MonteCarloSettings { num_gates: Some(200_000), seed: 9 };
        let model = cfg.model().unwrap();
        let a = sweep(&cfg, &model).unwrap();
        let b = sweep(&cfg, &model).unwrap();
        assert_eq!(a, b);
        assert!(a.column("mc_qber_mu").is_some());
    }

    #[test]
    fn sweep_needs_exactly_one_axis() {
        let cfg = scenario();
        let model = cfg.model().unwrap();
        assert!(sweep(&cfg, &model).is_err());
    }
}
