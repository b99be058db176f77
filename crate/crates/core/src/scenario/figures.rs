//! Named runners regenerating the data behind each measurement figure.
//!
//! | name    | content                                                          |
//! |---------|------------------------------------------------------------------|
//! | `fig3`  | MCF + attenuator feeder vs plain 20 km SSMF, cases 1, 4, 5, 6    |
//! | `fig4`  | cases 1-6 behind 1*1, 1*2, 1*3 splitters (clock not rescaled)    |
//! | `fig5`  | QBER vs drop length with no, downstream-only, upstream-only CS   |
//! | `fig6`  | QBER budget and SKR vs drop length, all carriers on              |
//! | `fig7a` | same with a narrow filter and short gate, against the no-CS curve |
//! | `fig7b` | per-ONU SKR vs receiver count for M users (narrow filtering)     |
//!
//! Cases: 1 no classical signal, 2 downstream in the MCF, 3 upstream in the
//! MCF, 4 downstream in the drop fiber, 5 upstream in the drop fiber, 6 all
//! four at once.

use std::str::FromStr;

use super::table::{Table, Value};
use super::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::{LinkReport, SystemModel};
use crate::physics::{Direction, FiberKind, FiberSegment};
use crate::topology::{Placement, Topology, WdmModule};
use crate::wtdm::receiver_sweep;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    /// Both parts of the filtering / receiver study.
    Fig7,
    Fig7a,
    Fig7b,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fig3" => Figure::Fig3,
            "fig4" => Figure::Fig4,
            "fig5" => Figure::Fig5,
            "fig6" => Figure::Fig6,
            "fig7" => Figure::Fig7,
            "fig7a" => Figure::Fig7a,
            "fig7b" => Figure::Fig7b,
            _ => return Err(Error::UnknownFigure(s.to_string())),
        })
    }
}

/// Which classical carriers are switched on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChannelMask {
    pub mcf_ds: bool,
    pub mcf_us: bool,
    pub ssmf_ds: bool,
    pub ssmf_us: bool,
}

impl ChannelMask {
    pub const NONE: Self = Self { mcf_ds: false, mcf_us: false, ssmf_ds: false, ssmf_us: false };
    pub const ALL: Self = Self { mcf_ds: true, mcf_us: true, ssmf_ds: true, ssmf_us: true };

    pub fn case(n: u8) -> Option<Self> {
        let m = Self::NONE;
        Some(match n {
            1 => m,
            2 => Self { mcf_ds: true, ..m },
            3 => Self { mcf_us: true, ..m },
            4 => Self { ssmf_ds: true, ..m },
            5 => Self { ssmf_us: true, ..m },
            6 => Self::ALL,
            _ => return None,
        })
    }

    /// Drops the carriers this mask switches off.
    pub fn apply(&self, t: &Topology) -> Topology {
        let mut t = t.clone();
        t.feeder_channels.retain(|c| match c.direction {
            Direction::Downstream => self.mcf_ds,
            Direction::Upstream => self.mcf_us,
        });
        for onu in &mut t.onus {
            if !self.ssmf_ds {
                onu.downstream = None;
            }
            if !self.ssmf_us {
                onu.upstream = None;
            }
        }
        t
    }
}

const BUDGET_HEADERS: [&str; 7] =
    ["qber_in", "qber_mcf_ds", "qber_mcf_us", "qber_ssmf_ds", "qber_ssmf_us", "qber_total", "skr_bps"];

fn budget_cells(r: &LinkReport) -> Vec<Value> {
    let q = &r.qber;
    [q.qber_in, q.qber_mcf_ds, q.qber_mcf_us, q.qber_ssmf_ds, q.qber_ssmf_us, q.qber_total, r.skr_bps]
        .into_iter()
        .map(Value::from)
        .collect()
}

fn headers<'a>(lead: &[&'a str]) -> Vec<&'a str> {
    lead.iter().copied().chain(BUDGET_HEADERS).collect()
}

fn first_onu(t: &Topology) -> Result<u32> {
    t.onus.first().map(|o| o.id).ok_or_else(|| Error::Config("topology has no ONU".into()))
}

fn evaluate(model: &SystemModel, t: &Topology) -> Result<LinkReport> {
    model.evaluate(t, first_onu(t)?)
}

/// Sets every ONU's drop fiber to `km`.
pub fn with_drop_length(t: &Topology, km: f64) -> Topology {
    let mut t = t.clone();
    for onu in &mut t.onus {
        onu.drop.length_km = km;
    }
    t
}

/// Adds the narrow filter in front of the detector.
fn with_strict_filter(cfg: &ScenarioConfig, t: &Topology) -> Topology {
    let mut t = t.clone();
    t.wdm_modules.push(WdmModule {
        label: "narrow filter".into(),
        placement: Placement::Olt,
        center_frequency_thz: None,
        passband_ghz: cfg.figures.strict_passband_ghz,
        insertion_loss_db: cfg.figures.strict_filter_loss_db,
    });
    t
}

fn with_gate(model: &SystemModel, gate_ns: f64) -> SystemModel {
    let mut m = model.clone();
    m.detector.gate_width_ns = gate_ns;
    m
}

fn drop_grid(cfg: &ScenarioConfig) -> Vec<f64> {
    let n = cfg.figures.drop_steps.max(1);
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| cfg.figures.drop_max_km * i as f64 / (n - 1) as f64).collect()
}

/// Report for the configured topology with every carrier on and no splitter.
pub fn headline(cfg: &ScenarioConfig, model: &SystemModel) -> Result<LinkReport> {
    let t = cfg.topology.clone();
    let id = first_onu(&t)?;
    evaluate(model, &t.with_onu_splitter(id, 1, 0.0))
}

/// Longest drop fiber with a positive key rate, by bisection over
/// `[0, max_km]`; `None` when the rate is already zero at 0 km.
pub fn max_drop_length(model: &SystemModel, t: &Topology, max_km: f64) -> Result<Option<f64>> {
    let rate = |km: f64| evaluate(model, &with_drop_length(t, km)).map(|r| r.skr_bps);
    if rate(0.0)? <= 0.0 {
        return Ok(None);
    }
    if rate(max_km)? > 0.0 {
        return Ok(Some(max_km));
    }
    let (mut lo, mut hi) = (0.0, max_km);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

pub fn run_figure(figure: Figure, cfg: &ScenarioConfig, model: &SystemModel) -> Result<Vec<Table>> {
    match figure {
        Figure::Fig3 => fig3(cfg, model).map(|t| vec![t]),
        Figure::Fig4 => fig4(cfg, model).map(|t| vec![t]),
        Figure::Fig5 => fig5(cfg, model).map(|t| vec![t]),
        Figure::Fig6 => fig6(cfg, model).map(|t| vec![t]),
        Figure::Fig7 => Ok(vec![fig7a(cfg, model)?, fig7b(cfg, model)?]),
        Figure::Fig7a => fig7a(cfg, model).map(|t| vec![t]),
        Figure::Fig7b => fig7b(cfg, model).map(|t| vec![t]),
    }
}

fn fig3(cfg: &ScenarioConfig, model: &SystemModel) -> Result<Table> {
    let mut table = Table::new("fig3", &headers(&["feeder", "case"]));
    let mcf = cfg.topology.clone();
    let mut ssmf = cfg.topology.clone();
    ssmf.feeder = FiberSegment {
        length_km: cfg.figures.ssmf_feeder_km,
        attenuation_db_per_km: cfg.figures.ssmf_attenuation_db_per_km,
        kind: FiberKind::Ssmf,
    };
    ssmf.feeder_extra_loss_db = 0.0;
    for (label, t) in [("mcf", &mcf), ("ssmf", &ssmf)] {
        for case in [1u8, 4, 5, 6] {
            let mut mask = ChannelMask::case(case).expect("valid case");
            mask.mcf_ds = false;
            mask.mcf_us = false;
            let r = evaluate(model, &mask.apply(t))?;
            let mut row = vec![Value::from(label), Value::from(case as u32)];
            row.extend(budget_cells(&r));
            table.push(row);
        }
    }
    Ok(table)
}

fn fig4(cfg: &ScenarioConfig, model: &SystemModel) -> Result<Table> {
    let mut table = Table::new("fig4", &headers(&["splitter_ratio", "case"]));
    let splitters = cfg.splitter_table()?;
    let id = first_onu(&cfg.topology)?;
    for &ratio in &cfg.figures.splitter_ratios {
        let t = cfg.topology.with_onu_splitter(id, ratio, splitters.loss_db(ratio)?);
        for case in 1u8..=6 {
            let r = evaluate(model, &ChannelMask::case(case).expect("valid case").apply(&t))?;
            let mut row = vec![Value::from(ratio), Value::from(case as u32)];
            row.extend(budget_cells(&r));
            table.push(row);
        }
    }
    Ok(table)
}

fn fig5(cfg: &ScenarioConfig, model: &SystemModel) -> Result<Table> {
    let mut table = Table::new("fig5", &["drop_length_km", "qber_no_cs", "qber_downstream", "qber_upstream"]);
    let masks = [ChannelMask::NONE, ChannelMask::case(4).unwrap(), ChannelMask::case(5).unwrap()];
    for km in drop_grid(cfg) {
        let t = with_drop_length(&cfg.topology, km);
        let mut row = vec![Value::from(km)];
        for m in masks {
            row.push(evaluate(model, &m.apply(&t))?.qber.qber_total.into());
        }
        table.push(row);
    }
    Ok(table)
}

fn fig6(cfg: &ScenarioConfig, model: &SystemModel) -> Result<Table> {
    let mut table = Table::new("fig6", &headers(&["drop_length_km"]));
    for km in drop_grid(cfg) {
        let r = evaluate(model, &with_drop_length(&cfg.topology, km))?;
        let mut row = vec![Value::from(km)];
        row.extend(budget_cells(&r));
        table.push(row);
    }
    Ok(table)
}

/// Narrow-filter operating point and the unfiltered no-CS reference at the
/// same drop length: `(filtered, reference)`.
pub fn filtered_pair(cfg: &ScenarioConfig, model: &SystemModel, km: f64) -> Result<(LinkReport, LinkReport)> {
    let t = with_drop_length(&cfg.topology, km);
    let filtered = evaluate(&with_gate(model, cfg.figures.strict_gate_ns), &with_strict_filter(cfg, &t))?;
    let reference = evaluate(model, &ChannelMask::NONE.apply(&t))?;
    Ok((filtered, reference))
}

fn fig7a(cfg: &ScenarioConfig, model: &SystemModel) -> Result<Table> {
    let mut table = Table::new(
        "fig7a",
        &["drop_length_km", "qber_total", "skr_bps", "qber_no_cs", "skr_no_cs_bps", "qber_gap", "skr_gap_bps"],
    );
    for km in drop_grid(cfg) {
        let (f, r) = filtered_pair(cfg, model, km)?;
        table.push(vec![
            km.into(),
            f.qber.qber_total.into(),
            f.skr_bps.into(),
            r.qber.qber_total.into(),
            r.skr_bps.into(),
            (f.qber.qber_total - r.qber.qber_total).into(),
            (r.skr_bps - f.skr_bps).into(),
        ]);
    }
    Ok(table)
}

fn fig7b(cfg: &ScenarioConfig, model: &SystemModel) -> Result<Table> {
    let t = with_strict_filter(cfg, &with_drop_length(&cfg.topology, cfg.figures.strict_drop_km));
    let m = with_gate(model, cfg.figures.strict_gate_ns);
    let rows = receiver_sweep(cfg.figures.receiver_onus, &cfg.figures.receivers, &t, &cfg.splitter_table()?, &m)?;
    let mut table =
        Table::new("fig7b", &["M", "R", "group_size", "splitter_loss_db", "per_onu_clock_hz", "per_onu_skr_bps"]);
    for r in rows {
        table.push(vec![
            r.num_onus.into(),
            r.num_receivers.into(),
            r.group_size.into(),
            r.splitter_loss_db.into(),
            r.per_onu_clock_hz.into(),
            r.per_onu_skr_bps.into(),
        ]);
    }
    Ok(table)
}
