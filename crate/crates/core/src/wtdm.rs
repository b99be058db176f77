//! Wavelength/time-division sharing of quantum receivers.
//!
//! `M` ONUs share `R` receivers. Each receiver serves a group of ONUs behind
//! a 1*g power splitter and polls them round-robin, so every ONU pays the
//! splitter loss and transmits at `clock / g`. More receivers mean smaller
//! groups, less loss and a faster per-ONU clock, at the price of hardware.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cwas::{apply_plan, AssignmentPlan, LaunchPowers};
use crate::error::{invalid, Result};
use crate::model::SystemModel;
use crate::topology::{quantum_path, OnuId, Topology};

/// Measured insertion loss of 1*n splitters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitterLossTable {
    entries: BTreeMap<u32, f64>,
}

impl Default for SplitterLossTable {
    fn default() -> Self {
        Self::new([(1, 0.0), (2, 3.2), (4, 6.3), (8, 9.2), (16, 12.7), (32, 16.3), (64, 19.6), (128, 22.8)])
            .expect("built-in table is valid")
    }
}

impl SplitterLossTable {
    /// Ideal lossless split in dB per doubling.
    pub const IDEAL_DB_PER_DOUBLING: f64 = 3.0;

    pub fn new(entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let entries: BTreeMap<u32, f64> = entries.into_iter().collect();
        if entries.get(&1) != Some(&0.0) {
            return Err(invalid("splitter table", "ratio 1 must map to 0 dB"));
        }
        let mut prev = -1.0;
        for (&ratio, &loss) in &entries {
            if ratio == 0 || loss <= prev {
                return Err(invalid("splitter table", "losses must strictly increase with ratio"));
            }
            if loss < Self::IDEAL_DB_PER_DOUBLING * (ratio as f64).log2() {
                return Err(invalid("splitter table", format!("1*{ratio} at {loss} dB beats an ideal splitter")));
            }
            prev = loss;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().map(|(r, l)| (*r, *l))
    }

    /// Loss of a 1*`ratio` splitter. Ratios between table entries are
    /// interpolated linearly in log2(ratio).
    pub fn loss_db(&self, ratio: u32) -> Result<f64> {
        if let Some(l) = self.entries.get(&ratio) {
            return Ok(*l);
        }
        let below = self.entries.range(..ratio).next_back();
        let above = self.entries.range(ratio..).next();
        match (below, above) {
            (Some((&r0, &l0)), Some((&r1, &l1))) => {
                let x = ((ratio as f64).log2() - (r0 as f64).log2()) / ((r1 as f64).log2() - (r0 as f64).log2());
                Ok(l0 + x * (l1 - l0))
            }
            _ => Err(invalid("splitter ratio", format!("1*{ratio} is outside the loss table"))),
        }
    }
}

/// Insertion loss of an `n`-channel wavelength multiplexer: free for a single
/// channel, flat up to `flat_channels`, then `db_per_doubling` more for every
/// doubling beyond.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuxLossModel {
    pub flat_db: f64,
    pub flat_channels: u32,
    pub db_per_doubling: f64,
}

impl Default for MuxLossModel {
    fn default() -> Self {
        Self { flat_db: 3.0, flat_channels: 32, db_per_doubling: 1.0 }
    }
}

impl MuxLossModel {
    pub fn loss_db(&self, channels: u32) -> f64 {
        if channels <= 1 {
            0.0
        } else if channels <= self.flat_channels {
            self.flat_db
        } else {
            self.flat_db + self.db_per_doubling * (channels as f64 / self.flat_channels as f64).log2().ceil()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub num_onus: u32,
    pub num_receivers: u32,
    pub group_size: u32,
    pub clock_rate_hz: f64,
    pub per_onu_clock_hz: f64,
}

impl SchedulePlan {
    pub fn splitter_ratio(&self) -> u32 {
        self.group_size
    }
}

/// Smallest power-of-two group that lets `receivers` serve `onus`.
pub fn plan_schedule(onus: u32, receivers: u32, clock_rate_hz: f64) -> Result<SchedulePlan> {
    if onus == 0 {
        return Err(invalid("num_onus", "must be >= 1"));
    }
    if receivers == 0 {
        return Err(invalid("num_receivers", "must be >= 1"));
    }
    if !(clock_rate_hz > 0.0) {
        return Err(invalid("clock_rate_hz", format!("must be > 0, got {clock_rate_hz}")));
    }
    let group_size = onus.div_ceil(receivers).next_power_of_two();
    Ok(SchedulePlan {
        num_onus: onus,
        num_receivers: receivers,
        group_size,
        clock_rate_hz,
        per_onu_clock_hz: clock_rate_hz / group_size as f64,
    })
}

/// Per-ONU key rate under `plan`: every ONU of `t` (with `cwas` channels
/// applied) is placed behind a 1*group splitter and transmits at the reduced
/// clock. `extra_loss_db` adds a lumped loss such as a wavelength mux.
pub fn schedule_skr_with_loss(
    plan: &SchedulePlan,
    t: &Topology,
    cwas: Option<(&AssignmentPlan, &LaunchPowers)>,
    table: &SplitterLossTable,
    model: &SystemModel,
    extra_loss_db: f64,
) -> Result<Vec<(OnuId, f64)>> {
    let base = match cwas {
        Some((p, launch)) => apply_plan(p, t, launch)?,
        None => t.clone(),
    };
    let split_loss = table.loss_db(plan.group_size)?;
    let model = SystemModel { protocol: model.protocol.with_clock(plan.clock_rate_hz), ..model.clone() };
    base.onus
        .iter()
        .map(|onu| {
            let mut t = base.with_onu_splitter(onu.id, plan.group_size, split_loss);
            t.feeder_extra_loss_db += extra_loss_db;
            let path = quantum_path(&t, onu.id)?;
            Ok((onu.id, model.evaluate_path(&path, plan.per_onu_clock_hz)?.skr_bps))
        })
        .collect()
}

pub fn schedule_skr(
    plan: &SchedulePlan,
    t: &Topology,
    cwas: Option<(&AssignmentPlan, &LaunchPowers)>,
    table: &SplitterLossTable,
    model: &SystemModel,
) -> Result<Vec<(OnuId, f64)>> {
    schedule_skr_with_loss(plan, t, cwas, table, model, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub num_onus: u32,
    pub num_receivers: u32,
    pub group_size: u32,
    pub splitter_loss_db: f64,
    pub per_onu_clock_hz: f64,
    pub per_onu_skr_bps: f64,
}

/// Key rate of the first ONU of `t` for every receiver count in `receivers`.
pub fn receiver_sweep(
    onus: u32,
    receivers: &[u32],
    t: &Topology,
    table: &SplitterLossTable,
    model: &SystemModel,
) -> Result<Vec<ScheduleRow>> {
    receivers
        .iter()
        .map(|&r| {
            let plan = plan_schedule(onus, r, model.protocol.clock_rate_hz)?;
            let skr = schedule_skr(&plan, t, None, table, model)?;
            Ok(ScheduleRow {
                num_onus: onus,
                num_receivers: r,
                group_size: plan.group_size,
                splitter_loss_db: table.loss_db(plan.group_size)?,
                per_onu_clock_hz: plan.per_onu_clock_hz,
                per_onu_skr_bps: skr.first().map(|x| x.1).unwrap_or(0.0),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiplexingReport {
    pub num_onus: u32,
    /// One receiver, every ONU behind a 1*M splitter.
    pub tdm_skr: f64,
    /// One receiver per ONU behind an M-channel wavelength mux.
    pub wdm_skr: f64,
    pub wdm_receiver_count: u32,
    /// `(R, skr)` for every power-of-two receiver count up to M.
    pub wtdm_skr: Vec<(u32, f64)>,
    pub tdm_splitter_loss_db: f64,
}

/// TDM vs WDM vs W-TDM for `onus` users, evaluated on the first ONU of `t`.
pub fn compare_multiplexing(
    onus: u32,
    t: &Topology,
    table: &SplitterLossTable,
    mux: &MuxLossModel,
    model: &SystemModel,
) -> Result<MultiplexingReport> {
    let clock = model.protocol.clock_rate_hz;
    let eval = |r: u32| -> Result<f64> {
        let plan = plan_schedule(onus, r, clock)?;
        let skr = schedule_skr_with_loss(&plan, t, None, table, model, mux.loss_db(r))?;
        Ok(skr.first().map(|x| x.1).unwrap_or(0.0))
    };
    let mut receivers = Vec::new();
    let mut r = 1;
    while r < onus {
        receivers.push(r);
        r *= 2;
    }
    receivers.push(onus);
    let wtdm_skr = receivers.iter().map(|&r| Ok((r, eval(r)?))).collect::<Result<Vec<_>>>()?;
    let tdm_plan = plan_schedule(onus, 1, clock)?;
    Ok(MultiplexingReport {
        num_onus: onus,
        tdm_skr: wtdm_skr[0].1,
        wdm_skr: wtdm_skr[wtdm_skr.len() - 1].1,
        wdm_receiver_count: onus,
        wtdm_skr,
        tdm_splitter_loss_db: table.loss_db(tdm_plan.group_size)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::PhysicsParams;
    use crate::qkd::{DetectorParams, ProtocolParams};
    use proptest::prelude::*;

    fn model() -> SystemModel {
        SystemModel {
            protocol: ProtocolParams::default(),
            detector: DetectorParams::default(),
            physics: PhysicsParams::new(1.3e-10).unwrap(),
        }
    }

    #[test]
    fn schedule_examples() {
        let p = plan_schedule(64, 2, 50e6).unwrap();
        assert_eq!(p.group_size, 32);
        assert_eq!(SplitterLossTable::default().loss_db(p.splitter_ratio()).unwrap(), 16.3);
        let p = plan_schedule(1, 1, 50e6).unwrap();
        assert_eq!((p.group_size, p.per_onu_clock_hz), (1, 50e6));
        assert_eq!(plan_schedule(2, 1, 1e9).unwrap().per_onu_clock_hz, 500e6);
        assert_eq!(plan_schedule(5, 2, 1e9).unwrap().group_size, 4);
        assert!(plan_schedule(0, 1, 1e9).is_err());
    }

    #[test]
    fn table_interpolates_and_rejects() {
        let t = SplitterLossTable::default();
        let three = t.loss_db(3).unwrap();
        assert!(three > 3.2 && three < 6.3);
        assert!(t.loss_db(256).is_err());
        assert!(SplitterLossTable::new([(1, 0.0), (2, 2.0)]).is_err());
        assert!(SplitterLossTable::new([(1, 0.0), (2, 3.2), (4, 3.1)]).is_err());
    }

    #[test]
    fn tdm_of_32_pays_at_least_15_db() {
        let r = compare_multiplexing(
            32,
            &Topology::experiment(),
            &SplitterLossTable::default(),
            &MuxLossModel::default(),
            &model(),
        )
        .unwrap();
        assert!(r.tdm_splitter_loss_db >= 15.0);
    }

    #[test]
    fn single_user_modes_coincide() {
        let r = compare_multiplexing(
            1,
            &Topology::experiment(),
            &SplitterLossTable::default(),
            &MuxLossModel::default(),
            &model(),
        )
        .unwrap();
        assert_eq!(r.tdm_skr, r.wdm_skr);
        assert_eq!(r.wtdm_skr, vec![(1, r.tdm_skr)]);
    }

    #[test]
    fn multiplexing_ordering() {
        let (t, table, mux, m) =
            (Topology::experiment(), SplitterLossTable::default(), MuxLossModel::default(), model());
        for onus in [2, 4, 8, 16, 32, 64, 128] {
            let r = compare_multiplexing(onus, &t, &table, &mux, &m).unwrap();
            for &(_, s) in &r.wtdm_skr {
                assert!(r.wdm_skr >= s && s >= r.tdm_skr, "M={onus}: {r:?}");
            }
            assert!(r.wdm_receiver_count == onus);
        }
    }

    #[test]
    fn sharing_one_receiver_costs_more_than_the_clock() {
        let (t, table, m) = (Topology::experiment(), SplitterLossTable::default(), model());
        let one = schedule_skr(&plan_schedule(32, 1, 50e6).unwrap(), &t, None, &table, &m).unwrap()[0].1;
        let all = schedule_skr(&plan_schedule(32, 32, 50e6).unwrap(), &t, None, &table, &m).unwrap()[0].1;
        assert!(all > 0.0);
        assert!(one == 0.0 || all / one > 32.0, "{all} / {one}");
    }

    proptest! {
        #[test]
        fn clock_times_group_is_clock(m in 1u32..5000, r in 1u32..300, clock in 1e6f64..2e9) {
            let p = plan_schedule(m, r, clock).unwrap();
            prop_assert!(p.group_size.is_power_of_two());
            prop_assert!(p.num_receivers as u64 * p.group_size as u64 >= m as u64);
            prop_assert!((p.per_onu_clock_hz * p.group_size as f64 - clock).abs() <= clock * 1e-15);
        }

        #[test]
        fn skr_non_decreasing_in_receivers(m in 1u32..128, r in 1u32..128) {
            let (t, table, md) = (Topology::experiment(), SplitterLossTable::default(), model());
            let a = schedule_skr(&plan_schedule(m, r, 50e6).unwrap(), &t, None, &table, &md).unwrap()[0].1;
            let b = schedule_skr(&plan_schedule(m, r + 1, 50e6).unwrap(), &t, None, &table, &md).unwrap()[0].1;
            prop_assert!(b >= a);
        }
    }
}
