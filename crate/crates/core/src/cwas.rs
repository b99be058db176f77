//! Core and wavelength assignment.
//!
//! Three rules keep classical light from swamping the quantum channels:
//!
//! 1. quantum signals get a core of their own;
//! 2. quantum channels sit outside the classical wavebands, so crosstalk
//!    from neighbouring cores lands out of band and is filtered away;
//! 3. every upstream carrier is below its ONU's quantum frequency, so the
//!    quantum channel only sees the weaker anti-Stokes Raman tail of the
//!    strongest co-propagating pump.
//!
//! [`assign`] builds a plan greedily; [`validate_plan`] checks any plan
//! against the rules; [`predict_plan_qber`] runs the noise model on it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result;
use crate::model::SystemModel;
use crate::physics::Direction;
use crate::qkd::QberBudget;
use crate::topology::{DropChannel, FeederChannel, OnuId, Topology};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Infeasibility {
    #[error("core shortage: {needed} cores needed (1 quantum + {classical} classical), topology has {available}")]
    CoreShortage { needed: usize, classical: usize, available: usize },
    #[error("waveband shortage in the {band} band: {needed} channels needed, {available} grid slots free")]
    WavebandShortage { band: &'static str, needed: usize, available: usize },
    #[error("ordering: {0}")]
    Ordering(String),
    #[error("invalid demand: {0}")]
    InvalidDemand(String),
}

/// Closed frequency interval in THz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_thz: f64,
    pub hi_thz: f64,
}

impl Band {
    pub fn new(lo_thz: f64, hi_thz: f64) -> Self {
        Self { lo_thz, hi_thz }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo_thz - 1e-9 && f <= self.hi_thz + 1e-9
    }

    fn hull(freqs: impl IntoIterator<Item = f64>) -> Option<Self> {
        freqs.into_iter().fold(None, |acc, f| match acc {
            None => Some(Band::new(f, f)),
            Some(b) => Some(Band::new(b.lo_thz.min(f), b.hi_thz.max(f))),
        })
    }

    /// Grid points `lo + k·spacing` inside the band.
    fn grid(&self, spacing_ghz: f64) -> Vec<f64> {
        let step = spacing_ghz / 1000.0;
        if !(step > 0.0) || self.hi_thz < self.lo_thz {
            return Vec::new();
        }
        let n = ((self.hi_thz - self.lo_thz) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| ((self.lo_thz + k as f64 * step) * 1e6).round() / 1e6).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavebandGrid {
    pub spacing_ghz: f64,
    pub downstream: Band,
    pub upstream: Band,
    pub quantum: Band,
    pub sync: Band,
}

impl WavebandGrid {
    /// 100 GHz grid placing the laboratory channels on the first slot of each
    /// band: upstream 191.6, sync 193.3, quantum 193.5, downstream 195.6 THz.
    pub fn experiment() -> Self {
        Self {
            spacing_ghz: 100.0,
            downstream: Band::new(195.6, 196.1),
            upstream: Band::new(191.6, 192.1),
            quantum: Band::new(193.5, 194.0),
            sync: Band::new(193.3, 193.4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demands {
    pub qs_channels: usize,
    pub cs_cores: usize,
    /// Upstream/downstream pairs per classical core.
    pub cs_pairs_per_core: usize,
    pub grid: WavebandGrid,
    /// Pins the quantum core instead of choosing it.
    #[serde(default)]
    pub quantum_core: Option<usize>,
    /// Pins the classical cores instead of choosing them.
    #[serde(default)]
    pub classical_cores: Option<Vec<usize>>,
}

impl Demands {
    /// One quantum channel and one classical pair on each of the three cores
    /// neighbouring the quantum core, as in the laboratory.
    pub fn experiment() -> Self {
        Self {
            qs_channels: 1,
            cs_cores: 3,
            cs_pairs_per_core: 1,
            grid: WavebandGrid::experiment(),
            quantum_core: Some(2),
            classical_cores: Some(vec![0, 1, 3]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalPair {
    pub core: usize,
    pub upstream_thz: f64,
    pub downstream_thz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnuAssignment {
    pub onu: OnuId,
    pub qs_thz: f64,
    pub ss_thz: f64,
    /// Index into [`AssignmentPlan::classical`] of the ONU's own carriers.
    pub classical: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub quantum_core: usize,
    pub classical_cores: BTreeSet<usize>,
    pub classical: Vec<ClassicalPair>,
    pub onus: Vec<OnuAssignment>,
    pub ss_band: Band,
    /// The quantum channels may sit between the upstream and downstream
    /// bands, so classical spectrum is a list of disjoint bands.
    pub classical_bands: Vec<Band>,
}

impl AssignmentPlan {
    pub fn onu_upstream(&self, a: &OnuAssignment) -> Option<f64> {
        a.classical.and_then(|i| self.classical.get(i)).map(|p| p.upstream_thz)
    }

    /// Exchanges the upstream and quantum frequencies: every ONU moves onto
    /// its upstream carrier's frequency and every upstream carrier onto the
    /// quantum frequency of the first ONU using it. The result breaks the
    /// upstream-below-quantum rule whenever the input obeyed it.
    pub fn swap_upstream_and_qs(&self) -> Self {
        let mut out = self.clone();
        for (i, pair) in out.classical.iter_mut().enumerate() {
            if let Some(a) = self.onus.iter().find(|a| a.classical == Some(i)) {
                pair.upstream_thz = a.qs_thz;
            }
        }
        for a in &mut out.onus {
            if let Some(us) = self.onu_upstream(a) {
                a.qs_thz = us;
            }
        }
        out
    }
}

/// Number of `candidates` adjacent to `q`.
fn forced_adjacent(t: &Topology, q: usize, chosen: &[usize]) -> usize {
    let n = t.neighbours(q);
    chosen.iter().filter(|c| n.contains(c)).count()
}

/// Picks `k` classical cores for quantum core `q`, non-neighbours first,
/// lowest index first.
fn pick_classical(t: &Topology, q: usize, k: usize) -> Vec<usize> {
    let n = t.neighbours(q);
    let mut cores: Vec<usize> = (0..t.num_cores).filter(|&c| c != q).collect();
    cores.sort_by_key(|c| (n.contains(c), *c));
    cores.truncate(k);
    cores.sort_unstable();
    cores
}

/// Greedy assignment satisfying the three rules.
///
/// The quantum core is the one that can be surrounded by the fewest classical
/// neighbours (ties to the lowest index). Classical pairs fill the upstream
/// and downstream bands from their low edge; quantum channels take the lowest
/// grid slots above every upstream carrier and outside the classical bands;
/// sync channels take free slots of the sync band.
pub fn assign(t: &Topology, demands: &Demands) -> std::result::Result<AssignmentPlan, Infeasibility> {
    let n = t.num_cores;
    if demands.qs_channels == 0 {
        return Err(Infeasibility::InvalidDemand("at least one quantum channel is required".into()));
    }
    if demands.cs_cores + 1 > n {
        return Err(Infeasibility::CoreShortage {
            needed: demands.cs_cores + 1,
            classical: demands.cs_cores,
            available: n,
        });
    }
    if demands.cs_pairs_per_core > t.num_wavelengths {
        return Err(Infeasibility::WavebandShortage {
            band: "per-core wavelength",
            needed: demands.cs_pairs_per_core,
            available: t.num_wavelengths,
        });
    }

    let (quantum_core, classical_cores) = match (&demands.quantum_core, &demands.classical_cores) {
        (Some(q), Some(cs)) => (*q, cs.clone()),
        (Some(q), None) => (*q, pick_classical(t, *q, demands.cs_cores)),
        (None, pinned) => {
            let best = (0..n)
                .filter(|q| pinned.as_ref().is_none_or(|cs| !cs.contains(q)))
                .map(|q| {
                    let cs = pinned.clone().unwrap_or_else(|| pick_classical(t, q, demands.cs_cores));
                    (forced_adjacent(t, q, &cs), q, cs)
                })
                .min_by_key(|(f, q, _)| (*f, *q));
            match best {
                Some((_, q, cs)) => (q, cs),
                None => {
                    return Err(Infeasibility::CoreShortage {
                        needed: demands.cs_cores + 1,
                        classical: demands.cs_cores,
                        available: n,
                    })
                }
            }
        }
    };
    if quantum_core >= n || classical_cores.iter().any(|&c| c >= n || c == quantum_core) {
        return Err(Infeasibility::InvalidDemand(format!(
            "quantum core {quantum_core} / classical cores {classical_cores:?} do not fit {n} cores"
        )));
    }

    let g = &demands.grid;
    let us_slots = g.upstream.grid(g.spacing_ghz);
    let ds_slots = g.downstream.grid(g.spacing_ghz);
    let pairs = demands.cs_pairs_per_core;
    if us_slots.len() < pairs {
        return Err(Infeasibility::WavebandShortage { band: "upstream", needed: pairs, available: us_slots.len() });
    }
    if ds_slots.len() < pairs {
        return Err(Infeasibility::WavebandShortage { band: "downstream", needed: pairs, available: ds_slots.len() });
    }
    let classical_bands = vec![g.upstream, g.downstream];
    let in_classical = |f: f64| classical_bands.iter().any(|b| b.contains(f));

    let max_us = us_slots[pairs - 1];
    let qs_candidates: Vec<f64> = g.quantum.grid(g.spacing_ghz).into_iter().filter(|f| !in_classical(*f)).collect();
    let qs: Vec<f64> = qs_candidates.iter().copied().filter(|f| *f > max_us + 1e-9).collect();
    if qs.len() < demands.qs_channels {
        if qs_candidates.len() >= demands.qs_channels {
            return Err(Infeasibility::Ordering(format!(
                "only {} quantum slots lie above the highest upstream carrier {max_us} THz, {} needed",
                qs.len(),
                demands.qs_channels
            )));
        }
        return Err(Infeasibility::WavebandShortage {
            band: "quantum",
            needed: demands.qs_channels,
            available: qs_candidates.len(),
        });
    }
    let qs = &qs[..demands.qs_channels];

    let ss: Vec<f64> = g
        .sync
        .grid(g.spacing_ghz)
        .into_iter()
        .filter(|f| !in_classical(*f) && !qs.iter().any(|q| (q - f).abs() < 1e-9))
        .collect();
    if ss.len() < demands.qs_channels {
        return Err(Infeasibility::WavebandShortage { band: "sync", needed: demands.qs_channels, available: ss.len() });
    }
    let ss = &ss[..demands.qs_channels];
    let ss_band = Band::hull(ss.iter().copied()).expect("at least one sync channel");
    if qs.iter().any(|q| ss_band.contains(*q)) {
        return Err(Infeasibility::Ordering("sync band would enclose a quantum channel".into()));
    }

    let classical: Vec<ClassicalPair> = classical_cores
        .iter()
        .flat_map(|&core| {
            (0..pairs)
                .map(|k| ClassicalPair { core, upstream_thz: us_slots[k], downstream_thz: ds_slots[k] })
                .collect::<Vec<_>>()
        })
        .collect();
    let onus = t
        .onus
        .iter()
        .enumerate()
        .map(|(i, o)| OnuAssignment {
            onu: o.id,
            qs_thz: qs[i % qs.len()],
            ss_thz: ss[i % ss.len()],
            classical: if classical.is_empty() { None } else { Some(i % classical.len()) },
        })
        .collect();

    Ok(AssignmentPlan {
        quantum_core,
        classical_cores: classical_cores.into_iter().collect(),
        classical,
        onus,
        ss_band,
        classical_bands,
    })
}

/// Lists every rule violation; each entry names the rule and the entity.
pub fn validate_plan(plan: &AssignmentPlan, t: &Topology) -> Vec<String> {
    let mut v = Vec::new();
    if plan.quantum_core >= t.num_cores {
        v.push(format!("quantum core {} outside 0..{}", plan.quantum_core, t.num_cores));
    }
    if plan.classical_cores.contains(&plan.quantum_core) {
        v.push(format!("rule (a): core {} carries both quantum and classical signals", plan.quantum_core));
    }
    for (i, p) in plan.classical.iter().enumerate() {
        if p.core == plan.quantum_core {
            v.push(format!("rule (a): classical pair {i} is routed in quantum core {}", p.core));
        } else if !plan.classical_cores.contains(&p.core) {
            v.push(format!("classical pair {i} uses core {} not listed as classical", p.core));
        }
        if p.core >= t.num_cores {
            v.push(format!("classical pair {i}: core {} outside 0..{}", p.core, t.num_cores));
        }
    }
    for a in &plan.onus {
        if t.onu(a.onu).is_err() {
            v.push(format!("ONU {} is not part of the topology", a.onu));
        }
        if let Some(b) = plan.classical_bands.iter().find(|b| b.contains(a.qs_thz)) {
            v.push(format!(
                "rule (b): ONU {} quantum channel {:.3} THz lies in classical band {:.3}-{:.3} THz",
                a.onu, a.qs_thz, b.lo_thz, b.hi_thz
            ));
        }
        if let Some(us) = plan.onu_upstream(a) {
            if us >= a.qs_thz {
                v.push(format!(
                    "rule (c): ONU {} upstream {:.3} THz is not below its quantum channel {:.3} THz",
                    a.onu, us, a.qs_thz
                ));
            }
        }
        if plan.ss_band.contains(a.qs_thz) {
            v.push(format!(
                "rule (d): ONU {} quantum channel {:.3} THz lies in the sync band {:.3}-{:.3} THz",
                a.onu, a.qs_thz, plan.ss_band.lo_thz, plan.ss_band.hi_thz
            ));
        }
    }
    v
}

/// Launch powers in dBm; `None` switches that class of carrier off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchPowers {
    pub feeder_downstream_dbm: Option<f64>,
    pub feeder_upstream_dbm: Option<f64>,
    pub drop_downstream_dbm: Option<f64>,
    pub drop_upstream_dbm: Option<f64>,
}

impl LaunchPowers {
    /// 20 dBm per feeder carrier, -10 dBm downstream and 0 dBm upstream on
    /// the drop fiber.
    pub fn experiment() -> Self {
        Self {
            feeder_downstream_dbm: Some(20.0),
            feeder_upstream_dbm: Some(20.0),
            drop_downstream_dbm: Some(-10.0),
            drop_upstream_dbm: Some(0.0),
        }
    }
}

/// Rewrites the topology's core use and channel frequencies to follow `plan`.
pub fn apply_plan(plan: &AssignmentPlan, t: &Topology, launch: &LaunchPowers) -> Result<Topology> {
    let mut out = t.clone();
    out.quantum_core = plan.quantum_core;
    out.feeder_channels.clear();
    for p in &plan.classical {
        if let Some(dbm) = launch.feeder_downstream_dbm {
            out.feeder_channels.push(FeederChannel {
                core: p.core,
                frequency_thz: p.downstream_thz,
                launch_power_dbm: dbm,
                direction: Direction::Downstream,
            });
        }
        if let Some(dbm) = launch.feeder_upstream_dbm {
            out.feeder_channels.push(FeederChannel {
                core: p.core,
                frequency_thz: p.upstream_thz,
                launch_power_dbm: dbm,
                direction: Direction::Upstream,
            });
        }
    }
    for a in &plan.onus {
        let pair = a.classical.and_then(|i| plan.classical.get(i)).cloned();
        let onu = out.onu_mut(a.onu)?;
        onu.endpoint.qs_frequency_thz = a.qs_thz;
        onu.endpoint.ss_frequency_thz = a.ss_thz;
        onu.upstream = match (&pair, launch.drop_upstream_dbm) {
            (Some(p), Some(dbm)) => Some(DropChannel { frequency_thz: p.upstream_thz, launch_power_dbm: dbm }),
            _ => None,
        };
        onu.downstream = match (&pair, launch.drop_downstream_dbm) {
            (Some(p), Some(dbm)) => Some(DropChannel { frequency_thz: p.downstream_thz, launch_power_dbm: dbm }),
            _ => None,
        };
    }
    Ok(out)
}

/// QBER budget of every ONU under `plan`. Rule violations are not rejected,
/// so non-compliant plans can be compared against compliant ones.
pub fn predict_plan_qber(
    plan: &AssignmentPlan,
    t: &Topology,
    launch: &LaunchPowers,
    model: &SystemModel,
) -> Result<Vec<(OnuId, QberBudget)>> {
    let applied = apply_plan(plan, t, launch)?;
    plan.onus.iter().map(|a| Ok((a.onu, model.evaluate(&applied, a.onu)?.qber))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::PhysicsParams;
    use crate::qkd::{DetectorParams, ProtocolParams};
    use crate::topology::{Onu, QuantumEndpoint};

    fn model() -> SystemModel {
        SystemModel {
            protocol: ProtocolParams::default(),
            detector: DetectorParams::default(),
            physics: PhysicsParams::new(1.3e-10).unwrap(),
        }
    }

    #[test]
    fn experiment_plan_matches_the_lab() {
        let t = Topology::experiment();
        let plan = assign(&t, &Demands::experiment()).unwrap();
        assert_eq!(plan.quantum_core, 2);
        assert_eq!(plan.onus[0].qs_thz, 193.5);
        assert_eq!(plan.onus[0].ss_thz, 193.3);
        assert_eq!(plan.classical[0].upstream_thz, 191.6);
        assert_eq!(plan.classical[0].downstream_thz, 195.6);
        assert!(validate_plan(&plan, &t).is_empty());
        let applied = apply_plan(&plan, &t, &LaunchPowers::experiment()).unwrap();
        assert_eq!(applied, t);
    }

    #[test]
    fn greedy_core_choice_matches_brute_force() {
        let mut t = Topology::experiment();
        t.num_wavelengths = 4;
        for cs in 1..=6 {
            let mut d = Demands {
                qs_channels: 4,
                cs_cores: cs,
                quantum_core: None,
                classical_cores: None,
                ..Demands::experiment()
            };
            d.grid.sync = Band::new(193.0, 193.4);
            let plan = assign(&t, &d).unwrap();
            // Brute force: every quantum core against every classical subset.
            let mut best = (usize::MAX, usize::MAX);
            for q in 0..7 {
                let others: Vec<usize> = (0..7).filter(|&c| c != q).collect();
                for mask in 0u32..(1 << 6) {
                    if mask.count_ones() as usize != cs {
                        continue;
                    }
                    let chosen: Vec<usize> = (0..6).filter(|b| mask & (1 << b) != 0).map(|b| others[b]).collect();
                    let f = forced_adjacent(&t, q, &chosen);
                    if (f, q) < best {
                        best = (f, q);
                    }
                }
            }
            let got = forced_adjacent(&t, plan.quantum_core, &plan.classical_cores.iter().copied().collect::<Vec<_>>());
            assert_eq!((got, plan.quantum_core), best, "cs = {cs}");
            assert!(validate_plan(&plan, &t).is_empty());
            let max_us = plan.classical.iter().map(|p| p.upstream_thz).fold(f64::MIN, f64::max);
            assert!(plan.onus.iter().all(|a| a.qs_thz > max_us));
        }
    }

    #[test]
    fn two_cores_force_the_quantum_core() {
        let mut t = Topology::experiment();
        t.num_cores = 2;
        t.quantum_core = 0;
        let d = Demands { cs_cores: 1, quantum_core: None, classical_cores: None, ..Demands::experiment() };
        let plan = assign(&t, &d).unwrap();
        assert_eq!(plan.quantum_core, 0);
        assert_eq!(plan.classical_cores.iter().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn infeasibility_names_the_constraint() {
        let t = Topology::experiment();
        let d = Demands { cs_cores: 7, quantum_core: None, classical_cores: None, ..Demands::experiment() };
        assert!(matches!(assign(&t, &d), Err(Infeasibility::CoreShortage { .. })));
        let mut d = Demands::experiment();
        d.qs_channels = 20;
        assert!(matches!(assign(&t, &d), Err(Infeasibility::WavebandShortage { band: "quantum", .. })));
        let mut d = Demands::experiment();
        d.grid.quantum = Band::new(190.0, 190.5);
        assert!(matches!(assign(&t, &d), Err(Infeasibility::Ordering(_))));
    }

    #[test]
    fn rule_violations() {
        let t = Topology::experiment();
        let plan = assign(&t, &Demands::experiment()).unwrap();

        let mut bad = plan.clone();
        bad.classical[0].upstream_thz = 195.6;
        let v = validate_plan(&bad, &t);
        assert!(v.len() == 1 && v[0].starts_with("rule (c)"), "{v:?}");

        let mut bad = plan.clone();
        bad.onus[0].qs_thz = 194.6;
        bad.classical_bands.push(Band::new(194.0, 195.0));
        let v = validate_plan(&bad, &t);
        assert!(v.iter().any(|s| s.starts_with("rule (b)")), "{v:?}");

        let mut bad = plan.clone();
        bad.classical_cores.insert(2);
        assert!(validate_plan(&bad, &t)[0].starts_with("rule (a)"));

        let mut bad = plan;
        bad.ss_band = Band::new(193.3, 193.6);
        assert!(validate_plan(&bad, &t)[0].starts_with("rule (d)"));
    }

    #[test]
    fn mcf_noise_is_negligible_and_swap_hurts() {
        let t = Topology::experiment();
        let plan = assign(&t, &Demands::experiment()).unwrap();
        let m = model();
        let b = predict_plan_qber(&plan, &t, &LaunchPowers::experiment(), &m).unwrap()[0].1;
        assert!(b.qber_mcf() < 1e-3, "{b:?}");

        let swapped = plan.swap_upstream_and_qs();
        assert!(validate_plan(&swapped, &t).iter().any(|s| s.starts_with("rule (c)")));
        let s = predict_plan_qber(&swapped, &t, &LaunchPowers::experiment(), &m).unwrap()[0].1;
        assert!(s.qber_ssmf_us > b.qber_ssmf_us);

        let off = predict_plan_qber(&plan, &t, &LaunchPowers::default(), &m).unwrap()[0].1;
        assert_eq!(off.qber_total, off.qber_in);
    }

    #[test]
    fn onus_share_quantum_channels_round_robin() {
        let mut t = Topology::experiment();
        t.num_wavelengths = 2;
        for id in 2..=5 {
            t.onus.push(Onu {
                id,
                endpoint: QuantumEndpoint { qs_frequency_thz: 193.5, ss_frequency_thz: 193.3 },
                ..t.onus[0].clone()
            });
        }
        let mut d = Demands::experiment();
        d.qs_channels = 2;
        d.cs_pairs_per_core = 2;
        d.grid.sync = Band::new(193.2, 193.4);
        let plan = assign(&t, &d).unwrap();
        assert!(validate_plan(&plan, &t).is_empty(), "{:?}", validate_plan(&plan, &t));
        let distinct: BTreeSet<u64> = plan.onus.iter().map(|a| (a.qs_thz * 1e3) as u64).collect();
        assert_eq!(distinct.len(), 2);
    }
}
