//! Network data model: OLT, MCF feeder, ODN splitters, drop fibers and ONUs.
//!
//! The quantum signal of every ONU runs upstream:
//!
//! ```text
//! ONU WDM -> drop SSMF -> ODN WDM -> splitter -> fan-in -> MCF core
//!         -> fan-out -> feeder attenuator -> OLT WDM/filters -> detector
//! ```
//!
//! [`quantum_path`] flattens that chain into an [`OpticalPath`] and attaches
//! every classical channel that can scatter into it.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{
    ClassicalChannel, Direction, FiberKind, FiberSegment, LumpedLoss, NoiseSource, OpticalPath, PathElement,
    SpectralFilter,
};

pub type OnuId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// At the subscriber, before the drop fiber.
    Onu,
    /// In the distribution node, between drop fiber and splitter.
    Odn,
    /// In the central office, in front of the detector.
    Olt,
}

/// A WDM module or filter traversed by the quantum signal. Without an
/// explicit center frequency it is tuned to the ONU's quantum channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WdmModule {
    pub label: String,
    pub placement: Placement,
    #[serde(default)]
    pub center_frequency_thz: Option<f64>,
    pub passband_ghz: f64,
    #[serde(default = "default_wdm_loss")]
    pub insertion_loss_db: f64,
}

pub const DEFAULT_WDM_LOSS_DB: f64 = 0.8;

fn default_wdm_loss() -> f64 {
    DEFAULT_WDM_LOSS_DB
}

impl WdmModule {
    pub fn filter_for(&self, qs_frequency_thz: f64) -> Result<SpectralFilter> {
        SpectralFilter::new(
            self.center_frequency_thz.unwrap_or(qs_frequency_thz),
            self.passband_ghz,
            self.insertion_loss_db,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splitter {
    pub ratio: u32,
    pub loss_db: f64,
    pub onus: Vec<OnuId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumEndpoint {
    pub qs_frequency_thz: f64,
    pub ss_frequency_thz: f64,
}

/// A classical carrier sharing the ONU's drop fiber; power is taken at the
/// point where it enters the drop fiber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropChannel {
    pub frequency_thz: f64,
    pub launch_power_dbm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Onu {
    pub id: OnuId,
    pub endpoint: QuantumEndpoint,
    pub drop: FiberSegment,
    #[serde(default)]
    pub upstream: Option<DropChannel>,
    #[serde(default)]
    pub downstream: Option<DropChannel>,
}

/// A classical carrier in one MCF core; power is taken at the MCF input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederChannel {
    pub core: usize,
    pub frequency_thz: f64,
    pub launch_power_dbm: f64,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub num_cores: usize,
    pub num_wavelengths: usize,
    pub feeder: FiberSegment,
    /// Lumped attenuation emulating feeder length beyond the physical span.
    #[serde(default)]
    pub feeder_extra_loss_db: f64,
    /// Combined fan-in plus fan-out loss, split evenly between the two.
    pub fanin_fanout_loss_db: f64,
    pub quantum_core: usize,
    /// Per-core neighbour lists; defaults to [`default_adjacency`].
    #[serde(default)]
    pub adjacency: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub wdm_modules: Vec<WdmModule>,
    #[serde(default)]
    pub splitters: Vec<Splitter>,
    pub onus: Vec<Onu>,
    #[serde(default)]
    pub feeder_channels: Vec<FeederChannel>,
}

/// Nearest-neighbour map. Seven cores use the hexagonal layout (index 0 in
/// the center, 1..=6 around it in order); other counts a linear array.
pub fn default_adjacency(num_cores: usize) -> Vec<Vec<usize>> {
    if num_cores == 7 {
        let mut adj = vec![(1..7).collect::<Vec<_>>()];
        for i in 1..7 {
            let prev = if i == 1 { 6 } else { i - 1 };
            let next = if i == 6 { 1 } else { i + 1 };
            let mut n = vec![0, prev, next];
            n.sort_unstable();
            adj.push(n);
        }
        adj
    } else {
        (0..num_cores)
            .map(|i| {
                let mut n = Vec::new();
                if i > 0 {
                    n.push(i - 1);
                }
                if i + 1 < num_cores {
                    n.push(i + 1);
                }
                n
            })
            .collect()
    }
}

impl Topology {
    pub const EXPERIMENT_QS_THZ: f64 = 193.5;
    pub const EXPERIMENT_SS_THZ: f64 = 193.3;
    pub const EXPERIMENT_US_THZ: f64 = 191.6;
    pub const EXPERIMENT_DS_THZ: f64 = 195.6;

    /// The laboratory setup: 7-core MCF (1 km plus a 4.6 dB attenuator
    /// standing in for 20 km), quantum core at index 2 with 20 dBm classical
    /// carriers in both directions on neighbouring cores 0, 1 and 3, a single
    /// ONU on a 1 km drop with 0 dBm upstream and -10 dBm downstream.
    pub fn experiment() -> Self {
        let mut feeder_channels = Vec::new();
        for core in [0, 1, 3] {
            feeder_channels.push(FeederChannel {
                core,
                frequency_thz: Self::EXPERIMENT_DS_THZ,
                launch_power_dbm: 20.0,
                direction: Direction::Downstream,
            });
            feeder_channels.push(FeederChannel {
                core,
                frequency_thz: Self::EXPERIMENT_US_THZ,
                launch_power_dbm: 20.0,
                direction: Direction::Upstream,
            });
        }
        Self {
            num_cores: 7,
            num_wavelengths: 1,
            feeder: FiberSegment { length_km: 1.0, attenuation_db_per_km: 0.23, kind: FiberKind::McfCore },
            feeder_extra_loss_db: 4.6,
            fanin_fanout_loss_db: 3.6,
            quantum_core: 2,
            adjacency: None,
            wdm_modules: vec![
                WdmModule {
                    label: "ONU CWDM".into(),
                    placement: Placement::Onu,
                    center_frequency_thz: None,
                    passband_ghz: 2500.0,
                    insertion_loss_db: DEFAULT_WDM_LOSS_DB,
                },
                WdmModule {
                    label: "ODN CWDM".into(),
                    placement: Placement::Odn,
                    center_frequency_thz: None,
                    passband_ghz: 2500.0,
                    insertion_loss_db: DEFAULT_WDM_LOSS_DB,
                },
                WdmModule {
                    label: "DWDM-1".into(),
                    placement: Placement::Olt,
                    center_frequency_thz: None,
                    passband_ghz: 150.0,
                    insertion_loss_db: DEFAULT_WDM_LOSS_DB,
                },
            ],
            splitters: vec![],
            onus: vec![Onu {
                id: 1,
                endpoint: QuantumEndpoint {
                    qs_frequency_thz: Self::EXPERIMENT_QS_THZ,
                    ss_frequency_thz: Self::EXPERIMENT_SS_THZ,
                },
                drop: FiberSegment { length_km: 1.0, attenuation_db_per_km: 0.2, kind: FiberKind::Ssmf },
                upstream: Some(DropChannel { frequency_thz: Self::EXPERIMENT_US_THZ, launch_power_dbm: 0.0 }),
                downstream: Some(DropChannel { frequency_thz: Self::EXPERIMENT_DS_THZ, launch_power_dbm: -10.0 }),
            }],
            feeder_channels,
        }
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.adjacency.clone().unwrap_or_else(|| default_adjacency(self.num_cores))
    }

    pub fn neighbours(&self, core: usize) -> Vec<usize> {
        self.adjacency().get(core).cloned().unwrap_or_default()
    }

    pub fn onu(&self, id: OnuId) -> Result<&Onu> {
        self.onus.iter().find(|o| o.id == id).ok_or(Error::UnknownOnu(id))
    }

    pub fn onu_mut(&mut self, id: OnuId) -> Result<&mut Onu> {
        self.onus.iter_mut().find(|o| o.id == id).ok_or(Error::UnknownOnu(id))
    }

    pub fn splitter_of(&self, id: OnuId) -> Option<&Splitter> {
        self.splitters.iter().find(|s| s.onus.contains(&id))
    }

    /// Puts `id` alone behind a splitter of the given ratio, replacing any
    /// previous attachment.
    pub fn with_onu_splitter(&self, id: OnuId, ratio: u32, loss_db: f64) -> Self {
        let mut t = self.clone();
        for s in &mut t.splitters {
            s.onus.retain(|o| *o != id);
        }
        t.splitters.retain(|s| !s.onus.is_empty());
        if ratio > 1 || loss_db > 0.0 {
            t.splitters.push(Splitter { ratio, loss_db, onus: vec![id] });
        }
        t
    }
}

/// Number of ONUs a topology can serve: one core is reserved for quantum
/// signals and each remaining core carries `T` wavelength pairs.
pub fn subscriber_capacity(t: &Topology) -> usize {
    t.num_cores.saturating_sub(1) * t.num_wavelengths
}

/// Builds the quantum path of ONU `onu_id`.
pub fn quantum_path(t: &Topology, onu_id: OnuId) -> Result<OpticalPath> {
    let onu = t.onu(onu_id)?;
    let qs = onu.endpoint.qs_frequency_thz;
    let mut elements = Vec::new();
    let mut sources = Vec::new();

    let modules_at = |p: Placement| t.wdm_modules.iter().filter(move |m| m.placement == p);

    for m in modules_at(Placement::Onu) {
        elements.push(PathElement::Filter(m.filter_for(qs)?));
    }
    if onu.drop.length_km > 0.0 {
        let idx = elements.len();
        elements.push(PathElement::Fiber(onu.drop.clone()));
        if let Some(us) = &onu.upstream {
            sources.push(NoiseSource {
                channel: ClassicalChannel::new(
                    us.frequency_thz,
                    us.launch_power_dbm,
                    Direction::Upstream,
                    crate::physics::Location::DropFiber,
                )?,
                element: idx,
            });
        }
        if let Some(ds) = &onu.downstream {
            sources.push(NoiseSource {
                channel: ClassicalChannel::new(
                    ds.frequency_thz,
                    ds.launch_power_dbm,
                    Direction::Downstream,
                    crate::physics::Location::DropFiber,
                )?,
                element: idx,
            });
        }
    }
    for m in modules_at(Placement::Odn) {
        elements.push(PathElement::Filter(m.filter_for(qs)?));
    }
    if let Some(s) = t.splitter_of(onu_id) {
        elements.push(PathElement::Lumped(LumpedLoss::new(format!("1*{} splitter", s.ratio), s.loss_db)?));
    }
    let half_fan = t.fanin_fanout_loss_db / 2.0;
    if half_fan > 0.0 {
        elements.push(PathElement::Lumped(LumpedLoss::new("fan-in", half_fan)?));
    }
    let feeder_idx = elements.len();
    elements.push(PathElement::Fiber(t.feeder.clone()));
    if t.feeder.length_km > 0.0 {
        let neighbours = t.neighbours(t.quantum_core);
        for ch in &t.feeder_channels {
            let location = if ch.core == t.quantum_core {
                crate::physics::Location::SameCore
            } else if neighbours.contains(&ch.core) {
                crate::physics::Location::AdjacentCore
            } else {
                continue;
            };
            sources.push(NoiseSource {
                channel: ClassicalChannel::new(ch.frequency_thz, ch.launch_power_dbm, ch.direction, location)?,
                element: feeder_idx,
            });
        }
    }
    if half_fan > 0.0 {
        elements.push(PathElement::Lumped(LumpedLoss::new("fan-out", half_fan)?));
    }
    if t.feeder_extra_loss_db > 0.0 {
        elements.push(PathElement::Lumped(LumpedLoss::new("feeder attenuator", t.feeder_extra_loss_db)?));
    }
    for m in modules_at(Placement::Olt) {
        elements.push(PathElement::Filter(m.filter_for(qs)?));
    }
    OpticalPath::new(qs, elements, sources)
}

/// Lists every broken invariant; empty when the topology is well formed.
pub fn validate(t: &Topology) -> Vec<String> {
    let mut v = Vec::new();
    if t.num_cores < 2 {
        v.push(format!("topology: num_cores must be >= 2, got {}", t.num_cores));
    }
    if t.num_wavelengths < 1 {
        v.push("topology: num_wavelengths must be >= 1".to_string());
    }
    if t.quantum_core >= t.num_cores {
        v.push(format!("topology: quantum core {} outside 0..{}", t.quantum_core, t.num_cores));
    }
    if let Err(e) = t.feeder.check() {
        v.push(format!("feeder: {e}"));
    }
    if t.feeder.kind != FiberKind::McfCore {
        v.push("feeder: must be an MCF core span".to_string());
    }
    for (name, x) in
        [("feeder_extra_loss_db", t.feeder_extra_loss_db), ("fanin_fanout_loss_db", t.fanin_fanout_loss_db)]
    {
        if !(x >= 0.0) {
            v.push(format!("topology: {name} must be >= 0, got {x}"));
        }
    }
    if let Some(adj) = &t.adjacency {
        if adj.len() != t.num_cores {
            v.push(format!("adjacency: {} rows for {} cores", adj.len(), t.num_cores));
        }
        for (i, row) in adj.iter().enumerate() {
            for &j in row {
                if j >= t.num_cores || j == i {
                    v.push(format!("adjacency: core {i} lists invalid neighbour {j}"));
                } else if !adj.get(j).is_some_and(|r| r.contains(&i)) {
                    v.push(format!("adjacency: core {i} -> {j} is not symmetric"));
                }
            }
        }
    }
    for m in &t.wdm_modules {
        let center = m.center_frequency_thz.unwrap_or(1.0);
        if let Err(e) = SpectralFilter::new(center, m.passband_ghz, m.insertion_loss_db) {
            v.push(format!("wdm module `{}`: {e}", m.label));
        }
    }

    let mut ids = HashSet::new();
    for onu in &t.onus {
        if !ids.insert(onu.id) {
            v.push(format!("onu {}: duplicate id", onu.id));
        }
        if let Err(e) = onu.drop.check() {
            v.push(format!("onu {}: drop fiber: {e}", onu.id));
        }
        if onu.drop.kind != FiberKind::Ssmf {
            v.push(format!("onu {}: drop fiber must be SSMF", onu.id));
        }
        let ep = &onu.endpoint;
        if !(ep.qs_frequency_thz > 0.0) || !(ep.ss_frequency_thz > 0.0) {
            v.push(format!("onu {}: endpoint frequencies must be > 0", onu.id));
        }
        if ep.qs_frequency_thz == ep.ss_frequency_thz {
            v.push(format!("onu {}: quantum and synchronization frequencies coincide", onu.id));
        }
        for (dir, ch) in [("upstream", &onu.upstream), ("downstream", &onu.downstream)] {
            if let Some(ch) = ch {
                if !(ch.frequency_thz > 0.0) {
                    v.push(format!("onu {}: {dir} frequency must be > 0", onu.id));
                }
            }
        }
        let collects = t.wdm_modules.iter().any(|m| {
            m.placement != Placement::Onu
                && m.filter_for(ep.qs_frequency_thz).is_ok_and(|f| f.passes(ep.qs_frequency_thz))
        });
        if !collects {
            v.push(format!("onu {}: no ODN/OLT filter passes its quantum channel", onu.id));
        }
    }

    let mut attached: BTreeMap<OnuId, usize> = BTreeMap::new();
    for (k, s) in t.splitters.iter().enumerate() {
        if s.ratio < 1 {
            v.push(format!("splitter {k}: ratio must be >= 1"));
        }
        if !(s.loss_db >= 0.0) {
            v.push(format!("splitter {k}: loss must be >= 0, got {}", s.loss_db));
        }
        if s.onus.len() > s.ratio as usize {
            v.push(format!("splitter {k}: {} ONUs on a 1*{} splitter", s.onus.len(), s.ratio));
        }
        for id in &s.onus {
            if !ids.contains(id) {
                v.push(format!("splitter {k}: unknown ONU {id}"));
            }
            *attached.entry(*id).or_default() += 1;
        }
    }
    for (id, n) in attached {
        if n > 1 {
            v.push(format!("onu {id}: attached to {n} splitters"));
        }
    }

    for (k, ch) in t.feeder_channels.iter().enumerate() {
        if ch.core >= t.num_cores {
            v.push(format!("feeder channel {k}: core {} outside 0..{}", ch.core, t.num_cores));
        }
        if !(ch.frequency_thz > 0.0) {
            v.push(format!("feeder channel {k}: frequency must be > 0"));
        }
    }
    v
}
