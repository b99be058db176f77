//! Optical link budget and noise-power engine.
//!
//! A quantum channel is described as an [`OpticalPath`]: an ordered chain of
//! fiber spans, lumped losses and spectral filters running from the QKD
//! transmitter to the single-photon detector, plus the classical channels that
//! share a fiber span with it. Two noise mechanisms are modelled:
//!
//! * spontaneous Raman scattering (SRS) from a classical pump into the quantum
//!   band, either in the same fiber or in an adjacent MCF core (then leaking
//!   through inter-core coupling), and
//! * inter-core crosstalk (IC-XT) of the classical light itself, which sits
//!   out of band when the wavebands are disjoint and is then suppressed by the
//!   filters in front of the detector.
//!
//! Everything is evaluated in linear units; see [`crate::units`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::units::{db_per_km_to_linear, db_to_ratio, db_to_transmittance, dbm_to_watts, photon_energy};

/// Out-of-band rejection applied by a filter when the noise lies outside its
/// passband.
pub const DEFAULT_REJECTION_FLOOR_DB: f64 = 80.0;

/// Inter-core coupling of the weakly coupled MCF, in dB per km.
pub const DEFAULT_ICXT_DB_PER_KM: f64 = -60.0;

/// Passband edge tolerance in THz (edges are inclusive).
const EDGE_EPS_THZ: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    McfCore,
    Ssmf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSegment {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub kind: FiberKind,
}

impl FiberSegment {
    pub fn new(length_km: f64, attenuation_db_per_km: f64, kind: FiberKind) -> Result<Self> {
        let seg = Self { length_km, attenuation_db_per_km, kind };
        seg.check()?;
        Ok(seg)
    }

    pub fn ssmf(length_km: f64, attenuation_db_per_km: f64) -> Result<Self> {
        Self::new(length_km, attenuation_db_per_km, FiberKind::Ssmf)
    }

    pub fn mcf(length_km: f64, attenuation_db_per_km: f64) -> Result<Self> {
        Self::new(length_km, attenuation_db_per_km, FiberKind::McfCore)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.length_km >= 0.0) || !self.length_km.is_finite() {
            return Err(invalid("length_km", format!("must be >= 0, got {}", self.length_km)));
        }
        if !(self.attenuation_db_per_km >= 0.0) || !self.attenuation_db_per_km.is_finite() {
            return Err(invalid("attenuation_db_per_km", format!("must be >= 0, got {}", self.attenuation_db_per_km)));
        }
        Ok(())
    }

    pub fn loss_db(&self) -> f64 {
        self.length_km * self.attenuation_db_per_km
    }

    /// Linear attenuation coefficient in 1/km.
    pub fn alpha(&self) -> f64 {
        db_per_km_to_linear(self.attenuation_db_per_km)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LumpedLoss {
    pub label: String,
    pub loss_db: f64,
}

impl LumpedLoss {
    pub fn new(label: impl Into<String>, loss_db: f64) -> Result<Self> {
        if !(loss_db >= 0.0) || !loss_db.is_finite() {
            return Err(invalid("loss_db", format!("must be >= 0, got {loss_db}")));
        }
        Ok(Self { label: label.into(), loss_db })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// OLT towards ONU.
    Downstream,
    /// ONU towards OLT; the quantum signal travels this way.
    Upstream,
}

/// Where a classical channel sits relative to the quantum signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    SameCore,
    AdjacentCore,
    DropFiber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalChannel {
    pub frequency_thz: f64,
    /// Power at the input of the fiber span the channel travels in.
    pub launch_power_dbm: f64,
    pub direction: Direction,
    pub location: Location,
}

impl ClassicalChannel {
    pub fn new(frequency_thz: f64, launch_power_dbm: f64, direction: Direction, location: Location) -> Result<Self> {
        if !(frequency_thz > 0.0) || !frequency_thz.is_finite() {
            return Err(invalid("frequency_thz", format!("must be > 0, got {frequency_thz}")));
        }
        if launch_power_dbm.is_nan() {
            return Err(invalid("launch_power_dbm", "NaN"));
        }
        Ok(Self { frequency_thz, launch_power_dbm, direction, location })
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.launch_power_dbm)
    }

    /// Propagation relative to the quantum signal, which always travels
    /// upstream.
    pub fn relative_direction(&self) -> RelativeDirection {
        match self.direction {
            Direction::Upstream => RelativeDirection::Forward,
            Direction::Downstream => RelativeDirection::Backward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeDirection {
    /// Pump co-propagates with the quantum signal.
    Forward,
    /// Pump counter-propagates; scattered light travels back towards the
    /// pump's origin.
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFilter {
    pub center_frequency_thz: f64,
    pub passband_ghz: f64,
    pub insertion_loss_db: f64,
}

impl SpectralFilter {
    pub fn new(center_frequency_thz: f64, passband_ghz: f64, insertion_loss_db: f64) -> Result<Self> {
        if !(center_frequency_thz > 0.0) {
            return Err(invalid("center_frequency_thz", format!("must be > 0, got {center_frequency_thz}")));
        }
        if !(passband_ghz > 0.0) || !passband_ghz.is_finite() {
            return Err(invalid("passband_ghz", format!("must be > 0, got {passband_ghz}")));
        }
        if !(insertion_loss_db >= 0.0) || !insertion_loss_db.is_finite() {
            return Err(invalid("insertion_loss_db", format!("must be >= 0, got {insertion_loss_db}")));
        }
        Ok(Self { center_frequency_thz, passband_ghz, insertion_loss_db })
    }

    /// Inclusive passband test.
    pub fn passes(&self, frequency_thz: f64) -> bool {
        (frequency_thz - self.center_frequency_thz).abs() <= self.passband_ghz / 2000.0 + EDGE_EPS_THZ
    }
}

/// Suppression (dB) applied by `filter` to noise at `noise_frequency_thz`.
///
/// The filter is an ideal rectangle: nothing inside the passband, the flat
/// `floor_db` outside it. In-band insertion loss is accounted for separately
/// as part of the path loss.
pub fn filter_rejection(noise_frequency_thz: f64, filter: &SpectralFilter, floor_db: f64) -> f64 {
    if filter.passes(noise_frequency_thz) {
        0.0
    } else {
        floor_db
    }
}

/// Normalised Stokes-side Raman response of silica: |offset| in THz against
/// relative cross-section (peak 1.0 near 13 THz).
const SILICA_RAMAN_SHAPE: [(f64, f64); 16] = [
    (0.0, 0.0),
    (1.0, 0.12),
    (2.0, 0.22),
    (3.0, 0.30),
    (4.0, 0.38),
    (5.0, 0.45),
    (6.0, 0.50),
    (7.0, 0.55),
    (8.0, 0.62),
    (9.0, 0.68),
    (10.0, 0.78),
    (11.0, 0.87),
    (12.0, 0.95),
    (13.2, 1.00),
    (14.0, 0.85),
    (15.0, 0.50),
];

/// Raman scattering cross-section versus pump-to-probe offset.
///
/// `rho0` is the peak Stokes cross-section in 1/(km·GHz). The Stokes side
/// (probe below pump) follows a piecewise-linear table; the anti-Stokes side
/// mirrors it scaled by `anti_stokes_ratio` < 1. Offsets beyond the table
/// scatter nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamanProfile {
    pub rho0: f64,
    pub anti_stokes_ratio: f64,
    shape: Vec<(f64, f64)>,
}

impl RamanProfile {
    pub const DEFAULT_ANTI_STOKES_RATIO: f64 = 0.4;

    pub fn new(rho0: f64, anti_stokes_ratio: f64) -> Result<Self> {
        Self::with_shape(rho0, anti_stokes_ratio, SILICA_RAMAN_SHAPE.to_vec())
    }

    pub fn with_shape(rho0: f64, anti_stokes_ratio: f64, shape: Vec<(f64, f64)>) -> Result<Self> {
        if !(rho0 >= 0.0) || !rho0.is_finite() {
            return Err(invalid("rho0", format!("must be >= 0, got {rho0}")));
        }
        if !(0.0..1.0).contains(&anti_stokes_ratio) {
            return Err(invalid("anti_stokes_ratio", format!("must lie in [0, 1), got {anti_stokes_ratio}")));
        }
        if shape.len() < 2 || shape[0].0 != 0.0 {
            return Err(invalid("raman shape", "needs >= 2 points starting at 0 THz"));
        }
        if shape.windows(2).any(|w| w[1].0 <= w[0].0) || shape.iter().any(|p| !(p.1 >= 0.0)) {
            return Err(invalid("raman shape", "offsets must increase and values be >= 0"));
        }
        Ok(Self { rho0, anti_stokes_ratio, shape })
    }

    pub fn with_rho0(&self, rho0: f64) -> Self {
        Self { rho0, ..self.clone() }
    }

    pub fn max_offset_thz(&self) -> f64 {
        self.shape.last().map(|p| p.0).unwrap_or(0.0)
    }

    fn stokes_shape(&self, offset_thz: f64) -> f64 {
        let x = offset_thz.abs();
        if x > self.max_offset_thz() {
            return 0.0;
        }
        let i = self.shape.partition_point(|p| p.0 <= x);
        if i >= self.shape.len() {
            return self.shape[self.shape.len() - 1].1;
        }
        let (x0, y0) = self.shape[i - 1];
        let (x1, y1) = self.shape[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Cross-section in 1/(km·GHz) for `offset_thz = probe - pump`; positive
    /// offsets are on the anti-Stokes side.
    pub fn cross_section(&self, offset_thz: f64) -> f64 {
        let s = self.rho0 * self.stokes_shape(offset_thz);
        if offset_thz > 0.0 {
            s * self.anti_stokes_ratio
        } else {
            s
        }
    }
}

/// Scattered power (W) collected at `probe_frequency_thz` within
/// `collection_bandwidth_ghz`, at the fiber end the quantum signal exits.
///
/// Forward: `P·ρ·B·L·e^(−αL)`. Backward: `P·ρ·B·(1 − e^(−2αL))/(2α)`.
pub fn srs_power(
    pump: &ClassicalChannel,
    fiber: &FiberSegment,
    profile: &RamanProfile,
    probe_frequency_thz: f64,
    collection_bandwidth_ghz: f64,
    relative_direction: RelativeDirection,
) -> Result<f64> {
    if !(collection_bandwidth_ghz >= 0.0) {
        return Err(invalid(
            "collection_bandwidth_ghz",
            format!("must be non-negative, got {collection_bandwidth_ghz}"),
        ));
    }
    fiber.check()?;
    let rho = profile.cross_section(probe_frequency_thz - pump.frequency_thz);
    let p_in = pump.power_watts();
    let len = fiber.length_km;
    let alpha = fiber.alpha();
    let effective_len = match relative_direction {
        RelativeDirection::Forward => len * (-alpha * len).exp(),
        RelativeDirection::Backward => {
            if alpha == 0.0 {
                len
            } else {
                -(-2.0 * alpha * len).exp_m1() / (2.0 * alpha)
            }
        }
    };
    Ok(p_in * rho * collection_bandwidth_ghz * effective_len)
}

/// Crosstalk power (W) coupled from an adjacent-core aggressor into the
/// quantum core over `fiber`, assuming linear accumulation per km.
pub fn icxt_power(aggressor: &ClassicalChannel, coupling_db_per_km: f64, fiber: &FiberSegment) -> Result<f64> {
    if !(coupling_db_per_km <= 0.0) {
        return Err(invalid(
            "coupling_db_per_km",
            format!("crosstalk coupling must be negative dB/km, got {coupling_db_per_km}"),
        ));
    }
    fiber.check()?;
    if aggressor.location != Location::AdjacentCore {
        return Ok(0.0);
    }
    let kappa = db_to_ratio(coupling_db_per_km);
    let len = fiber.length_km;
    Ok(aggressor.power_watts() * kappa * len * (-fiber.alpha() * len).exp())
}

/// Noise clicks per gate produced by `noise_power_at_detector` watts of light
/// at the probe frequency.
pub fn noise_counts_per_gate(
    noise_power_at_detector: f64,
    probe_frequency_thz: f64,
    gate_width_ns: f64,
    detection_efficiency: f64,
) -> f64 {
    let photons_per_second = noise_power_at_detector / photon_energy(probe_frequency_thz);
    (photons_per_second * gate_width_ns * 1e-9 * detection_efficiency).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PathElement {
    Fiber(FiberSegment),
    Lumped(LumpedLoss),
    Filter(SpectralFilter),
}

impl PathElement {
    pub fn loss_db(&self) -> f64 {
        match self {
            PathElement::Fiber(f) => f.loss_db(),
            PathElement::Lumped(l) => l.loss_db,
            PathElement::Filter(f) => f.insertion_loss_db,
        }
    }
}

/// A classical channel interacting with the quantum signal inside the fiber
/// element at `element`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub channel: ClassicalChannel,
    pub element: usize,
}

/// Ordered loss and noise model from one QKD transmitter to its detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalPath {
    signal_frequency_thz: f64,
    elements: Vec<PathElement>,
    noise_sources: Vec<NoiseSource>,
}

impl OpticalPath {
    pub fn new(signal_frequency_thz: f64, elements: Vec<PathElement>, noise_sources: Vec<NoiseSource>) -> Result<Self> {
        if !(signal_frequency_thz > 0.0) {
            return Err(Error::InvalidPath(format!("signal frequency {signal_frequency_thz} THz")));
        }
        if elements.is_empty() {
            return Err(Error::InvalidPath("path has no elements".into()));
        }
        for el in &elements {
            match el {
                PathElement::Fiber(f) => f.check()?,
                PathElement::Lumped(l) => {
                    LumpedLoss::new(l.label.clone(), l.loss_db)?;
                }
                PathElement::Filter(f) => {
                    SpectralFilter::new(f.center_frequency_thz, f.passband_ghz, f.insertion_loss_db)?;
                }
            }
        }
        for (i, src) in noise_sources.iter().enumerate() {
            match elements.get(src.element) {
                Some(PathElement::Fiber(_)) => {}
                Some(_) => {
                    return Err(Error::InvalidPath(format!(
                        "noise source {i} references element {} which is not a fiber span",
                        src.element
                    )))
                }
                None => {
                    return Err(Error::InvalidPath(format!(
                        "noise source {i} references element {} of {}",
                        src.element,
                        elements.len()
                    )))
                }
            }
        }
        Ok(Self { signal_frequency_thz, elements, noise_sources })
    }

    pub fn signal_frequency_thz(&self) -> f64 {
        self.signal_frequency_thz
    }

    pub fn elements(&self) -> &[PathElement] {
        &self.elements
    }

    pub fn noise_sources(&self) -> &[NoiseSource] {
        &self.noise_sources
    }

    pub fn fiber(&self, element: usize) -> Option<&FiberSegment> {
        match self.elements.get(element) {
            Some(PathElement::Fiber(f)) => Some(f),
            _ => None,
        }
    }

    /// Loss of every element strictly after `element`.
    pub fn loss_after_db(&self, element: usize) -> f64 {
        self.elements.iter().skip(element + 1).map(PathElement::loss_db).sum()
    }

    pub fn filters_after(&self, element: usize) -> impl Iterator<Item = &SpectralFilter> {
        self.elements.iter().skip(element + 1).filter_map(|e| match e {
            PathElement::Filter(f) => Some(f),
            _ => None,
        })
    }

    /// Appends a lumped loss right before the first element at or after
    /// `position`; used to inject splitters.
    pub fn insert_lumped(&mut self, position: usize, loss: LumpedLoss) {
        let pos = position.min(self.elements.len());
        self.elements.insert(pos, PathElement::Lumped(loss));
        for src in &mut self.noise_sources {
            if src.element >= pos {
                src.element += 1;
            }
        }
    }
}

/// Σ fiber loss + Σ lumped losses (filter insertion losses included).
pub fn path_loss_db(path: &OpticalPath) -> f64 {
    path.elements.iter().map(PathElement::loss_db).sum()
}

/// Physical constants of the noise model that are not tied to one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    pub raman: RamanProfile,
    pub rejection_floor_db: f64,
    pub icxt_coupling_db_per_km: f64,
}

impl PhysicsParams {
    pub fn new(rho0: f64) -> Result<Self> {
        Ok(Self {
            raman: RamanProfile::new(rho0, RamanProfile::DEFAULT_ANTI_STOKES_RATIO)?,
            rejection_floor_db: DEFAULT_REJECTION_FLOOR_DB,
            icxt_coupling_db_per_km: DEFAULT_ICXT_DB_PER_KM,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Raman scattering generated in the span carrying the quantum signal.
    Srs,
    /// Raman scattering generated in an adjacent core and coupled over.
    CoupledSrs,
    /// Crosstalk of the classical carrier itself.
    Icxt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseContribution {
    /// Index into [`OpticalPath::noise_sources`].
    pub source: usize,
    pub mechanism: Mechanism,
    pub watts_at_detector: f64,
}

/// Noise power reaching the detector from every source on `path`.
///
/// Collection bandwidth is the narrowest in-band filter between the source
/// and the detector. Counter-propagating crosstalk heads away from the
/// detector and contributes nothing.
pub fn detector_noise(path: &OpticalPath, params: &PhysicsParams) -> Result<Vec<NoiseContribution>> {
    let signal = path.signal_frequency_thz;
    let mut out = Vec::with_capacity(path.noise_sources.len() * 2);
    for (idx, src) in path.noise_sources.iter().enumerate() {
        let fiber = path
            .fiber(src.element)
            .ok_or_else(|| Error::InvalidPath(format!("noise source {idx} is not on a fiber span")))?;
        let bandwidth = path
            .filters_after(src.element)
            .filter(|f| f.passes(signal))
            .map(|f| f.passband_ghz)
            .fold(f64::INFINITY, f64::min);
        if !bandwidth.is_finite() {
            return Err(Error::NoCollectionFilter { frequency_thz: signal });
        }
        let downstream_t = db_to_transmittance(path.loss_after_db(src.element));
        let ch = &src.channel;
        let srs = srs_power(ch, fiber, &params.raman, signal, bandwidth, ch.relative_direction())?;
        match ch.location {
            Location::SameCore | Location::DropFiber => out.push(NoiseContribution {
                source: idx,
                mechanism: Mechanism::Srs,
                watts_at_detector: srs * downstream_t,
            }),
            Location::AdjacentCore => {
                let kappa_l = db_to_ratio(params.icxt_coupling_db_per_km) * fiber.length_km;
                out.push(NoiseContribution {
                    source: idx,
                    mechanism: Mechanism::CoupledSrs,
                    watts_at_detector: srs * kappa_l * downstream_t,
                });
                let xt = match ch.relative_direction() {
                    RelativeDirection::Forward => icxt_power(ch, params.icxt_coupling_db_per_km, fiber)?,
                    RelativeDirection::Backward => 0.0,
                };
                let rejection_db: f64 = path
                    .filters_after(src.element)
                    .map(|f| filter_rejection(ch.frequency_thz, f, params.rejection_floor_db))
                    .sum();
                out.push(NoiseContribution {
                    source: idx,
                    mechanism: Mechanism::Icxt,
                    watts_at_detector: xt * downstream_t * db_to_transmittance(rejection_db),
                });
            }
        }
    }
    Ok(out)
}
