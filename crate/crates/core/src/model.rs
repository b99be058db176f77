//! End-to-end evaluation of one quantum link: path loss and noise from
//! [`crate::physics`], gains, bounds and key rate from [`crate::qkd`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{
    detector_noise, noise_counts_per_gate, path_loss_db, Direction, Location, OpticalPath, PhysicsParams,
};
use crate::qkd::{
    dead_time_duty, decoy_bounds, gain_and_qber, qber_budget, secure_key_rate, ChannelBudget, DecoyEstimate,
    DetectorParams, MeasuredGains, NoiseCounts, ProtocolParams, QberBudget,
};
use crate::topology::{quantum_path, OnuId, Topology};
use crate::units::db_to_transmittance;

/// Source, detector and noise constants shared by every link in a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub protocol: ProtocolParams,
    pub detector: DetectorParams,
    pub physics: PhysicsParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkReport {
    pub loss_db: f64,
    /// Channel plus detector efficiency.
    pub transmittance: f64,
    pub noise: NoiseCounts,
    /// Dark counts plus all noise, per gate.
    pub background: f64,
    pub gains: MeasuredGains,
    pub estimate: Option<DecoyEstimate>,
    pub qber: QberBudget,
    /// Fraction of gates not blanked by detector dead time.
    pub duty: f64,
    pub skr_bps: f64,
}

impl SystemModel {
    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.detector.validate()
    }

    /// Per-gate noise clicks from every source on `path`, grouped by origin.
    pub fn noise_counts(&self, path: &OpticalPath) -> Result<NoiseCounts> {
        let mut counts = NoiseCounts::default();
        for c in detector_noise(path, &self.physics)? {
            let n = noise_counts_per_gate(
                c.watts_at_detector,
                path.signal_frequency_thz(),
                self.detector.gate_width_ns,
                self.detector.efficiency,
            );
            let ch = &path.noise_sources()[c.source].channel;
            let slot = match (ch.location, ch.direction) {
                (Location::DropFiber, Direction::Downstream) => &mut counts.ssmf_ds,
                (Location::DropFiber, Direction::Upstream) => &mut counts.ssmf_us,
                (_, Direction::Downstream) => &mut counts.mcf_ds,
                (_, Direction::Upstream) => &mut counts.mcf_us,
            };
            *slot += n;
        }
        Ok(counts)
    }

    /// Evaluates `path` with the transmitter pulsing at `clock_rate_hz`; the
    /// detector keeps gating at the protocol clock.
    pub fn evaluate_path(&self, path: &OpticalPath, clock_rate_hz: f64) -> Result<LinkReport> {
        self.validate()?;
        let loss_db = path_loss_db(path);
        let transmittance = db_to_transmittance(loss_db) * self.detector.efficiency;
        let noise = self.noise_counts(path)?;
        let dark = self.detector.dark_count_per_gate;
        let background = (dark + noise.total()).min(1.0);
        let e_det = self.detector.misalignment;

        let budget = ChannelBudget::new(transmittance, background)?;
        let gains = MeasuredGains::analytic(&self.protocol, &budget, e_det);

        let quiet = ChannelBudget::new(transmittance, dark)?;
        let (_, qber_in) = gain_and_qber(self.protocol.mu_signal, &quiet, e_det);
        let signal_counts = -(-transmittance * self.protocol.mu_signal).exp_m1();
        let qber = qber_budget(&noise, signal_counts, dark, qber_in);

        let params = self.protocol.with_clock(clock_rate_hz);
        let duty = dead_time_duty(
            gains.mean_click_probability(&self.protocol),
            self.protocol.clock_rate_hz,
            self.detector.dead_time_ns,
        );
        let (estimate, skr_bps) = match decoy_bounds(&params, &gains) {
            Ok(est) => (Some(est), duty * secure_key_rate(&params, &est)),
            Err(Error::DecoyInfeasible { .. }) => (None, 0.0),
            Err(e) => return Err(e),
        };
        Ok(LinkReport { loss_db, transmittance, noise, background, gains, estimate, qber, duty, skr_bps })
    }

    /// Evaluates ONU `onu` of `t` at the full protocol clock.
    pub fn evaluate(&self, t: &Topology, onu: OnuId) -> Result<LinkReport> {
        self.evaluate_path(&quantum_path(t, onu)?, self.protocol.clock_rate_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SystemModel {
        SystemModel {
            protocol: ProtocolParams::default(),
            detector: DetectorParams::default(),
            physics: PhysicsParams::new(1.3e-10).unwrap(),
        }
    }

    #[test]
    fn quiet_link_has_only_inherent_qber() {
        let mut t = Topology::experiment();
        t.feeder_channels.clear();
        t.onus[0].upstream = None;
        t.onus[0].downstream = None;
        let r = model().evaluate(&t, 1).unwrap();
        assert_eq!(r.noise, NoiseCounts::default());
        assert_eq!(r.qber.qber_total, r.qber.qber_in);
        assert_eq!(r.background, 1e-6);
        assert!(r.skr_bps > 0.0);
    }

    #[test]
    fn key_rate_drops_with_detector_efficiency_and_noise() {
        let t = Topology::experiment();
        let m = model();
        let base = m.evaluate(&t, 1).unwrap().skr_bps;
        let mut worse = m.clone();
        worse.detector.efficiency = 0.06;
        assert!(worse.evaluate(&t, 1).unwrap().skr_bps < base);
        let mut noisy = m.clone();
        noisy.physics.raman.rho0 *= 2.0;
        assert!(noisy.evaluate(&t, 1).unwrap().skr_bps < base);
        let mut dead = m.clone();
        dead.detector.dead_time_ns = 10_000.0;
        assert!(dead.evaluate(&t, 1).unwrap().skr_bps < base);
    }
}
