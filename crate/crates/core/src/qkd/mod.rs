//! Decoy-state BB84 performance: gains, QBER budget, single-photon bounds
//! (vacuum + weak decoy) and the asymptotic secure key rate.

mod monte_carlo;

pub use monte_carlo::{monte_carlo_detect, monte_carlo_intensity, IntensityStats, MonteCarloResult};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub mu_signal: f64,
    pub nu_decoy: f64,
    #[serde(default)]
    pub vacuum: f64,
    /// Signal : decoy : vacuum emission ratio.
    pub state_ratio: [u32; 3],
    /// Per-transmitter pulse rate.
    pub clock_rate_hz: f64,
    #[serde(default = "default_fec")]
    pub error_correction_efficiency: f64,
    #[serde(default = "default_sifting")]
    pub sifting_factor: f64,
}

fn default_fec() -> f64 {
    1.16
}

fn default_sifting() -> f64 {
    0.5
}

impl Default for ProtocolParams {
    /// The 0.6 / 0.2 / 0 source at 14:1:1 and 50 MHz.
    fn default() -> Self {
        Self {
            mu_signal: 0.6,
            nu_decoy: 0.2,
            vacuum: 0.0,
            state_ratio: [14, 1, 1],
            clock_rate_hz: 50e6,
            error_correction_efficiency: default_fec(),
            sifting_factor: default_sifting(),
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_signal > self.nu_decoy && self.nu_decoy > 0.0) || !self.mu_signal.is_finite() {
            return Err(invalid(
                "mu_signal/nu_decoy",
                format!("need mu > nu > 0, got {} and {}", self.mu_signal, self.nu_decoy),
            ));
        }
        if self.vacuum != 0.0 {
            return Err(invalid("vacuum", format!("vacuum intensity must be 0, got {}", self.vacuum)));
        }
        if self.state_ratio[0] == 0 || self.state_ratio[1] == 0 {
            return Err(invalid("state_ratio", "signal and decoy entries must be positive"));
        }
        if !(self.clock_rate_hz > 0.0) || !self.clock_rate_hz.is_finite() {
            return Err(invalid("clock_rate_hz", format!("must be > 0, got {}", self.clock_rate_hz)));
        }
        if !(self.error_correction_efficiency >= 1.0) {
            return Err(invalid(
                "error_correction_efficiency",
                format!("must be >= 1, got {}", self.error_correction_efficiency),
            ));
        }
        if !(self.sifting_factor > 0.0 && self.sifting_factor <= 1.0) {
            return Err(invalid("sifting_factor", format!("must lie in (0, 1], got {}", self.sifting_factor)));
        }
        Ok(())
    }

    /// Fraction of pulses that are signal states.
    pub fn signal_fraction(&self) -> f64 {
        let total: u32 = self.state_ratio.iter().sum();
        self.state_ratio[0] as f64 / total as f64
    }

    fn fractions(&self) -> [f64; 3] {
        let total: u32 = self.state_ratio.iter().sum();
        self.state_ratio.map(|r| r as f64 / total as f64)
    }

    pub fn with_clock(&self, clock_rate_hz: f64) -> Self {
        Self { clock_rate_hz, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub gate_width_ns: f64,
    pub dark_count_per_gate: f64,
    /// Intrinsic optical misalignment error e_det.
    pub misalignment: f64,
    /// Hold-off after each click during which further gates are blanked.
    #[serde(default)]
    pub dead_time_ns: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self { efficiency: 0.08, gate_width_ns: 1.0, dark_count_per_gate: 1e-6, misalignment: 0.01, dead_time_ns: 0.0 }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(name, format!("must lie in [0, 1], got {v}")))
            }
        };
        unit("efficiency", self.efficiency)?;
        unit("dark_count_per_gate", self.dark_count_per_gate)?;
        unit("misalignment", self.misalignment)?;
        if !(self.gate_width_ns > 0.0) || !self.gate_width_ns.is_finite() {
            return Err(invalid("gate_width_ns", format!("must be > 0, got {}", self.gate_width_ns)));
        }
        if !(self.dead_time_ns >= 0.0) || !self.dead_time_ns.is_finite() {
            return Err(invalid("dead_time_ns", format!("must be >= 0, got {}", self.dead_time_ns)));
        }
        Ok(())
    }
}

/// Overall channel seen by one intensity: transmittance includes the detector
/// efficiency, background is dark counts plus every noise source per gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelBudget {
    pub transmittance: f64,
    pub background: f64,
}

impl ChannelBudget {
    pub fn new(transmittance: f64, background: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(invalid("transmittance", format!("must lie in [0, 1], got {transmittance}")));
        }
        if !(0.0..=1.0).contains(&background) {
            return Err(invalid("background", format!("must lie in [0, 1], got {background}")));
        }
        Ok(Self { transmittance, background })
    }
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::EntropyDomain(x));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// `H2` with the argument clamped to [0, 0.5]; used where the argument is a
/// bound already clamped to that range.
fn h2(x: f64) -> f64 {
    binary_entropy(x.clamp(0.0, 0.5)).unwrap_or(1.0)
}

/// Gain Q and QBER E for mean photon number `intensity`.
pub fn gain_and_qber(intensity: f64, budget: &ChannelBudget, e_det: f64) -> (f64, f64) {
    let y0 = budget.background;
    let signal = -(-budget.transmittance * intensity.max(0.0)).exp_m1();
    let gain = (y0 + signal).min(1.0);
    if gain <= 0.0 {
        return (0.0, 0.5);
    }
    let qber = ((0.5 * y0 + e_det * signal) / gain).min(0.5);
    (gain, qber)
}

/// Observed gains and error rates of the three intensities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredGains {
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_nu: f64,
    pub e_nu: f64,
    /// Vacuum gain, i.e. the background yield Y0.
    pub q_vac: f64,
}

impl MeasuredGains {
    pub fn analytic(params: &ProtocolParams, budget: &ChannelBudget, e_det: f64) -> Self {
        let (q_mu, e_mu) = gain_and_qber(params.mu_signal, budget, e_det);
        let (q_nu, e_nu) = gain_and_qber(params.nu_decoy, budget, e_det);
        let (q_vac, _) = gain_and_qber(params.vacuum, budget, e_det);
        Self { q_mu, e_mu, q_nu, e_nu, q_vac }
    }

    /// Mean click probability per gate across the emitted state mix.
    pub fn mean_click_probability(&self, params: &ProtocolParams) -> f64 {
        let [fs, fd, fv] = params.fractions();
        fs * self.q_mu + fd * self.q_nu + fv * self.q_vac
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_nu: f64,
    pub e_nu: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub q1_lower: f64,
}

/// Vacuum + weak-decoy lower bound on the single-photon yield and upper bound
/// on its error rate.
pub fn decoy_bounds(params: &ProtocolParams, measured: &MeasuredGains) -> Result<DecoyEstimate> {
    params.validate()?;
    let (mu, nu, y0) = (params.mu_signal, params.nu_decoy, measured.q_vac);
    let y1 = mu / (mu * nu - nu * nu)
        * (measured.q_nu * nu.exp()
            - measured.q_mu * mu.exp() * nu * nu / (mu * mu)
            - (mu * mu - nu * nu) / (mu * mu) * y0);
    if !(y1 > 0.0) {
        return Err(Error::DecoyInfeasible { y1_lower: y1 });
    }
    let y1 = y1.min(1.0);
    let e1 = ((measured.e_nu * measured.q_nu * nu.exp() - 0.5 * y0) / (y1 * nu)).clamp(0.0, 0.5);
    let q1 = (y1 * mu * (-mu).exp()).min(measured.q_mu);
    Ok(DecoyEstimate {
        q_mu: measured.q_mu,
        e_mu: measured.e_mu,
        q_nu: measured.q_nu,
        e_nu: measured.e_nu,
        y1_lower: y1,
        e1_upper: e1,
        q1_lower: q1,
    })
}

/// Asymptotic key rate in bits/s at `params.clock_rate_hz`, never negative.
pub fn secure_key_rate(params: &ProtocolParams, estimate: &DecoyEstimate) -> f64 {
    let bracket = -estimate.q_mu * params.error_correction_efficiency * h2(estimate.e_mu)
        + estimate.q1_lower * (1.0 - h2(estimate.e1_upper));
    params.sifting_factor * params.clock_rate_hz * params.signal_fraction() * bracket.max(0.0)
}

/// Fraction of gates left open by detector dead time: after each click the
/// detector is blind for `dead_time_ns` at `gate_rate_hz`.
pub fn dead_time_duty(mean_click_probability: f64, gate_rate_hz: f64, dead_time_ns: f64) -> f64 {
    1.0 / (1.0 + mean_click_probability * gate_rate_hz * dead_time_ns * 1e-9)
}

/// Noise clicks per gate grouped by where they originate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseCounts {
    pub mcf_ds: f64,
    pub mcf_us: f64,
    pub ssmf_ds: f64,
    pub ssmf_us: f64,
}

impl NoiseCounts {
    pub fn total(&self) -> f64 {
        self.mcf_ds + self.mcf_us + self.ssmf_ds + self.ssmf_us
    }
}

/// Additive QBER decomposition: inherent QBER plus one term per noise group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QberBudget {
    pub qber_in: f64,
    pub qber_mcf_ds: f64,
    pub qber_mcf_us: f64,
    pub qber_ssmf_ds: f64,
    pub qber_ssmf_us: f64,
    pub qber_total: f64,
}

impl QberBudget {
    pub fn qber_mcf(&self) -> f64 {
        self.qber_mcf_ds + self.qber_mcf_us
    }

    pub fn qber_ssmf(&self) -> f64 {
        self.qber_ssmf_ds + self.qber_ssmf_us
    }
}

/// Builds the QBER budget. Noise clicks are random in basis and bit, so each
/// source adds `½·n_i / (n_signal + n_dark)`; the denominator excludes the
/// noise itself so that terms from different sources add up exactly.
pub fn qber_budget(noise: &NoiseCounts, signal_counts: f64, dark_counts: f64, qber_in: f64) -> QberBudget {
    let denom = signal_counts + dark_counts;
    let term = |n: f64| if denom > 0.0 { (0.5 * n / denom).clamp(0.0, 0.5) } else { 0.0 };
    let qber_in = qber_in.clamp(0.0, 0.5);
    let qber_mcf_ds = term(noise.mcf_ds);
    let qber_mcf_us = term(noise.mcf_us);
    let qber_ssmf_ds = term(noise.ssmf_ds);
    let qber_ssmf_us = term(noise.ssmf_us);
    QberBudget {
        qber_in,
        qber_mcf_ds,
        qber_mcf_us,
        qber_ssmf_ds,
        qber_ssmf_us,
        qber_total: qber_in + qber_mcf_ds + qber_mcf_us + qber_ssmf_ds + qber_ssmf_us,
    }
}
