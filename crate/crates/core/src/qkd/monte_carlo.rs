//! Gate-by-gate detection simulation, used as an oracle for the analytic
//! gains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::{ChannelBudget, ProtocolParams};
use crate::error::{invalid, Result};

const MIN_GATES: u64 = 100_000;
const CHUNK_GATES: u64 = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntensityStats {
    pub intensity: f64,
    pub gates: u64,
    pub clicks: u64,
    pub errors: u64,
}

impl IntensityStats {
    pub fn gain(&self) -> f64 {
        self.clicks as f64 / self.gates as f64
    }

    pub fn qber(&self) -> f64 {
        if self.clicks == 0 {
            0.5
        } else {
            self.errors as f64 / self.clicks as f64
        }
    }

    /// Binomial standard error of the gain.
    pub fn gain_sigma(&self) -> f64 {
        let q = self.gain();
        (q * (1.0 - q) / self.gates as f64).sqrt()
    }

    /// Binomial standard error of the QBER given the click count.
    pub fn qber_sigma(&self) -> f64 {
        let e = self.qber();
        if self.clicks == 0 {
            return 0.5;
        }
        (e * (1.0 - e) / self.clicks as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub signal: IntensityStats,
    pub decoy: IntensityStats,
    pub vacuum: IntensityStats,
}

/// Simulates `num_gates` gates at every intensity of `params`.
pub fn monte_carlo_detect(
    params: &ProtocolParams,
    budget: &ChannelBudget,
    e_det: f64,
    num_gates: u64,
    seed: u64,
) -> Result<MonteCarloResult> {
    Ok(MonteCarloResult {
        signal: monte_carlo_intensity(params.mu_signal, budget, e_det, num_gates, seed)?,
        decoy: monte_carlo_intensity(params.nu_decoy, budget, e_det, num_gates, seed.wrapping_add(1))?,
        vacuum: monte_carlo_intensity(params.vacuum, budget, e_det, num_gates, seed.wrapping_add(2))?,
    })
}

/// Simulates `num_gates` gates at one mean photon number.
///
/// Each gate draws a Poisson photon number, thins it by the channel
/// transmittance, and fires a background click with probability Y0. A gate
/// with a surviving photon is an error with probability `e_det`; a gate with
/// only a background click is an error with probability one half.
///
/// Gates are split into fixed-size chunks, each with its own generator seeded
/// from `(seed, chunk index)`, so the result is independent of thread count.
pub fn monte_carlo_intensity(
    intensity: f64,
    budget: &ChannelBudget,
    e_det: f64,
    num_gates: u64,
    seed: u64,
) -> Result<IntensityStats> {
    if num_gates < MIN_GATES {
        return Err(invalid("num_gates", format!("need at least {MIN_GATES}, got {num_gates}")));
    }
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(invalid("intensity", format!("must be >= 0, got {intensity}")));
    }
    if !(0.0..=1.0).contains(&e_det) {
        return Err(invalid("e_det", format!("must lie in [0, 1], got {e_det}")));
    }
    let poisson = if intensity > 0.0 {
        Some(Poisson::new(intensity).map_err(|e| invalid("intensity", e.to_string()))?)
    } else {
        None
    };
    let eta = budget.transmittance;
    let y0 = budget.background;

    let chunks = num_gates.div_ceil(CHUNK_GATES);
    let (clicks, errors) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let gates = CHUNK_GATES.min(num_gates - chunk * CHUNK_GATES);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let mut clicks = 0u64;
            let mut errors = 0u64;
            for _ in 0..gates {
                let photons = match &poisson {
                    Some(p) => p.sample(&mut rng) as u64,
                    None => 0,
                };
                let mut survived = false;
                for _ in 0..photons {
                    if rng.random::<f64>() < eta {
                        survived = true;
                        break;
                    }
                }
                let background = rng.random::<f64>() < y0;
                if survived {
                    clicks += 1;
                    if rng.random::<f64>() < e_det {
                        errors += 1;
                    }
                } else if background {
                    clicks += 1;
                    if rng.random::<bool>() {
                        errors += 1;
                    }
                }
            }
            (clicks, errors)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    Ok(IntensityStats { intensity, gates: num_gates, clicks, errors })
}
