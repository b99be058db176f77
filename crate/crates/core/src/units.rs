//! Unit conversions shared by every model.
//!
//! All internal computation happens in linear units (watts, linear
//! transmittance, nepers per km). Decibel quantities only appear at the
//! configuration boundary and are converted here.

/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Converts optical power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts optical power in watts to dBm. Zero power maps to `-inf`.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Linear transmittance of a loss expressed in dB.
pub fn db_to_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmittance_to_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

/// Power ratio of a (usually negative) dB figure, e.g. -60 dB -> 1e-6.
pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Attenuation coefficient in dB/km to the linear (1/km) coefficient used in
/// `exp(-alpha * L)`.
pub fn db_per_km_to_linear(alpha_db: f64) -> f64 {
    alpha_db * std::f64::consts::LN_10 / 10.0
}

/// Photon energy in joules at a frequency given in THz.
pub fn photon_energy(frequency_thz: f64) -> f64 {
    PLANCK * frequency_thz * 1e12
}
