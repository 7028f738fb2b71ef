//! Named parameter sets.
//!
//! Noise is quoted in the figures as an accumulated spectral density
//! `N = sigma0^2 L` (W/Hz). With in-line filters of bandwidth `W_L` the
//! per-sample noise is `sigma^2 = 2 W_L sigma0^2`, so `sigma^2 L = 2 W_L N`.
//! All presets use `W_L = B = 125 GHz`.

use crate::channel::FiberParams;
use crate::dmc::{RingGrid, Spacing};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Fiber constants.
pub mod table1 {
    /// Spontaneous emission factor.
    pub const N_SP: f64 = 1.0;
    /// Planck's constant, J s.
    pub const PLANCK: f64 = 6.626e-34;
    /// Carrier frequency, Hz.
    pub const NU: f64 = 193.55e12;
    /// Loss, km^-1 (0.2 dB/km).
    pub const ALPHA: f64 = 0.2 * std::f64::consts::LN_10 / 10.0;
    /// Kerr coefficient, W^-1 km^-1.
    pub const GAMMA: f64 = 1.27;
    /// Maximum bandwidth, Hz.
    pub const BANDWIDTH: f64 = 125e9;
    /// Length used throughout, km.
    pub const LENGTH: f64 = 5000.0;

    /// `sigma0^2 = n_sp h nu alpha`, W / (km Hz).
    pub fn sigma0_sq() -> f64 {
        N_SP * PLANCK * NU * ALPHA
    }
}

/// Per-sample noise `sigma^2 L = 2 W_L N` for an accumulated density `N` in W/Hz.
pub fn per_sample_noise(density_w_per_hz: f64, bandwidth_hz: f64) -> f64 {
    2.0 * bandwidth_hz * density_w_per_hz
}

/// 1 uW/GHz in W/Hz.
pub const UW_PER_GHZ: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_rings: usize,
    pub n_phases: usize,
    pub r_max: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<RingGrid> {
        RingGrid::new(self.n_rings, self.n_phases, self.r_max, Spacing::Uniform)
    }
}

/// Log-spaced SNR sweep, `rho = P / sigma^2 L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
}

impl Sweep {
    pub fn from_db(db_min: f64, db_max: f64, points: usize) -> Self {
        Self { rho_min: 10f64.powf(db_min / 10.0), rho_max: 10f64.powf(db_max / 10.0), points }
    }

    pub fn rhos(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.rho_min];
        }
        let (a, b) = (self.rho_min.ln(), self.rho_max.ln());
        (0..self.points).map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub params: FiberParams,
    pub grid: GridSpec,
    /// Operating average power, W.
    pub power: f64,
    pub sweep: Sweep,
    /// Peak amplitude, sqrt(W).
    pub peak: Option<f64>,
    pub seed: u64,
}

pub const NAMES: [&str; 5] = ["desk", "paper-fig4", "paper-fig7", "medium", "table1"];

const PEAK_POWER: f64 = 10e-3;

impl Preset {
    pub fn by_name(name: &str) -> Result<Self> {
        let sigma2_for = |density: f64| per_sample_noise(density, table1::BANDWIDTH) / table1::LENGTH;
        let fiber = |sigma2: f64| FiberParams::new(table1::GAMMA, sigma2, table1::LENGTH);
        let peak = PEAK_POWER.sqrt();
        Ok(match name {
            "desk" => {
                let params = fiber(sigma2_for(0.1 * UW_PER_GHZ))?;
                let s = params.noise_power();
                let power: f64 = 0.5e-3;
                Self {
                    name: name.into(),
                    description: "0.1 uW/GHz noise, 0.5 mW operating point (rho = 20)".into(),
                    params,
                    grid: GridSpec { n_rings: 50, n_phases: 64, r_max: power.sqrt() + 6.0 * s.sqrt() },
                    power,
                    sweep: Sweep::from_db(0.0, 20.0, 11),
                    peak: None,
                    seed: 1,
                }
            }
            "paper-fig4" => {
                let params = fiber(sigma2_for(0.1 * UW_PER_GHZ))?;
                let s = params.noise_power();
                Self {
                    name: name.into(),
                    description: "capacity vs SNR, 0.1 uW/GHz noise, 10 mW peak; sweep ends near 20% of peak".into(),
                    params,
                    grid: GridSpec { n_rings: 52, n_phases: 64, r_max: peak + 6.0 * s.sqrt() },
                    power: 20.0 * s,
                    sweep: Sweep { rho_min: 0.1, rho_max: 80.0, points: 20 },
                    peak: Some(peak),
                    seed: 4,
                }
            }
            "paper-fig7" => {
                let params = fiber(sigma2_for(UW_PER_GHZ))?;
                let s = params.noise_power();
                Self {
                    name: name.into(),
                    description: "input structure, 1 uW/GHz noise, 10 mW peak, 2.5 dB and 13 dB".into(),
                    params,
                    grid: GridSpec { n_rings: 40, n_phases: 64, r_max: peak + 5.0 * s.sqrt() },
                    power: 10f64.powf(0.25) * s,
                    sweep: Sweep::from_db(2.5, 13.0, 2),
                    peak: Some(peak),
                    seed: 7,
                }
            }
            "medium" => {
                let params = fiber(sigma2_for(0.1 * UW_PER_GHZ))?;
                let s = params.noise_power();
                let power = 100.0 * s;
                Self {
                    name: name.into(),
                    description: "medium-power regime: rho = 100, phase metric ~ 0.04".into(),
                    params,
                    grid: GridSpec { n_rings: 80, n_phases: 64, r_max: 3.2 * power.sqrt() },
                    power,
                    sweep: Sweep::from_db(15.0, 25.0, 5),
                    peak: None,
                    seed: 11,
                }
            }
            "table1" => {
                let params = fiber(2.0 * table1::BANDWIDTH * table1::sigma0_sq())?;
                let s = params.noise_power();
                let power: f64 = 1e-3;
                Self {
                    name: name.into(),
                    description: "noise from the fiber constants (n_sp h nu alpha, 125 GHz)".into(),
                    params,
                    grid: GridSpec { n_rings: 60, n_phases: 64, r_max: power.sqrt() + 6.0 * s.sqrt() },
                    power,
                    sweep: Sweep::from_db(0.0, 30.0, 11),
                    peak: None,
                    seed: 3,
                }
            }
            other => {
                return Err(invalid(format!("unknown preset '{other}'; known: {}", NAMES.join(", "))));
            }
        })
    }

    pub fn powers(&self) -> Vec<f64> {
        let s = self.params.noise_power();
        self.sweep.rhos().into_iter().map(|rho| rho * s).collect()
    }
}
