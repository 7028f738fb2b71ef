use super::{complex_normal, par_batch};
use crate::channel::{canonical_phase, FiberParams};
use crate::error::{ensure_finite, invalid, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

pub const KL_DEFAULT_TERMS: usize = 512;

/// Karhunen-Loeve truncation of the Wiener process on `[0, L]`:
/// `W(z) = sum_k X_k sigma_k psi_k(z)`, `sigma_k = 2/((2k-1) pi)`,
/// `psi_k(z) = sqrt(2) sin((2k-1) pi z / 2L)`, `X_k ~ CN(0, sigma2 L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KlConfig {
    pub n_terms: usize,
    /// Replace `Phi0` by the linear phase `arg(Q0 + W(L))`. With this set the
    /// sampler draws from the exact solution of the channel, not the
    /// large-power approximation.
    pub include_linear_phase: bool,
}

impl Default for KlConfig {
    fn default() -> Self {
        Self { n_terms: KL_DEFAULT_TERMS, include_linear_phase: false }
    }
}

impl KlConfig {
    pub fn sigma(k: usize) -> f64 {
        2.0 / ((2 * k - 1) as f64 * PI)
    }

    /// Fraction of the Wiener variance `sum_k sigma_k^2 = 1/2` dropped by the
    /// truncation.
    pub fn tail_fraction(&self) -> f64 {
        let kept: f64 = (1..=self.n_terms).map(|k| Self::sigma(k).powi(2)).sum();
        1.0 - 2.0 * kept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraicOutput {
    /// Received intensity `R^2`.
    pub r_sq: f64,
    /// Received phase in `[0, 2pi)`.
    pub phi: f64,
    /// Received phase before reduction modulo `2pi`.
    pub phase_unwrapped: f64,
}

/// Sample `R^2 = |Q0 + Z1|^2`,
/// `Phi = Phi0 + gamma L (R0^2 + 2 Re(conj(Q0) int W / L) + Z3)`, with `Z1 = W(L)`,
/// `int W = sqrt(2) L sum sigma_k^2 X_k`, `Z3 = sum sigma_k^2 |X_k|^2`, all
/// from the same KL draw. The approximation is meant for `P >> sigma2 L`.
pub fn algebraic_sample(
    r0: f64,
    phi0: f64,
    params: &FiberParams,
    kl: &KlConfig,
    seed: u64,
    batch: usize,
) -> Result<Vec<AlgebraicOutput>> {
    ensure_finite("r0", r0)?;
    ensure_finite("phi0", phi0)?;
    params.validate()?;
    if kl.n_terms < 1 {
        return Err(invalid("KL expansion needs n_terms >= 1"));
    }
    if r0 < 0.0 || batch == 0 {
        return Err(invalid("need r0 >= 0 and batch >= 1"));
    }
    let s = params.noise_power();
    let gl = params.gamma * params.length;
    let q0 = Complex64::from_polar(r0, phi0);
    let sig: Vec<f64> = (1..=kl.n_terms).map(KlConfig::sigma).collect();
    par_batch(seed, batch, |rng| {
        let mut z1 = Complex64::new(0.0, 0.0);
        let mut mean_w = Complex64::new(0.0, 0.0); // (1/L) int W
        let mut z3 = 0.0;
        for (k, &sk) in sig.iter().enumerate() {
            let x = complex_normal(rng, s);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            z1 += x * (sign * sk);
            let s2 = sk * sk;
            mean_w += x * s2;
            z3 += s2 * x.norm_sqr();
        }
        z1 *= SQRT_2;
        mean_w *= SQRT_2;
        let out = q0 + z1;
        let base = if kl.include_linear_phase { out.arg() } else { phi0 };
        let nl = gl * (r0 * r0 + 2.0 * (q0.conj() * mean_w).re + z3);
        let phase = base + nl;
        Ok(AlgebraicOutput { r_sq: out.norm_sqr(), phi: canonical_phase(phase), phase_unwrapped: phase })
    })
}
