//! Closed-form statistics of the per-sample zero-dispersion channel
//! `dq/dz = j gamma |q|^2 q + v(z)`, `E v(z) v*(z') = sigma2 delta(z - z')`.
//!
//! Units: W for power, km for length, so `gamma` is in 1/(W km) and
//! `sigma2 * length` is the accumulated noise power in W. Densities are
//! per `dr dphi` with `r` in W^(1/2).

use crate::error::{ensure_finite, invalid, Result};
use crate::special::{besseli_scaled, ScaledComplex};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{FRAC_1_PI, PI, TAU};

/// Default truncation tolerance of the Fourier series, relative to the
/// running maximum term.
pub const DEFAULT_PDF_TOL: f64 = 1e-12;
/// Hard cap on the number of Fourier harmonics.
pub const MAX_HARMONICS: usize = 4096;
const SMALL_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    /// Kerr coefficient, 1/(W km).
    pub gamma: f64,
    /// Noise intensity, W/km.
    pub sigma2: f64,
    /// Fiber length, km.
    pub length: f64,
}

impl FiberParams {
    pub fn new(gamma: f64, sigma2: f64, length: f64) -> Result<Self> {
        let p = Self { gamma, sigma2, length };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("gamma", self.gamma)?;
        ensure_finite("sigma2", self.sigma2)?;
        ensure_finite("length", self.length)?;
        if self.gamma < 0.0 {
            return Err(invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.sigma2 <= 0.0 || self.length <= 0.0 {
            return Err(invalid(format!(
                "sigma2 and length must be positive, got {} and {}",
                self.sigma2, self.length
            )));
        }
        Ok(())
    }

    /// Accumulated noise power `sigma2 * L` (W).
    pub fn noise_power(&self) -> f64 {
        self.sigma2 * self.length
    }

    /// SNR `rho = P / (sigma2 L)`.
    pub fn snr(&self, power: f64) -> f64 {
        power / self.noise_power()
    }

    /// Deterministic nonlinear rotation `gamma r0^2 L` of a noiseless input.
    pub fn rotation(&self, r0: f64) -> f64 {
        self.gamma * r0 * r0 * self.length
    }

    /// The scaled channel `(lambda q, lambda v, gamma / lambda^2)`, which has
    /// the same law up to the amplitude scaling.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            gamma: self.gamma / (lambda * lambda),
            sigma2: self.sigma2 * lambda * lambda,
            length: self.length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarSample {
    pub r: f64,
    /// Phase in `[0, 2pi)`.
    pub phi: f64,
}

impl PolarSample {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        ensure_finite("r", r)?;
        ensure_finite("phi", phi)?;
        if r < 0.0 {
            return Err(invalid(format!("amplitude must be >= 0, got {r}")));
        }
        Ok(Self { r, phi: canonical_phase(phi) })
    }

    pub fn from_complex(q: Complex64) -> Self {
        Self { r: q.norm(), phi: canonical_phase(q.arg()) }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.r, self.phi)
    }
}

/// Wrap a phase into `[0, 2pi)`.
pub fn canonical_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs.
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Fourier coefficients of order `m` of the conditional law.
///
/// `b` can underflow for large `m gamma sigma2 L^2`, so it is kept scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierCoeffPair {
    pub a: Complex64,
    pub b: ScaledComplex,
    pub order: u32,
}

impl FourierCoeffPair {
    pub fn b_value(&self) -> Complex64 {
        self.b.value()
    }
}

/// `e^w - 1` for complex `w` without cancellation near 0.
fn expm1_complex(w: Complex64) -> Complex64 {
    let (s, c) = w.im.sin_cos();
    let half = (0.5 * w.im).sin();
    Complex64::new(w.re.exp_m1() * c - 2.0 * half * half, w.re.exp() * s)
}

/// `a(m) = (sqrt(j m gamma)/sigma) coth(w)`, `b(m) = (sqrt(j m gamma)/sigma) / sinh(w)`
/// with `w = sqrt(j m gamma sigma2) L`, principal branch.
pub fn fourier_ab(m: u32, params: &FiberParams) -> Result<FourierCoeffPair> {
    params.validate()?;
    if m == 0 {
        return Err(invalid("fourier_ab needs order m >= 1"));
    }
    let s = params.noise_power();
    if params.gamma == 0.0 {
        let v = Complex64::new(1.0 / s, 0.0);
        return Ok(FourierCoeffPair { a: v, b: ScaledComplex::from_complex(v), order: m });
    }
    let sigma = params.sigma2.sqrt();
    let k = Complex64::new(0.0, m as f64 * params.gamma).sqrt();
    let w = k * sigma * params.length;
    // Re w > 0 on the principal branch, so e^{-2w} is bounded by 1.
    let d = -expm1_complex(-2.0 * w); // 1 - e^{-2w}
    let ks = k / sigma;
    let a = ks * (2.0 / d - 1.0);
    // 1/sinh(w) = 2 e^{-w} / (1 - e^{-2w})
    let b = ScaledComplex::new(ks * 2.0 / d * Complex64::from_polar(1.0, -w.im), -w.re);
    Ok(FourierCoeffPair { a, b, order: m })
}

/// Rician amplitude density of `R = |q0 + Z|`, `Z ~ CN(0, sigma2 L)`.
/// It does not depend on `gamma`.
pub fn amplitude_pdf(r: f64, r0: f64, params: &FiberParams) -> Result<f64> {
    ensure_finite("r", r)?;
    ensure_finite("r0", r0)?;
    if r < 0.0 || r0 < 0.0 {
        return Err(invalid(format!("amplitudes must be >= 0, got r={r}, r0={r0}")));
    }
    params.validate()?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let s = params.noise_power();
    let x = 2.0 * r * r0 / s;
    let i0 = besseli_scaled(0, Complex64::new(x, 0.0))?;
    // Subtract x from the Bessel scale first: the exponents x and
    // (r^2 + r0^2)/s are both large and nearly cancel.
    let exponent = (i0.log_scale - x) + (2.0 * r / s).ln() - (r - r0) * (r - r0) / s;
    Ok(i0.mantissa.re * exponent.exp())
}

/// Fourier harmonics of the conditional density in the output phase.
///
/// `f(r, phi | r0, phi0) = (1/pi) [c_0 + sum_{m>=1} Re(c_m e^{j m (phi - phi0)})]`,
/// with `c_0 = f_R(r | r0) / 2` and
/// `c_m = 2 r b(m) exp(-a(m)(r^2 + r0^2)) I_m(2 b(m) r0 r)`. The factor 2 in
/// `c_m` is what makes the `gamma = 0` case resum to the circular Gaussian.
///
/// The complex `a(m)`, `b(m)` already give `arg c_m ~ -m gamma r0^2 L` near
/// `r = r0`, so the Kerr rotation is carried by the coefficients; applying
/// it again as an explicit phase factor would rotate the density twice.
/// `rotation` is the deterministic rotation `gamma r0^2 L`, kept only as a
/// diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonics {
    pub coeffs: Vec<Complex64>,
    pub rotation: f64,
    pub hit_cap: bool,
}

impl Harmonics {
    /// Raw series value at relative phase `theta = phi - phi0`, before clamping.
    pub fn eval(&self, theta: f64) -> f64 {
        let mut sum = self.coeffs[0].re;
        for (m, c) in self.coeffs.iter().enumerate().skip(1) {
            sum += (c * Complex64::from_polar(1.0, m as f64 * theta)).re;
        }
        sum * FRAC_1_PI
    }

    /// Mass of `f` over the phase arc `[theta - w/2, theta + w/2]`, as a
    /// radial density.
    pub fn arc_mass(&self, theta: f64, width: f64) -> f64 {
        let mut sum = self.coeffs[0].re * width;
        for (m, c) in self.coeffs.iter().enumerate().skip(1) {
            let mf = m as f64;
            let weight = 2.0 * (0.5 * mf * width).sin() / mf;
            sum += weight * (c * Complex64::from_polar(1.0, mf * theta)).re;
        }
        sum * FRAC_1_PI
    }
}

/// Compute the `c_m` of [`Harmonics`], truncating once `|c_m|` drops below
/// `tol` times the largest term seen for three consecutive orders.
pub fn pdf_harmonics(r: f64, r0: f64, params: &FiberParams, tol: f64) -> Result<Harmonics> {
    ensure_finite("tol", tol)?;
    if tol <= 0.0 {
        return Err(invalid(format!("tol must be positive, got {tol}")));
    }
    let c0 = 0.5 * amplitude_pdf(r, r0, params)?;
    let rotation = params.rotation(r0);
    let mut coeffs = vec![Complex64::new(c0, 0.0)];
    if r == 0.0 || r0 == 0.0 {
        // I_m(0) = 0 for every m >= 1: the phase is uniform.
        return Ok(Harmonics { coeffs, rotation, hit_cap: false });
    }
    let ln_tol = tol.ln();
    let mut ln_max = if c0 > 0.0 { c0.ln() } else { f64::NEG_INFINITY };
    let mut small = 0;
    let r2 = r * r + r0 * r0;
    for m in 1..=MAX_HARMONICS as u32 {
        let ab = fourier_ab(m, params)?;
        let arg = ab.b_value() * (2.0 * r0 * r);
        let bessel = besseli_scaled(m, arg)?;
        let ea = -ab.a * r2;
        let cm = (ab.b * bessel)
            .mul_complex(Complex64::from_polar(2.0 * r, ea.im))
            .mul_exp(ea.re);
        let ln_c = cm.ln_abs();
        coeffs.push(cm.value());
        if ln_c > ln_max {
            ln_max = ln_c;
        }
        if ln_c < ln_max + ln_tol {
            small += 1;
            if small >= SMALL_RUN {
                return Ok(Harmonics { coeffs, rotation, hit_cap: false });
            }
        } else {
            small = 0;
        }
    }
    Ok(Harmonics { coeffs, rotation, hit_cap: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfDiagnostics {
    /// Number of harmonics summed (excluding the constant term).
    pub terms: usize,
    pub hit_cap: bool,
    /// Series value before clamping at zero.
    pub raw: f64,
    pub clamped: bool,
}

/// Conditional density `f(r, phi | r0, phi0)` per `dr dphi`.
pub fn conditional_pdf(out: PolarSample, in0: PolarSample, params: &FiberParams, tol: f64) -> Result<f64> {
    conditional_pdf_diagnostics(out, in0, params, tol).map(|(v, _)| v)
}

pub fn conditional_pdf_diagnostics(
    out: PolarSample,
    in0: PolarSample,
    params: &FiberParams,
    tol: f64,
) -> Result<(f64, PdfDiagnostics)> {
    let h = pdf_harmonics(out.r, in0.r, params, tol)?;
    let raw = h.eval(out.phi - in0.phi);
    let diag = PdfDiagnostics {
        terms: h.coeffs.len() - 1,
        hit_cap: h.hit_cap,
        raw,
        clamped: raw < 0.0,
    };
    Ok((raw.max(0.0), diag))
}

/// Conditional density at `gamma = 0`: a circular Gaussian about `q0`,
/// written in polar coordinates.
pub fn gaussian_polar_pdf(out: PolarSample, in0: PolarSample, noise_power: f64) -> f64 {
    let d = out.to_complex() - in0.to_complex();
    out.r / (PI * noise_power) * (-d.norm_sqr() / noise_power).exp()
}

/// Radial output density for a half-Gaussian input amplitude (`E R0^2 = P`)
/// with uniform phase, in the large-argument Bessel approximation:
/// `exp(-r^2/v) (1 + erf(c r)) / sqrt(pi v)`, `v = 2P + sigma2 L`,
/// `c = sqrt(2P / (sigma2 L v))`. Divide by `2pi` for the joint `(r, phi)`
/// density.
///
/// That expression is a skew-normal density on the whole line; restricted
/// to `r >= 0` it is renormalised by its mass `1/2 + atan(sqrt(2P/sigma2 L))/pi`.
pub fn halfgaussian_output_pdf(r: f64, avg_power: f64, params: &FiberParams) -> Result<f64> {
    ensure_finite("r", r)?;
    ensure_finite("avg_power", avg_power)?;
    if avg_power <= 0.0 {
        return Err(invalid(format!("average power must be positive, got {avg_power}")));
    }
    if r < 0.0 {
        return Err(invalid(format!("r must be >= 0, got {r}")));
    }
    params.validate()?;
    let s = params.noise_power();
    let v = 2.0 * avg_power + s;
    let c = (2.0 * avg_power / (s * v)).sqrt();
    let mass = 0.5 + (2.0 * avg_power / s).sqrt().atan() / PI;
    Ok((-r * r / v).exp() * (1.0 + erf(c * r)) / ((PI * v).sqrt() * mass))
}

/// Density of the half-Gaussian amplitude itself, `E R0^2 = P`.
pub fn halfgaussian_input_pdf(r0: f64, avg_power: f64) -> f64 {
    if r0 < 0.0 {
        return 0.0;
    }
    (2.0 / (PI * avg_power)).sqrt() * (-r0 * r0 / (2.0 * avg_power)).exp()
}
