//! Numerical checks of two Bessel integral identities that the closed-form
//! channel law relies on:
//!
//! * `(1/2pi) int_0^{2pi} exp(-i m t + x cos(t - t0)) dt = I_m(x) exp(-i m t0)`
//! * `int_0^inf x exp(-a x^2) I_m(b x) I_m(c x) dx = exp((b^2 + c^2) / 4a) I_m(bc / 2a) / 2a`
//!
//! The left-hand sides are computed by adaptive quadrature only, so they are
//! independent of [`besseli_scaled`].

use super::besseli_scaled;
use crate::error::{ensure_finite, Error, Result};
use crate::quad::integrate_limited;
use num_complex::Complex64;
use std::f64::consts::PI;

pub fn verify_identity_phase(m: i32, x: f64, theta0: f64) -> Result<(Complex64, Complex64)> {
    ensure_finite("x", x)?;
    ensure_finite("theta0", theta0)?;
    let mf = m as f64;
    let mut integrand =
        |t: f64| Complex64::from_polar((x * (t - theta0).cos()).exp(), -mf * t);
    // The integrand has size e^|x| and cancels down to I_m(x), so round-off
    // sets an absolute floor proportional to e^|x|.
    let floor = 1e-14 * 2.0 * PI * x.abs().exp();
    let q = integrate_limited(&mut integrand, 0.0, 2.0 * PI, floor, 1e-14, 4000)?;
    let lhs = q.value / (2.0 * PI);
    let order = m.unsigned_abs();
    let bessel = besseli_scaled(order, Complex64::new(x, 0.0))?.value();
    let rhs = bessel * Complex64::from_polar(1.0, -mf * theta0);
    Ok((lhs, rhs))
}

pub fn verify_identity_product(m: u32, a: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        ensure_finite(name, v)?;
    }
    if a <= 0.0 {
        return Err(Error::Domain(format!(
            "integral diverges: need a > 0, got {a}"
        )));
    }
    let growth = b.abs() + c.abs();
    // The rhs exponent must stay representable.
    let rhs_exponent = (b * b + c * c) / (4.0 * a);
    if rhs_exponent > 650.0 {
        return Err(Error::Domain(format!(
            "exp((b^2 + c^2) / 4a) = exp({rhs_exponent:.1}) is out of range"
        )));
    }
    let peak = growth / (2.0 * a);
    let upper = peak + ((60.0 + rhs_exponent.max(0.0)) / a).sqrt() + 1.0;
    let mut integrand = |x: f64| -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let ib = besseli_scaled(m, Complex64::new(b * x, 0.0)).expect("finite argument");
        let ic = besseli_scaled(m, Complex64::new(c * x, 0.0)).expect("finite argument");
        let prod = ib * ic;
        x * prod.value_scaled(-a * x * x).re
    };
    let mut breaks = vec![0.0];
    if peak > 0.0 && peak < upper {
        breaks.push(peak);
    }
    breaks.push(upper);
    let mut lhs = 0.0;
    for w in breaks.windows(2) {
        lhs += integrate_limited(&mut integrand, w[0], w[1], 1e-300, 1e-13, 4000)?.value;
    }
    let rhs = besseli_scaled(m, Complex64::new(b * c / (2.0 * a), 0.0))?
        .value_scaled(rhs_exponent)
        .re
        / (2.0 * a);
    Ok((lhs, rhs))
}
