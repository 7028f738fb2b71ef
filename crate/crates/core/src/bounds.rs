//! Closed-form capacity bounds and the power/noise regime map.
//!
//! All values are in nats.

use crate::channel::FiberParams;
use crate::error::{ensure_finite, invalid, Result};
use crate::special::f_aux;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Euler-Mascheroni constant.
pub const ZETA: f64 = 0.577_215_664_901_532_9;
/// Roots of `x^2 - x + 1/6`: `(3 + sqrt 3) / 6`.
pub const ALPHA1: f64 = (3.0 + 1.732_050_807_568_877_2) / 6.0;
/// `(3 - sqrt 3) / 6`.
pub const ALPHA2: f64 = (3.0 - 1.732_050_807_568_877_2) / 6.0;
/// Power of the half-Gaussian amplitude after removing its mean, `1 - 2/pi`.
pub const HALFGAUSSIAN_POWER_FACTOR: f64 = 1.0 - 2.0 / PI;
/// `a >> b` means `a / b` exceeds this.
pub const MUCH_GREATER: f64 = 10.0;
/// `a << b` means `a / b` is below this.
pub const MUCH_LESS: f64 = 0.1;

fn check_power(power: f64, params: &FiberParams) -> Result<()> {
    ensure_finite("power", power)?;
    params.validate()?;
    if power <= 0.0 {
        return Err(invalid(format!("power must be positive, got {power}")));
    }
    Ok(())
}

/// `C >= ln(rho)/2 - 1/2` for the amplitude channel.
pub fn lb_theorem1(rho: f64) -> Result<f64> {
    ensure_finite("rho", rho)?;
    if rho <= 0.0 {
        return Err(invalid(format!("SNR must be positive, got {rho}")));
    }
    Ok(0.5 * rho.ln() - 0.5)
}

fn f_pair(power: f64, params: &FiberParams) -> Result<f64> {
    let x = params.noise_power() / (2.0 * power);
    Ok(f_aux(x, ALPHA1)? + f_aux(x, ALPHA2)?)
}

/// Half-Gaussian lower bound for `s << P << 6 pi^2 / (gamma^2 sigma^2 L^3)`:
///
/// `ln(P/s)/2 + ln(3 pi / (gamma^2 P sigma^2 L^3))/2 + (zeta - 1)/2 - F(s/2P, a1) - F(s/2P, a2)`
///
/// with `s = sigma^2 L`. Evaluated outside that range too; see
/// [`regime_classify`].
pub fn lb_medium(power: f64, params: &FiberParams) -> Result<f64> {
    check_power(power, params)?;
    let s = params.noise_power();
    let g = params.gamma;
    if g <= 0.0 {
        return Err(invalid("the medium-power bound needs gamma > 0"));
    }
    let l = params.length;
    let phase = 3.0 * PI / (g * g * power * params.sigma2 * l * l * l);
    Ok(0.5 * (power / s).ln() + 0.5 * phase.ln() + 0.5 * (ZETA - 1.0) - f_pair(power, params)?)
}

/// `ln((1 - 2/pi) P / s)/2 - 1/2`, the `lb_theorem1` bound at the half-Gaussian
/// input's effective power; meaningful when the phase carries nothing.
pub fn lb_high(power: f64, params: &FiberParams) -> Result<f64> {
    check_power(power, params)?;
    lb_theorem1(HALFGAUSSIAN_POWER_FACTOR * power / params.noise_power())
}

/// `h(R^2, Phi) = (3/2) ln pi + ln(2P + s) - zeta/2 + 1/2` for the
/// half-Gaussian input, from the large-argument output density
/// `exp(-r^2 / (2P + s)) / (pi sqrt(pi (2P + s)))`, `r >= 0`.
pub fn entropy_halfgaussian_output(power: f64, params: &FiberParams) -> Result<f64> {
    check_power(power, params)?;
    Ok(1.5 * PI.ln() + (2.0 * power + params.noise_power()).ln() - 0.5 * ZETA + 0.5)
}

/// Gaussian upper bound on `h(R^2, Phi | R0, Phi0)` for the half-Gaussian
/// input under the algebraic model:
///
/// `ln(P s) + ln(gamma L) + ln(2 pi e) - ln(3)/2 - ln 2 - zeta + F(s/2P, a1) + F(s/2P, a2)`.
pub fn cond_entropy_ub(power: f64, params: &FiberParams) -> Result<f64> {
    check_power(power, params)?;
    let s = params.noise_power();
    Ok((power * s).ln() + (params.gamma * params.length).ln() + (2.0 * PI * E).ln() - 0.5 * 3f64.ln() - 2f64.ln()
        - ZETA
        + f_pair(power, params)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// `P` not well above `s`: the amplitude channel is mostly off.
    LowSnr,
    /// `s << P` and the nonlinear phase noise is still small.
    MediumPower,
    /// `gamma^2 P sigma^2 L^3 >> 6 pi^2`: the phase carries no information.
    HighPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// `rho = P / sigma^2 L`.
    pub snr: f64,
    /// `gamma^2 P sigma^2 L^3 / (6 pi^2)`.
    pub phase_metric: f64,
    pub region: Region,
    /// `rho` above which the amplitude channel counts as on.
    pub snr_boundary: f64,
    /// `phase_metric` above which the phase channel counts as off.
    pub phase_boundary: f64,
    /// Set when the point lies between cutoffs, i.e. the region's defining
    /// `<<` / `>>` conditions do not both hold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Place `(P, sigma^2)` in the regime map. `>>` and `<<` are ratios beyond
/// [`MUCH_GREATER`] and [`MUCH_LESS`]. High power takes precedence, then
/// medium power (needs `rho > 10`); everything else is low SNR.
pub fn regime_classify(power: f64, params: &FiberParams) -> Result<RegimeReport> {
    check_power(power, params)?;
    let snr = params.snr(power);
    let l = params.length;
    let phase_metric = params.gamma.powi(2) * power * params.sigma2 * l * l * l / (6.0 * PI * PI);
    let (region, warning) = if phase_metric > MUCH_GREATER {
        (Region::HighPower, None)
    } else if snr > MUCH_GREATER {
        let warning = (phase_metric >= MUCH_LESS)
            .then(|| format!("phase metric {phase_metric:.3} is not << 1; medium-power bounds are approximate"));
        (Region::MediumPower, warning)
    } else {
        let warning = (snr >= MUCH_LESS).then(|| format!("SNR {snr:.3} lies between the low and medium regimes"));
        (Region::LowSnr, warning)
    };
    Ok(RegimeReport { snr, phase_metric, region, snr_boundary: MUCH_GREATER, phase_boundary: MUCH_GREATER, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use approx::assert_relative_eq;

    fn desk() -> FiberParams {
        FiberParams::new(1.27, 2.5e-5 / 5000.0, 5000.0).unwrap()
    }

    #[test]
    fn theorem1_values() {
        assert!(lb_theorem1(E).unwrap().abs() < 1e-15);
        assert_relative_eq!(lb_theorem1(E.powi(3)).unwrap(), 1.0, epsilon = 1e-15);
        assert!(lb_theorem1(0.0).is_err());
        assert!(lb_theorem1(-1.0).is_err());
    }

    #[test]
    fn constants() {
        assert_relative_eq!(ALPHA1 + ALPHA2, 1.0, epsilon = 1e-15);
        assert_relative_eq!(ALPHA1 * ALPHA2, 1.0 / 6.0, epsilon = 1e-15);
        assert!((HALFGAUSSIAN_POWER_FACTOR - 0.3634).abs() < 1e-4);
    }

    #[test]
    fn lb_medium_limit_without_f_terms() {
        let p = desk();
        // s / 2P = 1e-9.
        let power = p.noise_power() / 2e-9;
        let expected = 0.5 * (power / p.noise_power()).ln()
            + 0.5 * (3.0 * PI / (p.gamma.powi(2) * power * p.sigma2 * p.length.powi(3))).ln()
            + 0.5 * (ZETA - 1.0);
        let got = lb_medium(power, &p).unwrap();
        // F(x, a) ~ sqrt(pi) a sqrt(x) for small x.
        assert!((got - expected).abs() < 1e-4);
        assert!(got < expected);
    }

    #[test]
    fn lb_medium_two_dimensionality() {
        let p = desk();
        let power = 100.0 * p.noise_power();
        let g10 = FiberParams::new(10.0 * p.gamma, p.sigma2, p.length).unwrap();
        let d = lb_medium(power, &p).unwrap() - lb_medium(power, &g10).unwrap();
        assert_relative_eq!(d, 10f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn lb_high_below_theorem1() {
        let p = desk();
        for k in [1.0, 10.0, 100.0] {
            let power = k * p.noise_power();
            assert!(lb_high(power, &p).unwrap() < lb_theorem1(p.snr(power)).unwrap());
        }
    }

    #[test]
    fn output_entropy_matches_quadrature() {
        let p = desk();
        for power in [1e-4, 1e-3, 1e-2] {
            let v = 2.0 * power + p.noise_power();
            // Density of (u = r^2, phi): exp(-u/v) / (2 pi sqrt(pi v u)).
            let f = |u: f64| (-u / v).exp() / (2.0 * PI * (PI * v * u).sqrt());
            // u = v t^2 removes the integrable singularity at 0.
            let integrand = |t: f64| {
                if t == 0.0 {
                    return 0.0;
                }
                let u = v * t * t;
                let d = f(u);
                -2.0 * PI * d * d.ln() * 2.0 * v * t
            };
            let h = integrate(integrand, 0.0, 12.0, 1e-14, 1e-12).unwrap().value;
            let closed = entropy_halfgaussian_output(power, &p).unwrap();
            assert!((h - closed).abs() < 1e-4, "{h} vs {closed}");
        }
        assert!(entropy_halfgaussian_output(2e-3, &p).unwrap() > entropy_halfgaussian_output(1e-3, &p).unwrap());
    }

    #[test]
    fn bounds_are_smooth_over_a_sweep() {
        let p = desk();
        let powers: Vec<f64> = (0..50).map(|i| p.noise_power() * 10f64.powf(-1.0 + 4.0 * i as f64 / 49.0)).collect();
        for f in [lb_medium, lb_high, entropy_halfgaussian_output, cond_entropy_ub] {
            let v: Vec<f64> = powers.iter().map(|&x| f(x, &p).unwrap()).collect();
            assert!(v.iter().all(|x| x.is_finite()));
            // Steps in ln P are 4 ln10 / 49; every bound moves by at most ~1 per unit ln P.
            for w in v.windows(2) {
                assert!((w[1] - w[0]).abs() < 0.25);
            }
        }
    }

    #[test]
    fn regimes_by_cutoffs() {
        let p = desk();
        // rho = 100 and phase metric 1e-4: choose gamma to hit it.
        let power = 100.0 * p.noise_power();
        let g = (1e-4 * 6.0 * PI * PI / (power * p.sigma2 * p.length.powi(3))).sqrt();
        let q = FiberParams::new(g, p.sigma2, p.length).unwrap();
        let r = regime_classify(power, &q).unwrap();
        assert_eq!(r.region, Region::MediumPower);
        assert!(r.warning.is_none());
        assert_relative_eq!(r.phase_metric, 1e-4, epsilon = 1e-15);

        let g = (100.0 * 6.0 * PI * PI / (power * p.sigma2 * p.length.powi(3))).sqrt();
        let q = FiberParams::new(g, p.sigma2, p.length).unwrap();
        assert_eq!(regime_classify(power, &q).unwrap().region, Region::HighPower);

        let r = regime_classify(0.01 * p.noise_power(), &p).unwrap();
        assert_eq!(r.region, Region::LowSnr);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"region\":\"low-snr\""));
    }

    #[test]
    fn invalid_power_rejected() {
        assert!(lb_medium(0.0, &desk()).is_err());
        assert!(cond_entropy_ub(f64::NAN, &desk()).is_err());
    }
}
