use crate::error::{ensure_finite, invalid, numerical, Result};
use std::f64::consts::PI;

/// `erfi(x)` overflows `f64` beyond this magnitude.
const ERFI_MAX_ARG: f64 = 26.0;

/// Admissible range for [`hyp_1122`]. The series is entire, but for negative
/// arguments it alternates and cancellation costs roughly `|x| / ln 10`
/// digits; for large positive arguments the sum overflows near `x = 700`.
pub const HYP_1122_MIN_ARG: f64 = -20.0;
pub const HYP_1122_MAX_ARG: f64 = 690.0;

const MAX_TERMS: usize = 20_000;

/// Imaginary error function `erfi(x) = -i erf(ix) = (2/sqrt(pi)) sum x^(2k+1) / (k! (2k+1))`.
///
/// The Maclaurin series has positive terms only, so it is summed directly
/// with no cancellation. Note the series coefficients are
/// `2, 2/3, 1/5, 1/21, ...`; the `x^7` coefficient is `1/21`.
pub fn erfi(x: f64) -> Result<f64> {
    ensure_finite("erfi argument", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.abs() > ERFI_MAX_ARG {
        return Err(numerical(format!("erfi({x}) overflows f64")));
    }
    let x2 = x * x;
    // power = x^(2k+1) / k!
    let mut power = x;
    let mut sum = x;
    let mut small_run = 0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        power *= x2 / kf;
        let term = power / (2.0 * kf + 1.0);
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            small_run += 1;
            if small_run >= 3 {
                return Ok(2.0 / PI.sqrt() * sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(numerical(format!("erfi({x}) series did not converge")))
}

/// Generalised hypergeometric function `2F2(1, 1; 3/2, 2; x)`, summed with
/// `c_0 = 1` and `c_{k+1} / c_k = (k + 1) / ((k + 3/2)(k + 2))`.
pub fn hyp_1122(x: f64) -> Result<f64> {
    ensure_finite("hyp_1122 argument", x)?;
    if !(HYP_1122_MIN_ARG..=HYP_1122_MAX_ARG).contains(&x) {
        return Err(invalid(format!(
            "hyp_1122 argument {x} outside [{HYP_1122_MIN_ARG}, {HYP_1122_MAX_ARG}]"
        )));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut small_run = 0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        term *= x * (kf + 1.0) / ((kf + 1.5) * (kf + 2.0));
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(numerical(format!("hyp_1122({x}) did not converge")))
}

/// `F(x, a) = (pi/2) erfi(sqrt(a^2 x)) - a^2 x 2F2(1, 1; 3/2, 2; a^2 x)`.
///
/// With `y = a^2 x`, `F` is the excess `E[ln(R0^2 + 2 P y)] / 2 - E[ln R0^2] / 2`
/// for a half-Gaussian amplitude `R0` with `E R0^2 = P`.
pub fn f_aux(x: f64, alpha: f64) -> Result<f64> {
    ensure_finite("f_aux x", x)?;
    ensure_finite("f_aux alpha", alpha)?;
    if x < 0.0 {
        return Err(invalid(format!("f_aux requires x >= 0, got {x}")));
    }
    let y = alpha * alpha * x;
    if y == 0.0 {
        return Ok(0.0);
    }
    Ok(PI / 2.0 * erfi(y.sqrt())? - y * hyp_1122(y)?)
}
