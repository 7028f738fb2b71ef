use crate::channel::{amplitude_pdf, FiberParams};
use crate::error::{ensure_finite, invalid, numerical, Result};
use crate::quad::gauss_legendre;
use serde::{Deserialize, Serialize};

/// Radial grid and stepping for [`fokker_planck_amplitude`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpGrid {
    pub n_cells: usize,
    /// Outer boundary; defaults to `r0 + 8 sqrt(sigma2 L)`.
    pub r_max: Option<f64>,
    pub n_z_steps: usize,
}

impl Default for FpGrid {
    fn default() -> Self {
        Self { n_cells: 1500, r_max: None, n_z_steps: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpSolution {
    /// Cell centers.
    pub r: Vec<f64>,
    pub dr: f64,
    /// Cell-averaged amplitude density at `z = L`.
    pub density: Vec<f64>,
    /// Distance at which the initial blob is placed.
    pub z0: f64,
    /// `int f dr` after every step (initial value first).
    pub mass: Vec<f64>,
}

/// Integrate the amplitude equation
/// `df/dz = (sigma2/4) d2f/dr2 - (sigma2/4) d/dr (f/r)` to `z = L`.
///
/// The equation is discretised in conservative form, with flux
/// `J = -(sigma2/4) r d(f/r)/dr`, zero flux at `r = 0` and zero density
/// beyond `r_max`. Time stepping is Crank-Nicolson after four half-size
/// backward-Euler steps that damp the non-smooth start.
///
/// A delta at `r0` cannot be represented, so the solver starts from the
/// exact law of a Gaussian blob of width `w = 3 dr` about `r0`, which is
/// the channel state at `z0 = 2 w^2 / sigma2`, and integrates from there.
pub fn fokker_planck_amplitude(r0: f64, params: &FiberParams, grid: &FpGrid) -> Result<FpSolution> {
    ensure_finite("r0", r0)?;
    params.validate()?;
    if r0 < 0.0 {
        return Err(invalid(format!("r0 must be >= 0, got {r0}")));
    }
    if grid.n_cells < 10 || grid.n_z_steps < 4 {
        return Err(invalid("Fokker-Planck grid needs >= 10 cells and >= 4 steps"));
    }
    let s = params.noise_power();
    let r_max = grid.r_max.unwrap_or(r0 + 8.0 * s.sqrt());
    ensure_finite("r_max", r_max)?;
    if r_max <= r0 {
        return Err(invalid(format!("r_max = {r_max} must exceed r0 = {r0}")));
    }
    let n = grid.n_cells;
    let dr = r_max / n as f64;
    let w = 3.0 * dr;
    let z0 = 2.0 * w * w / params.sigma2;
    if z0 >= params.length {
        return Err(numerical(format!(
            "grid too coarse: initial blob width {w:.3e} already exceeds the noise at z = L"
        )));
    }
    let r: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dr).collect();

    let blob = FiberParams { gamma: 0.0, sigma2: params.sigma2, length: z0 };
    let (xg, wg) = gauss_legendre(4);
    let mut f = Vec::with_capacity(n);
    for &rc in &r {
        let mut avg = 0.0;
        for (x, wt) in xg.iter().zip(&wg) {
            avg += 0.5 * wt * amplitude_pdf(rc + 0.5 * dr * x, r0, &blob)?;
        }
        f.push(avg);
    }
    let m0: f64 = f.iter().sum::<f64>() * dr;
    f.iter_mut().for_each(|v| *v /= m0);

    // Operator A as three diagonals acting on f.
    let c = params.sigma2 / (4.0 * dr * dr);
    let face = |i: usize| (i + 1) as f64 * dr; // face between cells i and i+1
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { face(i - 1) };
        let right = face(i);
        diag[i] = -c * (left + right) / r[i];
        if i > 0 {
            lower[i] = c * left / r[i - 1];
        }
        if i + 1 < n {
            upper[i] = c * right / r[i + 1];
        }
    }

    let dz = (params.length - z0) / grid.n_z_steps as f64;
    let mut mass = vec![1.0];
    let mut rhs = vec![0.0; n];
    let mut step = |f: &mut Vec<f64>, h: f64, theta: f64| -> Result<()> {
        let e = (1.0 - theta) * h;
        for i in 0..n {
            let mut v = f[i] + e * diag[i] * f[i];
            if i > 0 {
                v += e * lower[i] * f[i - 1];
            }
            if i + 1 < n {
                v += e * upper[i] * f[i + 1];
            }
            rhs[i] = v;
        }
        let t = theta * h;
        thomas(
            |i| -t * lower[i],
            |i| 1.0 - t * diag[i],
            |i| -t * upper[i],
            &rhs,
            f,
        )
    };
    for _ in 0..4 {
        step(&mut f, 0.5 * dz, 1.0)?;
        mass.push(f.iter().sum::<f64>() * dr);
    }
    for _ in 2..grid.n_z_steps {
        step(&mut f, dz, 0.5)?;
        mass.push(f.iter().sum::<f64>() * dr);
    }
    if mass.iter().any(|m| !m.is_finite()) {
        return Err(numerical("Fokker-Planck solution became non-finite"));
    }
    Ok(FpSolution { r, dr, density: f, z0, mass })
}

/// Solve a tridiagonal system; `a`, `b`, `c` give the sub-, main and
/// super-diagonal entries of row `i`.
fn thomas(
    a: impl Fn(usize) -> f64,
    b: impl Fn(usize) -> f64,
    c: impl Fn(usize) -> f64,
    d: &[f64],
    x: &mut [f64],
) -> Result<()> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = b(0);
    for i in 0..n {
        if i > 0 {
            denom = b(i) - a(i) * cp[i - 1];
        }
        if denom.abs() < 1e-300 {
            return Err(numerical(format!("tridiagonal solve hit a zero pivot at row {i}")));
        }
        cp[i] = c(i) / denom;
        dp[i] = (d[i] - if i > 0 { a(i) * dp[i - 1] } else { 0.0 }) / denom;
    }
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> FiberParams {
        FiberParams::new(1.27, 2.5e-5 / 5000.0, 5000.0).unwrap()
    }

    #[test]
    fn thomas_solves_small_system() {
        // [[2,1,0],[1,3,1],[0,1,2]] x = [3,5,3] -> x = [1,1,1]
        let a = [0.0, 1.0, 1.0];
        let b = [2.0, 3.0, 2.0];
        let c = [1.0, 1.0, 0.0];
        let mut x = [0.0; 3];
        thomas(|i| a[i], |i| b[i], |i| c[i], &[3.0, 5.0, 3.0], &mut x).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_rician_and_conserves_mass() {
        let p = desk();
        let r0 = 0.5e-3f64.sqrt();
        let sol = fokker_planck_amplitude(r0, &p, &FpGrid::default()).unwrap();
        for m in &sol.mass {
            assert!((m - 1.0).abs() < 1e-6, "mass {m}");
        }
        let exact: Vec<f64> = sol.r.iter().map(|&r| amplitude_pdf(r, r0, &p).unwrap()).collect();
        let peak = exact.iter().cloned().fold(0.0, f64::max);
        let sup = sol.density.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(sup < 0.01 * peak, "sup error {sup} vs peak {peak}");
    }

    #[test]
    fn rayleigh_from_origin() {
        let p = desk();
        let sol = fokker_planck_amplitude(0.0, &p, &FpGrid::default()).unwrap();
        let peak = amplitude_pdf((p.noise_power() / 2.0).sqrt(), 0.0, &p).unwrap();
        for (r, f) in sol.r.iter().zip(&sol.density) {
            assert!((f - amplitude_pdf(*r, 0.0, &p).unwrap()).abs() < 0.01 * peak);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = desk();
        let g = FpGrid { n_cells: 10, r_max: Some(1.0), n_z_steps: 10 };
        assert!(fokker_planck_amplitude(0.02, &p, &g).is_err());
    }
}
