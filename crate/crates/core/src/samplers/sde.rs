use super::{complex_normal, par_batch, SimConfig};
use crate::channel::FiberParams;
use crate::error::{numerical, Result};
use num_complex::Complex64;

/// Nonlinear phase rotation per step, `gamma |q0|^2 L / n`. Euler stepping
/// is accurate when this is well below 1e-2.
pub fn split_step_stability(q0: Complex64, params: &FiberParams, cfg: &SimConfig) -> f64 {
    params.gamma * q0.norm_sqr() * params.length / cfg.n_steps as f64
}

/// Ito-Euler recursion `Q_{k+1} = Q_k + j eps gamma |Q_k|^2 Q_k + sqrt(eps) V_k`,
/// `eps = L / n`, `V_k ~ CN(0, sigma2)`.
pub fn split_step_sample(q0: Complex64, params: &FiberParams, cfg: &SimConfig) -> Result<Vec<Complex64>> {
    params.validate()?;
    cfg.validate()?;
    let eps = params.length / cfg.n_steps as f64;
    let kick = eps * params.gamma;
    let step_var = params.sigma2 * eps;
    par_batch(cfg.seed, cfg.batch, |rng| {
        let mut q = q0;
        for k in 0..cfg.n_steps {
            let rot = Complex64::new(0.0, kick * q.norm_sqr());
            q += rot * q + complex_normal(rng, step_var);
            if !q.re.is_finite() || !q.im.is_finite() {
                return Err(numerical(format!("split-step trajectory diverged at step {k}")));
            }
        }
        Ok(q)
    })
}

/// `(q0 + W(L)) exp(j gamma sum_k |q0 + W(z_k)|^2 eps)` on a simulated Wiener
/// path, left Riemann sum for the phase integral.
pub fn exact_path_sample(q0: Complex64, params: &FiberParams, cfg: &SimConfig) -> Result<Vec<Complex64>> {
    params.validate()?;
    cfg.validate()?;
    let eps = params.length / cfg.n_steps as f64;
    let step_var = params.sigma2 * eps;
    par_batch(cfg.seed, cfg.batch, |rng| {
        let mut w = Complex64::new(0.0, 0.0);
        let mut energy = 0.0;
        for _ in 0..cfg.n_steps {
            energy += (q0 + w).norm_sqr();
            w += complex_normal(rng, step_var);
        }
        let out = (q0 + w) * Complex64::from_polar(1.0, params.gamma * energy * eps);
        if !out.re.is_finite() || !out.im.is_finite() {
            return Err(numerical("exact-path sample is not finite"));
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> FiberParams {
        FiberParams::new(1.27, 1e-300, 5000.0).unwrap()
    }

    #[test]
    fn noiseless_exact_path_is_the_rotation() {
        let q0 = Complex64::new(0.015, 0.012);
        let p = quiet();
        let cfg = SimConfig::new(100, 1, 4).unwrap();
        let expected = q0 * Complex64::from_polar(1.0, p.gamma * q0.norm_sqr() * p.length);
        for q in exact_path_sample(q0, &p, &cfg).unwrap() {
            assert!((q - expected).norm() < 1e-13 * q0.norm());
        }
    }

    #[test]
    fn noiseless_split_step_converges_first_order() {
        let q0 = Complex64::new(0.02, 0.0);
        let p = quiet();
        let expected = q0 * Complex64::from_polar(1.0, p.gamma * q0.norm_sqr() * p.length);
        let err = |n| {
            let cfg = SimConfig::new(n, 1, 1).unwrap();
            (split_step_sample(q0, &p, &cfg).unwrap()[0] - expected).norm()
        };
        let (e1, e2) = (err(2000), err(4000));
        assert!(e1 < 5e-3 * q0.norm(), "e1 = {e1}");
        let ratio = e1 / e2;
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gamma_zero_paths_coincide() {
        let p = FiberParams::new(0.0, 1e-8, 5000.0).unwrap();
        let cfg = SimConfig::new(50, 9, 100).unwrap();
        let q0 = Complex64::new(0.01, -0.003);
        let a = split_step_sample(q0, &p, &cfg).unwrap();
        let b = exact_path_sample(q0, &p, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn divergence_reported() {
        let p = FiberParams::new(1e6, 1e-8, 5000.0).unwrap();
        let cfg = SimConfig::new(10, 1, 1).unwrap();
        let r = split_step_sample(Complex64::new(1.0, 0.0), &p, &cfg);
        assert!(r.is_err());
    }
}
