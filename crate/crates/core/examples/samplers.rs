//! The three Monte Carlo oracles side by side: split-step (Euler-Maruyama),
//! exact-path (exact rotation per step) and the algebraic KL model.

use fibercap::presets::Preset;
use fibercap::samplers::{algebraic_sample, exact_path_sample, split_step_sample, split_step_stability, KlConfig, SimConfig};
use num_complex::Complex64;

fn summary(name: &str, q: &[Complex64]) {
    let n = q.len() as f64;
    let r2 = q.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    let mean = q.iter().sum::<Complex64>() / n;
    println!("{name:>11}: E|Q|^2 = {r2:.4e}, E Q = {:.4e} at angle {:.3}", mean.norm(), mean.arg());
}

fn main() -> fibercap::Result<()> {
    let p = Preset::by_name("desk")?;
    let q0 = Complex64::new(p.power.sqrt(), 0.0);
    let cfg = SimConfig::new(2000, p.seed, 20_000)?;
    println!("split-step stability metric gamma |q|^2 eps = {:.2e}", split_step_stability(q0, &p.params, &cfg));
    println!("expected E|Q|^2 = P + sigma2 L = {:.4e}", p.power + p.params.noise_power());

    summary("split-step", &split_step_sample(q0, &p.params, &cfg)?);
    summary("exact-path", &exact_path_sample(q0, &p.params, &SimConfig { n_steps: 250, ..cfg })?);
    let kl = KlConfig { include_linear_phase: true, ..KlConfig::default() };
    let alg: Vec<Complex64> = algebraic_sample(q0.re, 0.0, &p.params, &kl, p.seed, cfg.batch)?
        .iter()
        .map(|o| Complex64::from_polar(o.r_sq.sqrt(), o.phi))
        .collect();
    summary("algebraic", &alg);
    Ok(())
}
