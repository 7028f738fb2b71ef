//! The oracle-agreement suite behind `fibercap validate`.
//!
//! Every check compares a closed form against something computed
//! independently: quadrature, the PDE solver, or a sampler. A check passes
//! when `value < threshold`. With a fault injected, the analytic side is
//! evaluated at `(gamma (1 + eps), sigma2 (1 + eps))` while the oracles keep
//! the true parameters.

use super::pdf_mass;
use crate::capacity::{capacity_of, BaOptions, CapacityOptions, Symmetry};
use crate::channel::{amplitude_pdf, conditional_pdf, gaussian_polar_pdf, FiberParams, PolarSample, DEFAULT_PDF_TOL};
use crate::dmc::{amplitude_transition, joint_row, transition_closed_form, DmcConfig, RingGrid};
use crate::error::{invalid, Error, Result};
use crate::presets::{GridSpec, Preset};
use crate::samplers::{algebraic_sample, exact_path_sample, fokker_planck_amplitude, FpGrid, KlConfig, SimConfig};
use crate::special::{verify_identity_phase, verify_identity_product};
use crate::stats::{covariance, ks_one_sample, total_variation};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub const VALIDATE_SCHEMA: &str = "fibercap-validate/1";

const IDENTITY_DRAWS: usize = 50;
const IDENTITY_TOL: f64 = 1e-8;
const NORMALIZATION_TOL: f64 = 1e-6;
const GAUSSIAN_TOL: f64 = 1e-9;
/// Sup-norm tolerance, as a fraction of the density peak.
const AMPLITUDE_TOL: f64 = 0.01;
const KS_SAMPLES: usize = 100_000;
/// KS critical value coefficient at alpha = 1e-3.
const KS_ALPHA_COEF: f64 = 1.949;
const TV_SAMPLES: usize = 400_000;
const TV_STEPS: usize = 250;
/// Total variation allowed on top of the expected sampling noise.
const TV_TOL: f64 = 0.03;
const SCALE: f64 = 3.0;
const SCALING_MATRIX_TOL: f64 = 1e-12;
const SCALING_CAPACITY_TOL: f64 = 1e-9;
const COV_SAMPLES: usize = 100_000;
const COV_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value < threshold, value, threshold, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema: String,
    pub preset: String,
    pub params: FiberParams,
    pub grid: GridSpec,
    pub seed: u64,
    pub fault: Option<f64>,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn perturbed(p: &FiberParams, fault: Option<f64>) -> FiberParams {
    let k = 1.0 + fault.unwrap_or(0.0);
    FiberParams { gamma: p.gamma * k, sigma2: p.sigma2 * k, length: p.length }
}

fn identities(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase: f64 = 0.0;
    let mut product: f64 = 0.0;
    for _ in 0..IDENTITY_DRAWS {
        let (m, x, t0) = (rng.random_range(-6..=6), rng.random_range(0.0..8.0), rng.random_range(0.0..TAU));
        let (l, r) = verify_identity_phase(m, x, t0)?;
        phase = phase.max((l - r).norm() / r.norm().max(1.0));
        let (m, a) = (rng.random_range(0..=4u32), rng.random_range(0.5..3.0));
        let (b, c) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let (l, r) = verify_identity_product(m, a, b, c)?;
        product = product.max((l - r).abs() / r.abs().max(1.0));
    }
    Ok(vec![
        Check::new("identity-phase", phase, IDENTITY_TOL, format!("{IDENTITY_DRAWS} random draws, relative error")),
        Check::new("identity-product", product, IDENTITY_TOL, format!("{IDENTITY_DRAWS} random draws, relative error")),
    ])
}

fn gaussian_limit(r0: f64, model: &FiberParams, seed: u64) -> Result<Check> {
    let linear = FiberParams { gamma: 0.0, ..*model };
    let s = linear.noise_power();
    let input = PolarSample::new(r0, 0.0)?;
    let peak = 1.0 / (std::f64::consts::PI * s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let q = Complex64::new(r0, 0.0) + Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)) * s.sqrt();
        let out = PolarSample::from_complex(q);
        let f = conditional_pdf(out, input, &linear, DEFAULT_PDF_TOL)?;
        // Both are densities per dr dphi; compare as planar densities.
        let g = gaussian_polar_pdf(out, input, s);
        worst = worst.max((f - g).abs() / out.r.max(f64::MIN_POSITIVE) / peak);
    }
    Ok(Check::new("gaussian-limit", worst, GAUSSIAN_TOL, "gamma = 0 series vs circular Gaussian, relative to peak"))
}

/// CDF of the amplitude law by cumulative trapezoid on a fine grid.
fn amplitude_cdf(r0: f64, params: &FiberParams) -> Result<impl Fn(f64) -> f64> {
    let n = 20_000;
    let hi = r0 + 12.0 * params.noise_power().sqrt();
    let h = hi / n as f64;
    let f: Vec<f64> = (0..=n).map(|i| amplitude_pdf(i as f64 * h, r0, params)).collect::<Result<_>>()?;
    let mut cdf = vec![0.0; n + 1];
    for i in 1..=n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    Ok(move |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let x = r / h;
        let i = x.floor() as usize;
        if i >= n {
            return cdf[n];
        }
        let t = x - i as f64;
        cdf[i] * (1.0 - t) + cdf[i + 1] * t
    })
}

fn amplitude_checks(r0: f64, params: &FiberParams, model: &FiberParams, seed: u64) -> Result<Vec<Check>> {
    let fp = fokker_planck_amplitude(r0, params, &FpGrid::default())?;
    let exact: Vec<f64> = fp.r.iter().map(|&r| amplitude_pdf(r, r0, model)).collect::<Result<_>>()?;
    let peak = exact.iter().cloned().fold(0.0, f64::max);
    let sup = fp.density.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let cfg = SimConfig::new(64, seed, KS_SAMPLES)?;
    let q = exact_path_sample(Complex64::new(r0, 0.0), params, &cfg)?;
    let amps: Vec<f64> = q.iter().map(|z| z.norm()).collect();
    let ks = ks_one_sample(&amps, amplitude_cdf(r0, model)?)?;
    let crit = KS_ALPHA_COEF / (KS_SAMPLES as f64).sqrt();
    Ok(vec![
        Check::new("amplitude-fokker-planck", sup / peak, AMPLITUDE_TOL, "sup-norm of PDE minus closed form, relative to peak"),
        Check::new(
            "amplitude-monte-carlo",
            ks.statistic,
            crit,
            format!("KS statistic of {KS_SAMPLES} exact-path amplitudes, alpha = 1e-3 (p = {:.3e})", ks.p_value),
        ),
    ])
}

/// Total variation between a histogram of `points` and the closed-form
/// bin masses, and the tolerance `TV_TOL` plus the expected noise
/// `(1/2) sum_j sqrt(2 p_j (1 - p_j) / (pi n))`.
fn histogram_tv(points: &[Complex64], r0: f64, phi0: f64, grid: &RingGrid, model: &FiberParams) -> Result<(f64, f64)> {
    let row = joint_row(r0, phi0, grid, model, &DmcConfig::default())?;
    let mut counts = vec![0.0; grid.n_outputs()];
    for &q in points {
        counts[grid.output_index(q)] += 1.0;
    }
    let n = points.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    let tv = total_variation(&counts, &row.probs)?;
    let noise: f64 =
        0.5 * row.probs.iter().map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt()).sum::<f64>();
    Ok((tv, TV_TOL + noise))
}

fn pdf_vs_monte_carlo(r0: f64, grid: &RingGrid, params: &FiberParams, model: &FiberParams, seed: u64) -> Result<Check> {
    let cfg = SimConfig::new(TV_STEPS, seed, TV_SAMPLES)?;
    let q = exact_path_sample(Complex64::new(r0, 0.0), params, &cfg)?;
    let (tv, limit) = histogram_tv(&q, r0, 0.0, grid, model)?;
    Ok(Check::new(
        "pdf-monte-carlo",
        tv,
        limit,
        format!("total variation, {TV_SAMPLES} exact-path samples x {TV_STEPS} steps on the preset grid"),
    ))
}

fn scaling(preset: &Preset) -> Result<Vec<Check>> {
    let params = preset.params;
    let grid = preset.grid.build()?;
    let scaled_params = params.scaled(SCALE);
    let scaled_grid = grid.scaled(SCALE);
    let cfg = DmcConfig::default();
    let small = RingGrid::new(16, 16, grid.r_max(), crate::dmc::Spacing::Uniform)?;
    let a = transition_closed_form(&small, &params, &cfg)?.matrix;
    let b = transition_closed_form(&small.scaled(SCALE), &scaled_params, &cfg)?.matrix;
    let joint = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let a = amplitude_transition(&grid, &params, &cfg)?;
    let b = amplitude_transition(&scaled_grid, &scaled_params, &cfg)?;
    let amp = a.matrix.data.iter().zip(&b.matrix.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let opts = CapacityOptions { ba: BaOptions::default(), dmc: cfg, peak: None };
    let c0 = capacity_of(&a.matrix, &a.inputs, preset.power, Symmetry::None, &opts)?.capacity;
    let c1 = capacity_of(&b.matrix, &b.inputs, SCALE * SCALE * preset.power, Symmetry::None, &opts)?.capacity;
    Ok(vec![
        Check::new(
            "scaling-matrices",
            joint.max(amp),
            SCALING_MATRIX_TOL,
            format!("max entry difference under (q, v, gamma) -> ({SCALE} q, {SCALE} v, gamma / {SCALE}^2)"),
        ),
        Check::new("scaling-capacity", (c0 - c1).abs(), SCALING_CAPACITY_TOL, "amplitude capacity, nats"),
    ])
}

/// Covariance of `(R^2, Phi)` from the algebraic sampler against
/// `(gamma L)`-weighted `r0^2 P1 + P2`, where
/// `P1 = sigma2 L [[2, 1], [1, 2/3]]` (linear terms) and
/// `P2 = (sigma2 L)^2 [[1, 1/3], [1/3, 1/6]]` (quadratic terms).
fn algebraic_covariance(r0: f64, params: &FiberParams, model: &FiberParams, seed: u64) -> Result<Check> {
    let out = algebraic_sample(r0, 0.0, params, &KlConfig::default(), seed, COV_SAMPLES)?;
    let r2: Vec<f64> = out.iter().map(|o| o.r_sq).collect();
    let ph: Vec<f64> = out.iter().map(|o| o.phase_unwrapped).collect();
    let emp = [covariance(&r2, &r2), covariance(&r2, &ph), covariance(&ph, &ph)];
    let s = model.noise_power();
    let g = model.gamma * model.length;
    let (a, q) = (r0 * r0 * s, s * s);
    let theory = [2.0 * a + q, g * (a + q / 3.0), g * g * (2.0 * a / 3.0 + q / 6.0)];
    let scale = [theory[0], (theory[0] * theory[2]).sqrt(), theory[2]];
    let worst = (0..3).map(|i| (emp[i] - theory[i]).abs() / scale[i]).fold(0.0, f64::max);
    Ok(Check::new(
        "algebraic-covariance",
        worst,
        COV_TOL,
        format!("{COV_SAMPLES} KL samples; worst entry error relative to the diagonal scale"),
    ))
}

/// Read a `fibercap sample` CSV and its sidecar.
fn read_samples(path: &Path) -> Result<(Vec<Complex64>, FiberParams, GridSpec, f64, f64)> {
    let side = super::sidecar_path(path);
    let meta: serde_json::Value = serde_json::from_reader(BufReader::new(std::fs::File::open(&side)?))
        .map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
    let meta = &meta["meta"];
    let field = |k: &str| -> Result<serde_json::Value> {
        meta.get(k).cloned().ok_or_else(|| Error::Format(format!("sidecar lacks '{k}'")))
    };
    let fmt = |e: serde_json::Error| Error::Format(e.to_string());
    let params: FiberParams = serde_json::from_value(field("params")?).map_err(fmt)?;
    let grid: GridSpec = serde_json::from_value(field("grid")?).map_err(fmt)?;
    let input = field("input")?;
    let r0 = input["r0"].as_f64().ok_or_else(|| Error::Format("sidecar input.r0".into()))?;
    let phi0 = input["phi0"].as_f64().ok_or_else(|| Error::Format("sidecar input.phi0".into()))?;
    let mut points = Vec::new();
    for line in BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        if line.starts_with('#') || line.starts_with('r') || line.is_empty() {
            continue;
        }
        let (r, phi) = line.split_once(',').ok_or_else(|| Error::Format(format!("bad sample line '{line}'")))?;
        let r: f64 = r.parse().map_err(|_| Error::Format(format!("bad r in '{line}'")))?;
        let phi: f64 = phi.parse().map_err(|_| Error::Format(format!("bad phi in '{line}'")))?;
        points.push(Complex64::from_polar(r, phi));
    }
    if points.is_empty() {
        return Err(invalid(format!("{} holds no samples", path.display())));
    }
    Ok((points, params, grid, r0, phi0))
}

pub fn run_checks(preset: &Preset, fault: Option<f64>, samples: Option<&Path>) -> Result<ValidationReport> {
    let params = preset.params;
    let model = perturbed(&params, fault);
    let grid = preset.grid.build()?;
    let r0 = preset.power.sqrt();
    let seed = preset.seed;
    let mut checks = identities(seed)?;
    let mass = pdf_mass(r0, &model, DEFAULT_PDF_TOL)?;
    checks.push(Check::new("pdf-normalization", (1.0 - mass).abs(), NORMALIZATION_TOL, "integral over the plane"));
    checks.push(gaussian_limit(r0, &model, seed)?);
    checks.extend(amplitude_checks(r0, &params, &model, seed)?);
    checks.push(pdf_vs_monte_carlo(r0, &grid, &params, &model, seed)?);
    checks.extend(scaling(preset)?);
    checks.push(algebraic_covariance(r0, &params, &model, seed)?);
    if let Some(path) = samples {
        let (pts, p, g, r0, phi0) = read_samples(path)?;
        let (tv, limit) = histogram_tv(&pts, r0, phi0, &g.build()?, &perturbed(&p, fault))?;
        checks.push(Check::new("samples-file", tv, limit, format!("total variation of {} samples from {}", pts.len(), path.display())));
    }
    Ok(ValidationReport {
        schema: VALIDATE_SCHEMA.into(),
        preset: preset.name.clone(),
        params,
        grid: preset.grid,
        seed,
        fault,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
