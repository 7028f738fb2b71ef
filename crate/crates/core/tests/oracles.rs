//! Cross-checks between independent computations of the same quantity.

use fibercap::bounds::cond_entropy_ub;
use fibercap::capacity::{
    amplitude_capacity, halfgaussian_distribution, halfgaussian_rate, joint_capacity, mutual_information,
    mutual_information_with, CapacityOptions, Symmetry,
};
use fibercap::channel::{conditional_pdf, PolarSample, DEFAULT_PDF_TOL};
use fibercap::dmc::{joint_row, propagate_rows, transition_closed_form, DmcConfig, RingGrid, Spacing, TransitionMatrix};
use fibercap::presets::Preset;
use fibercap::quad::integrate;
use fibercap::samplers::{algebraic_sample, exact_path_sample, split_step_sample, KlConfig, SimConfig};
use fibercap::special::{verify_identity_phase, verify_identity_product};
use fibercap::stats::{covariance, energy_test, knn_entropy, mean, total_variation};
use fibercap::FiberParams;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{SQRT_2, TAU};

fn desk() -> Preset {
    Preset::by_name("desk").unwrap()
}

fn plane(q: &[Complex64]) -> Vec<[f64; 2]> {
    q.iter().map(|z| [z.re, z.im]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bessel_identities_hold(m in -8i32..=8, x in 0.0f64..10.0, t0 in 0.0f64..TAU,
                              k in 0u32..=5, a in 0.3f64..3.0, b in 0.0f64..2.5, c in 0.0f64..2.5) {
        let (l, r) = verify_identity_phase(m, x, t0).unwrap();
        prop_assert!((l - r).norm() <= 1e-8 * r.norm().max(1.0));
        let (l, r) = verify_identity_product(k, a, b, c).unwrap();
        prop_assert!((l - r).abs() <= 1e-8 * r.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn conditional_pdf_integrates_to_one_over_phase_and_radius(r0 in 0.0f64..0.04) {
        let p = desk().params;
        let s = p.noise_power().sqrt();
        // Phase integral by trapezoid (exact for the truncated Fourier series).
        let n_phi = 128;
        let radial = |r: f64| -> f64 {
            (0..n_phi)
                .map(|k| {
                    let out = PolarSample { r, phi: TAU * k as f64 / n_phi as f64 };
                    conditional_pdf(out, PolarSample { r: r0, phi: 0.0 }, &p, DEFAULT_PDF_TOL).unwrap()
                })
                .sum::<f64>() * TAU / n_phi as f64
        };
        let lo = (r0 - 9.0 * s).max(0.0);
        let mass = integrate(radial, lo, r0 + 9.0 * s, 1e-8, 1e-7).unwrap().value;
        prop_assert!((mass - 1.0).abs() < 1e-5, "mass {}", mass);
    }
}

#[test]
fn split_step_and_exact_path_agree_in_law() {
    let p = desk();
    let q0 = Complex64::new(p.power.sqrt(), 0.0);
    let a = split_step_sample(q0, &p.params, &SimConfig::new(2000, 1, 1500).unwrap()).unwrap();
    let b = exact_path_sample(q0, &p.params, &SimConfig::new(250, 2, 1500).unwrap()).unwrap();
    let t = energy_test(&plane(&a), &plane(&b), 200, 1500, 3).unwrap();
    assert!(t.p_value > 1e-3, "energy test p = {}", t.p_value);
}

#[test]
fn energy_test_separates_wrong_rotation() {
    let p = desk();
    let q0 = Complex64::new(p.power.sqrt(), 0.0);
    let a = exact_path_sample(q0, &p.params, &SimConfig::new(250, 2, 1500).unwrap()).unwrap();
    let wrong = FiberParams { gamma: 1.1 * p.params.gamma, ..p.params };
    let b = exact_path_sample(q0, &wrong, &SimConfig::new(250, 4, 1500).unwrap()).unwrap();
    let t = energy_test(&plane(&a), &plane(&b), 200, 1500, 3).unwrap();
    assert!(t.p_value < 1e-2, "energy test p = {}", t.p_value);
}

#[test]
fn algebraic_with_linear_phase_matches_exact_path() {
    let p = desk();
    let r0 = p.power.sqrt();
    let kl = KlConfig { include_linear_phase: true, ..KlConfig::default() };
    let a: Vec<Complex64> = algebraic_sample(r0, 0.0, &p.params, &kl, 5, 1500)
        .unwrap()
        .iter()
        .map(|o| Complex64::from_polar(o.r_sq.sqrt(), o.phi))
        .collect();
    let b = exact_path_sample(Complex64::new(r0, 0.0), &p.params, &SimConfig::new(250, 6, 1500).unwrap()).unwrap();
    let t = energy_test(&plane(&a), &plane(&b), 200, 1500, 7).unwrap();
    assert!(t.p_value > 1e-3, "energy test p = {}", t.p_value);
}

#[test]
fn closed_form_row_matches_exact_path_histogram() {
    let p = desk();
    let grid = RingGrid::new(24, 32, p.grid.r_max, Spacing::Uniform).unwrap();
    let r0 = p.power.sqrt();
    let row = joint_row(r0, 0.0, &grid, &p.params, &DmcConfig::default()).unwrap();
    let n = 100_000;
    let q = exact_path_sample(Complex64::new(r0, 0.0), &p.params, &SimConfig::new(250, 8, n).unwrap()).unwrap();
    let mut hist = vec![0.0; grid.n_outputs()];
    for z in &q {
        hist[grid.output_index(*z)] += 1.0 / n as f64;
    }
    let tv = total_variation(&hist, &row.probs).unwrap();
    assert!(tv < 0.03, "TV {tv}");
}

/// With per-step noise spanning three rings and weak nonlinearity the
/// product of incremental channels reproduces the closed form.
#[test]
fn propagator_matches_closed_form_when_steps_span_rings() {
    let s: f64 = 2.5e-5;
    let p = FiberParams::new(0.2, s / 5000.0, 5000.0).unwrap();
    let r0 = 0.015;
    let grid = RingGrid::new(80, 96, r0 + 7.0 * s.sqrt(), Spacing::Uniform).unwrap();
    let cfg = DmcConfig::default();
    let b = propagate_rows(&[r0], &grid, &p, 3, &cfg).unwrap();
    assert!(b.span_bins >= 3.0 && b.warnings.is_empty(), "{:?}", b.warnings);
    let exact = joint_row(r0, 0.0, &grid, &p, &cfg).unwrap();
    let tv = total_variation(b.matrix.row(0), &exact.probs).unwrap();
    assert!(tv < 0.035, "TV {tv}");
}

#[test]
fn capacity_is_stable_under_grid_refinement() {
    let p = desk();
    let opts = CapacityOptions::default();
    let coarse = RingGrid::new(40, 64, p.grid.r_max, Spacing::Uniform).unwrap();
    let fine = RingGrid::new(64, 96, p.grid.r_max, Spacing::Uniform).unwrap();
    let c1 = joint_capacity(&p.params, &coarse, p.power, &opts).unwrap().capacity;
    let c2 = joint_capacity(&p.params, &fine, p.power, &opts).unwrap().capacity;
    assert!((c1 - c2).abs() < 0.05, "{c1} vs {c2}");

    let g = p.grid.build().unwrap();
    let a1 = amplitude_capacity(&p.params, &g, p.power, &opts).unwrap().capacity;
    let gl = CapacityOptions { dmc: DmcConfig { radial_nodes: 4, ..DmcConfig::default() }, ..opts };
    let a4 = amplitude_capacity(&p.params, &g, p.power, &gl).unwrap().capacity;
    assert!((a1 - a4).abs() < 0.01, "{a1} vs {a4}");
}

/// Expand ring inputs into (ring, phase shift) inputs with uniform shifts.
fn expand(t: &TransitionMatrix, m: usize) -> TransitionMatrix {
    let n_bins = t.cols - 1;
    let mut rows = Vec::new();
    for i in 0..t.rows {
        for a in 0..m {
            let mut row = vec![0.0; t.cols];
            for b in 0..n_bins {
                let (j, k) = (b / m, b % m);
                row[j * m + (k + a) % m] = t.get(i, b);
            }
            row[n_bins] = t.get(i, n_bins);
            rows.push(row);
        }
    }
    TransitionMatrix::from_rows(rows).unwrap()
}

fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.ln()).sum()
}

#[test]
fn half_gaussian_rate_obeys_the_chain_rule() {
    let p = desk();
    let m = 8;
    let grid = RingGrid::new(12, m, p.grid.r_max, Spacing::Uniform).unwrap();
    let t = transition_closed_form(&grid, &p.params, &DmcConfig::default()).unwrap().matrix;
    let probs = halfgaussian_distribution(&grid, p.power).unwrap().probs;
    let folded = mutual_information_with(&t, &probs, Symmetry::UniformPhase { n_phases: m }).unwrap();

    let big = expand(&t, m);
    let px: Vec<f64> = probs.iter().flat_map(|&q| std::iter::repeat_n(q / m as f64, m)).collect();
    let brute = mutual_information(&big, &px).unwrap();
    assert!((folded - brute).abs() < 1e-10, "{folded} vs {brute}");
    let rate = halfgaussian_rate(p.power, &p.params, &grid, &DmcConfig::default()).unwrap();
    assert!((rate - folded).abs() < 1e-10);

    // I(X; R, Phi) = I(X; R) + I(X; Phi | R), with the overflow bin as its
    // own value of R.
    let n_rings = grid.n_rings();
    let ring_of = |b: usize| if b == big.cols - 1 { n_rings } else { b / m };
    let mut xr = vec![0.0; big.rows * (n_rings + 1)];
    for x in 0..big.rows {
        for b in 0..big.cols {
            xr[x * (n_rings + 1) + ring_of(b)] += px[x] * big.get(x, b);
        }
    }
    let amp_rows: Vec<Vec<f64>> =
        (0..big.rows).map(|x| xr[x * (n_rings + 1)..(x + 1) * (n_rings + 1)].iter().map(|v| v / px[x]).collect()).collect();
    let i_amp = mutual_information(&TransitionMatrix::from_rows(amp_rows).unwrap(), &px).unwrap();
    let joint = (0..big.rows).flat_map(|x| (0..big.cols).map(move |b| (x, b)));
    let h_xrphi = entropy(joint.map(|(x, b)| px[x] * big.get(x, b)));
    let h_xr = entropy(xr.iter().copied());
    let q: Vec<f64> = (0..big.cols).map(|b| (0..big.rows).map(|x| px[x] * big.get(x, b)).sum()).collect();
    let h_rphi = entropy(q.iter().copied());
    let mut qr = vec![0.0; n_rings + 1];
    for (b, v) in q.iter().enumerate() {
        qr[ring_of(b)] += v;
    }
    let i_phase_given_r = h_xr + h_rphi - entropy(qr) - h_xrphi;
    assert!((i_amp + i_phase_given_r - folded).abs() < 1e-10);
    assert!(i_phase_given_r >= -1e-12);
}

/// Gaussian bound on `h(R^2, Phi | R0, Phi0)` against a nearest-neighbour
/// estimate from the algebraic sampler, averaged over half-Gaussian `R0`.
#[test]
fn conditional_entropy_bound_holds() {
    let p = desk().params;
    for power in [2.5e-4, 1e-3] {
        let ub = cond_entropy_ub(power, &p).unwrap();
        let k = 16;
        let mut h = 0.0;
        for i in 0..k {
            // Half-Gaussian quantiles: R0 = sqrt(P) |N|.
            let u = (i as f64 + 0.5) / k as f64;
            let r0 = power.sqrt() * SQRT_2 * statrs::function::erf::erf_inv(u);
            let out = algebraic_sample(r0, 0.0, &p, &KlConfig::default(), 100 + i as u64, 2000).unwrap();
            let x: Vec<f64> = out.iter().map(|o| o.r_sq).collect();
            let y: Vec<f64> = out.iter().map(|o| o.phase_unwrapped).collect();
            // Whiten first: the two coordinates differ in scale by ~1e3,
            // which biases the estimator badly.
            let l11 = covariance(&x, &x).sqrt();
            let l21 = covariance(&x, &y) / l11;
            let l22 = (covariance(&y, &y) - l21 * l21).sqrt();
            let (mx, my) = (mean(&x), mean(&y));
            let pts: Vec<[f64; 2]> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| {
                    let u = (a - mx) / l11;
                    [u, ((b - my) - l21 * u) / l22]
                })
                .collect();
            h += (knn_entropy(&pts, 3).unwrap() + (l11 * l22).ln()) / k as f64;
        }
        assert!(h <= ub + 0.02, "P = {power}: estimate {h} above bound {ub}");
        assert!(ub - h < 0.5, "P = {power}: bound {ub} is loose against {h}");
    }
}
