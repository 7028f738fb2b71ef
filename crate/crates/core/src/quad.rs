//! Numerical quadrature: adaptive Gauss-Kronrod (7/15) and fixed
//! Gauss-Legendre rules.

// Nodes and weights are kept at their published precision.
#![allow(clippy::excessive_precision)]

use crate::error::{numerical, Result};
use num_complex::Complex64;
use std::collections::BinaryHeap;
use std::cmp::Ordering;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Values that the Kronrod rule can accumulate.
pub trait Integrand: Copy + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    fn zero() -> Self;
    fn scale(self, s: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

fn kronrod<T: Integrand>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc.scale(WGK[7]);
    let mut gauss = fc.scale(WG[3]);
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let s = f1 + f2;
        kron = kron + s.scale(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s.scale(WG[j / 2]);
        }
    }
    let value = kron.scale(half);
    let err = (kron - gauss).scale(half).magnitude();
    (value, err)
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: Integrand>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature<T>> {
    integrate_limited(&mut f, a, b, abs_tol, rel_tol, 2000)
}

pub fn integrate_limited<T: Integrand>(
    f: &mut impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Quadrature<T>> {
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            error: 0.0,
            intervals: 0,
        });
    }
    let (v, e) = kronrod(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    while total_err > abs_tol.max(rel_tol * total.magnitude()) {
        if heap.len() >= max_intervals {
            return Err(numerical(format!(
                "quadrature on [{a}, {b}] did not converge: error {total_err:.3e} after {} intervals",
                heap.len()
            )));
        }
        let seg = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1) = kronrod(f, seg.a, mid);
        let (v2, e2) = kronrod(f, mid, seg.b);
        total = total - seg.value + v1 + v2;
        total_err = total_err - seg.error + e1 + e2;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
    // Re-sum to shed the drift accumulated by the running updates.
    let mut value = T::zero();
    let mut error = 0.0;
    let intervals = heap.len();
    for seg in heap {
        value = value + seg.value;
        error += seg.error;
    }
    Ok(Quadrature { value, error, intervals })
}

/// Integrate over a list of consecutive breakpoints, summing the pieces.
pub fn integrate_piecewise(
    mut f: impl FnMut(f64) -> f64,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for w in points.windows(2) {
        total += integrate_limited(&mut f, w[0], w[1], abs_tol, rel_tol, 2000)?.value;
    }
    Ok(total)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm) / (x * x - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_kronrod_polynomial_and_gaussian() {
        let q = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(q.value, 64.0 / 6.0 - 4.0, max_relative = 1e-13);
        let q = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(q.value, std::f64::consts::PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn gauss_legendre_exact_for_low_degree() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-14);
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn non_convergence_reported() {
        let mut f = |x: f64| 1.0 / x.abs().sqrt().max(1e-300);
        let r = integrate_limited(&mut f, -1.0, 1.0, 1e-15, 1e-15, 8);
        assert!(r.is_err());
    }
}
