//! Ring-constellation quantisation of the channel into a discrete
//! memoryless channel (DMC).
//!
//! Outputs are `N` rings times `M` phase sectors plus one overflow bin that
//! collects everything outside the gridded annulus. Inputs are ring radii
//! at phase 0; by phase symmetry a different input phase `k dphi` only
//! shifts each row's sector index by `k`.

use crate::channel::{amplitude_pdf, pdf_harmonics, FiberParams, Harmonics, DEFAULT_PDF_TOL};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::quad::{gauss_legendre, integrate_piecewise};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_PI, TAU};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spacing {
    /// Equal steps in `r`.
    Uniform,
    /// Equal steps in `r^2`: every ring has the same area.
    SqrtUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingGrid {
    /// Ring boundaries, strictly increasing, `N + 1` entries.
    pub edges: Vec<f64>,
    /// Representative radius of each ring.
    pub centers: Vec<f64>,
    pub n_phases: usize,
}

impl RingGrid {
    pub fn new(n_rings: usize, n_phases: usize, r_max: f64, spacing: Spacing) -> Result<Self> {
        ensure_finite("r_max", r_max)?;
        if n_rings == 0 || n_phases == 0 || r_max <= 0.0 {
            return Err(invalid(format!(
                "grid needs n_rings, n_phases >= 1 and r_max > 0, got {n_rings}, {n_phases}, {r_max}"
            )));
        }
        let n = n_rings as f64;
        let edges: Vec<f64> = match spacing {
            Spacing::Uniform => (0..=n_rings).map(|i| r_max * i as f64 / n).collect(),
            Spacing::SqrtUniform => (0..=n_rings).map(|i| r_max * (i as f64 / n).sqrt()).collect(),
        };
        let centers = match spacing {
            Spacing::Uniform => edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            Spacing::SqrtUniform => edges
                .windows(2)
                .map(|w| (0.5 * (w[0] * w[0] + w[1] * w[1])).sqrt())
                .collect(),
        };
        Ok(Self { edges, centers, n_phases })
    }

    /// Uniform rings covering only the annulus `[r_lo, r_hi]`; output mass
    /// inside `r_lo` also goes to the overflow bin.
    pub fn band(n_rings: usize, n_phases: usize, r_lo: f64, r_hi: f64) -> Result<Self> {
        ensure_finite("r_lo", r_lo)?;
        ensure_finite("r_hi", r_hi)?;
        if r_lo < 0.0 || r_hi <= r_lo || n_rings == 0 || n_phases == 0 {
            return Err(invalid(format!("bad band grid [{r_lo}, {r_hi}] with {n_rings}x{n_phases}")));
        }
        let w = (r_hi - r_lo) / n_rings as f64;
        let edges: Vec<f64> = (0..=n_rings).map(|i| r_lo + w * i as f64).collect();
        let centers = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        Ok(Self { edges, centers, n_phases })
    }

    pub fn n_rings(&self) -> usize {
        self.centers.len()
    }

    /// `N M + 1`; the last output is the overflow bin.
    pub fn n_outputs(&self) -> usize {
        self.n_rings() * self.n_phases + 1
    }

    pub fn overflow_index(&self) -> usize {
        self.n_outputs() - 1
    }

    pub fn phase_step(&self) -> f64 {
        TAU / self.n_phases as f64
    }

    pub fn r_min(&self) -> f64 {
        self.edges[0]
    }

    pub fn r_max(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Area of one bin of ring `j`.
    pub fn bin_area(&self, j: usize) -> f64 {
        0.5 * (self.edges[j + 1].powi(2) - self.edges[j].powi(2)) * self.phase_step()
    }

    /// Sector `k` is centred on `k dphi`.
    pub fn sector(&self, phi: f64) -> usize {
        let x = (phi / self.phase_step() + 0.5).floor() as i64;
        x.rem_euclid(self.n_phases as i64) as usize
    }

    pub fn ring(&self, r: f64) -> Option<usize> {
        if r < self.r_min() || r >= self.r_max() {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= r) - 1)
    }

    /// Output index of a received sample.
    pub fn output_index(&self, q: Complex64) -> usize {
        match self.ring(q.norm()) {
            Some(j) => j * self.n_phases + self.sector(q.arg()),
            None => self.overflow_index(),
        }
    }

    /// The grid for the scaled channel `(lambda q, lambda v, gamma / lambda^2)`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            edges: self.edges.iter().map(|e| e * lambda).collect(),
            centers: self.centers.iter().map(|c| c * lambda).collect(),
            n_phases: self.n_phases,
        }
    }

    /// Input alphabet used by the DMC builders: zero followed by the ring
    /// centres.
    pub fn input_radii(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.centers.iter().copied()).collect()
    }
}

pub fn build_grid(n_rings: usize, n_phases: usize, r_max: f64, spacing: Spacing) -> Result<RingGrid> {
    RingGrid::new(n_rings, n_phases, r_max, spacing)
}

/// Row-stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"ZDTM";
const FORMAT_VERSION: u32 = 1;

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(invalid("transition matrix needs at least one row and column"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Largest `|row sum - 1|`; errors if any entry is negative or not finite.
    pub fn stochastic_error(&self) -> Result<f64> {
        if let Some(v) = self.data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(crate::error::numerical(format!("transition entry {v} is not a probability")));
        }
        Ok((0..self.rows)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max))
    }

    /// Binary layout: `b"ZDTM"`, `u32` version, `u64` rows, `u64` cols, then
    /// `rows * cols` `f64` values row-major; all little-endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a transition matrix file (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported matrix format version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let rows = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let cols = u64::from_le_bytes(b8) as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Probability masses on amplitude levels; the phase is uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub radii: Vec<f64>,
    pub probs: Vec<f64>,
}

impl InputDistribution {
    pub fn new(radii: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if radii.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: radii.len(), got: probs.len() });
        }
        if radii.is_empty() {
            return Err(invalid("input distribution needs at least one point"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("radii and probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { radii, probs })
    }

    pub fn uniform(radii: Vec<f64>) -> Result<Self> {
        let n = radii.len();
        Self::new(radii, vec![1.0 / n as f64; n])
    }

    pub fn average_power(&self) -> f64 {
        self.radii.iter().zip(&self.probs).map(|(r, p)| p * r * r).sum()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.radii.iter().map(|r| r * r).collect()
    }

    /// Number of points carrying more than `threshold` probability.
    pub fn support_size(&self, threshold: f64) -> usize {
        self.probs.iter().filter(|&&p| p > threshold).count()
    }

    /// Probability on the zero-amplitude point(s).
    pub fn zero_mass(&self) -> f64 {
        self.radii.iter().zip(&self.probs).filter(|(r, _)| **r == 0.0).map(|(_, p)| p).sum()
    }
}

/// Options for the closed-form builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmcConfig {
    /// Gauss-Legendre nodes per ring; 1 is the bin-centre rule.
    pub radial_nodes: usize,
    pub tol: f64,
}

impl Default for DmcConfig {
    fn default() -> Self {
        Self { radial_nodes: 1, tol: DEFAULT_PDF_TOL }
    }
}

/// One DMC row plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub probs: Vec<f64>,
    /// Negative series mass removed by clamping, relative to the row.
    pub clamped: f64,
    /// `(1 - overflow) - raw grid mass` before rescaling: the radial rule's
    /// discretisation error.
    pub deficit: f64,
    pub hit_cap: bool,
}

#[derive(Debug, Clone)]
pub struct DmcBuild {
    pub matrix: TransitionMatrix,
    pub inputs: Vec<f64>,
    pub max_clamped: f64,
    pub max_deficit: f64,
    pub warnings: Vec<String>,
}

impl DmcBuild {
    fn collect(rows: Vec<Row>, inputs: Vec<f64>) -> Result<Self> {
        let max_clamped = rows.iter().map(|r| r.clamped).fold(0.0, f64::max);
        let max_deficit = rows.iter().map(|r| r.deficit.abs()).fold(0.0, f64::max);
        let mut warnings = Vec::new();
        if max_clamped > 1e-4 {
            warnings.push(format!("series clamping removed up to {max_clamped:.2e} of a row's mass"));
        }
        if rows.iter().any(|r| r.hit_cap) {
            warnings.push("Fourier series hit the harmonic cap in some bins".into());
        }
        let matrix = TransitionMatrix::from_rows(rows.into_iter().map(|r| r.probs).collect())?;
        Ok(Self { matrix, inputs, max_clamped, max_deficit, warnings })
    }
}

/// Mass of `f_R(. | r0)` outside the gridded annulus.
fn overflow_mass(r0: f64, grid: &RingGrid, params: &FiberParams) -> Result<f64> {
    let sd = params.noise_power().sqrt();
    let (lo, hi) = (grid.r_min(), grid.r_max());
    let mut pts = vec![lo];
    for k in [-6.0, -2.0, 0.0, 2.0, 6.0] {
        let p = r0 + k * sd;
        if p > lo && p < hi {
            pts.push(p);
        }
    }
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let inside = integrate_piecewise(|r| amplitude_pdf(r, r0, params).unwrap_or(0.0), &pts, 1e-14, 1e-12)?;
    Ok((1.0 - inside).clamp(0.0, 1.0))
}

/// Masses of the `M` phase sectors at one radius, as radial densities, for
/// an input at phase `phi0`. Each harmonic is integrated exactly over the
/// sector and the sum is folded modulo `M`.
fn sector_masses(h: &Harmonics, n_phases: usize, phi0: f64) -> Vec<f64> {
    let m = n_phases;
    let dphi = TAU / m as f64;
    let mut folded = vec![Complex64::new(0.0, 0.0); m];
    for (order, c) in h.coeffs.iter().enumerate().skip(1) {
        let of = order as f64;
        let weight = 2.0 * (0.5 * of * dphi).sin() / of;
        folded[order % m] += c * Complex64::from_polar(weight, -of * phi0);
    }
    (0..m)
        .map(|k| {
            let mut s = h.coeffs[0].re * dphi;
            for (l, d) in folded.iter().enumerate() {
                if d.re != 0.0 || d.im != 0.0 {
                    s += (d * Complex64::from_polar(1.0, TAU * ((l * k) % m) as f64 / m as f64)).re;
                }
            }
            s * FRAC_1_PI
        })
        .collect()
}

fn radial_rule(grid: &RingGrid, nodes: usize) -> Vec<Vec<(f64, f64)>> {
    let (x, w) = gauss_legendre(nodes.max(1));
    (0..grid.n_rings())
        .map(|j| {
            let (a, b) = (grid.edges[j], grid.edges[j + 1]);
            if nodes <= 1 {
                return vec![(grid.centers[j], b - a)];
            }
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| (0.5 * (a + b) + 0.5 * (b - a) * xi, 0.5 * (b - a) * wi))
                .collect()
        })
        .collect()
}

/// Transition row for an input at `(r0, phi0)` into the joint grid.
pub fn joint_row(r0: f64, phi0: f64, grid: &RingGrid, params: &FiberParams, cfg: &DmcConfig) -> Result<Row> {
    let overflow = overflow_mass(r0, grid, params)?;
    let rule = radial_rule(grid, cfg.radial_nodes);
    let m = grid.n_phases;
    let mut probs = vec![0.0; grid.n_outputs()];
    let mut hit_cap = false;
    let mut negative = 0.0;
    for (j, nodes) in rule.iter().enumerate() {
        for &(r, w) in nodes {
            let h = pdf_harmonics(r, r0, params, cfg.tol)?;
            hit_cap |= h.hit_cap;
            for (k, v) in sector_masses(&h, m, phi0).into_iter().enumerate() {
                probs[j * m + k] += w * v;
            }
        }
    }
    for p in probs.iter_mut() {
        if *p < 0.0 {
            negative -= *p;
            *p = 0.0;
        }
    }
    finish_row(probs, overflow, negative, hit_cap)
}

fn finish_row(mut probs: Vec<f64>, overflow: f64, negative: f64, hit_cap: bool) -> Result<Row> {
    let n = probs.len();
    let raw: f64 = probs[..n - 1].iter().sum();
    let target = 1.0 - overflow;
    let deficit = target - raw;
    if raw > 0.0 {
        let scale = target / raw;
        probs[..n - 1].iter_mut().for_each(|p| *p *= scale);
        probs[n - 1] = overflow;
    } else {
        probs[..n - 1].iter_mut().for_each(|p| *p = 0.0);
        probs[n - 1] = 1.0;
    }
    let clamped = if raw > 0.0 { negative / raw } else { 0.0 };
    Ok(Row { probs, clamped, deficit, hit_cap })
}

/// Closed-form joint DMC: inputs are zero and the ring centres at phase 0,
/// outputs the `N M` bins plus overflow.
pub fn transition_closed_form(grid: &RingGrid, params: &FiberParams, cfg: &DmcConfig) -> Result<DmcBuild> {
    params.validate()?;
    let inputs = grid.input_radii();
    let rows = inputs
        .par_iter()
        .map(|&r0| joint_row(r0, 0.0, grid, params, cfg))
        .collect::<Result<Vec<_>>>()?;
    DmcBuild::collect(rows, inputs)
}

/// Amplitude-only row: ring masses of the Rician law plus overflow.
pub fn amplitude_row(r0: f64, grid: &RingGrid, params: &FiberParams, cfg: &DmcConfig) -> Result<Row> {
    let overflow = overflow_mass(r0, grid, params)?;
    let rule = radial_rule(grid, cfg.radial_nodes);
    let mut probs = vec![0.0; grid.n_rings() + 1];
    for (j, nodes) in rule.iter().enumerate() {
        for &(r, w) in nodes {
            probs[j] += w * amplitude_pdf(r, r0, params)?;
        }
    }
    finish_row(probs, overflow, 0.0, false)
}

/// Amplitude (IM/DD) DMC over the same input alphabet, `(N+1) x (N+1)`.
pub fn amplitude_transition(grid: &RingGrid, params: &FiberParams, cfg: &DmcConfig) -> Result<DmcBuild> {
    params.validate()?;
    let inputs = grid.input_radii();
    let rows = inputs
        .par_iter()
        .map(|&r0| amplitude_row(r0, grid, params, cfg))
        .collect::<Result<Vec<_>>>()?;
    DmcBuild::collect(rows, inputs)
}

/// Rows for arbitrary input radii (phase 0), in parallel.
pub fn joint_rows(radii: &[f64], grid: &RingGrid, params: &FiberParams, cfg: &DmcConfig) -> Result<TransitionMatrix> {
    let rows = radii
        .par_iter()
        .map(|&r0| joint_row(r0, 0.0, grid, params, cfg).map(|r| r.probs))
        .collect::<Result<Vec<_>>>()?;
    TransitionMatrix::from_rows(rows)
}

#[derive(Debug, Clone)]
pub struct PropagatorBuild {
    pub matrix: TransitionMatrix,
    pub inputs: Vec<f64>,
    /// Smallest ratio of the per-step noise standard deviation (per real
    /// dimension) to the ring width.
    pub span_bins: f64,
    /// Largest mass absorbed by the overflow bin over all rows.
    pub leakage: f64,
    pub warnings: Vec<String>,
}

/// End-to-end DMC as the `n_steps`-fold product of the incremental channel.
///
/// One incremental step maps a state at `q` to `CN(q e^{j eps gamma |q|^2}, sigma2 eps)`
/// with `eps = L / n_steps`; its sector masses are integrated exactly in
/// phase and with the configured radial rule. States are the grid bins
/// (represented by their centres) plus the absorbing overflow bin. The
/// kernel is rotation equivariant, so one kernel per ring suffices.
///
/// Accuracy requires the per-step noise to span several rings (reported as
/// `span_bins`); otherwise re-centring mass on bin centres after each step
/// distorts the diffusion.
pub fn transition_propagator(grid: &RingGrid, params: &FiberParams, n_steps: usize, cfg: &DmcConfig) -> Result<PropagatorBuild> {
    propagate_rows(&grid.input_radii(), grid, params, n_steps, cfg)
}

pub fn propagate_rows(
    radii: &[f64],
    grid: &RingGrid,
    params: &FiberParams,
    n_steps: usize,
    cfg: &DmcConfig,
) -> Result<PropagatorBuild> {
    params.validate()?;
    if n_steps == 0 {
        return Err(invalid("propagator needs n_steps >= 1"));
    }
    let eps = params.length / n_steps as f64;
    let step = FiberParams { gamma: 0.0, sigma2: params.sigma2, length: eps };
    let m = grid.n_phases;
    let n_bins = grid.n_rings() * m;
    let kick = |r: f64| params.gamma * r * r * eps;

    // Sparse kernel for a source at each ring centre, phase 0.
    let kernels: Vec<Vec<(usize, f64)>> = grid
        .centers
        .par_iter()
        .map(|&r| {
            let row = joint_row(r, kick(r), grid, &step, cfg)?;
            Ok(sparsify(&row.probs))
        })
        .collect::<Result<_>>()?;

    let width = grid.edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let span_bins = (0.5 * step.noise_power()).sqrt() / width;
    let rows = radii
        .par_iter()
        .map(|&r0| {
            let first = joint_row(r0, kick(r0), grid, &step, cfg)?.probs;
            let mut state = first;
            for _ in 1..n_steps {
                let mut next = vec![0.0; n_bins + 1];
                next[n_bins] = state[n_bins];
                for (src, &p) in state[..n_bins].iter().enumerate() {
                    if p < 1e-300 {
                        continue;
                    }
                    let (ring, shift) = (src / m, src % m);
                    for &(dst, k) in &kernels[ring] {
                        if dst == n_bins {
                            next[n_bins] += p * k;
                        } else {
                            let (dr, dk) = (dst / m, dst % m);
                            next[dr * m + (dk + shift) % m] += p * k;
                        }
                    }
                }
                state = next;
            }
            Ok(state)
        })
        .collect::<Result<Vec<_>>>()?;
    let leakage = rows.iter().map(|r| r[n_bins]).fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if span_bins < 3.0 {
        warnings.push(format!(
            "per-step noise spans only {span_bins:.2} rings (< 3); the product will under-diffuse"
        ));
    }
    if leakage > 1e-3 {
        warnings.push(format!("up to {leakage:.2e} of the mass leaked off the grid"));
    }
    Ok(PropagatorBuild {
        matrix: TransitionMatrix::from_rows(rows)?,
        inputs: radii.to_vec(),
        span_bins,
        leakage,
        warnings,
    })
}

fn sparsify(row: &[f64]) -> Vec<(usize, f64)> {
    let max = row.iter().cloned().fold(0.0, f64::max);
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-16 * max)
        .map(|(i, &v)| (i, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gaussian_polar_pdf, PolarSample};
    use crate::quad::integrate;

    fn desk() -> FiberParams {
        FiberParams::new(1.27, 2.5e-5 / 5000.0, 5000.0).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = build_grid(1, 1, 2.0, Spacing::Uniform).unwrap();
        assert_eq!(g.n_outputs(), 2);
        assert_eq!(g.centers, vec![1.0]);
        let g = build_grid(4, 8, 2.0, Spacing::Uniform).unwrap();
        assert_eq!(g.edges, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = build_grid(4, 8, 2.0, Spacing::SqrtUniform).unwrap();
        for j in 0..4 {
            assert!((g.bin_area(j) - g.bin_area(0)).abs() < 1e-14);
        }
        assert!(build_grid(0, 4, 1.0, Spacing::Uniform).is_err());
        assert!(build_grid(4, 4, -1.0, Spacing::Uniform).is_err());
        assert!(RingGrid::band(4, 4, 2.0, 1.0).is_err());
    }

    #[test]
    fn output_indexing() {
        let g = build_grid(4, 8, 2.0, Spacing::Uniform).unwrap();
        assert_eq!(g.output_index(Complex64::new(0.1, 0.0)), 0);
        assert_eq!(g.output_index(Complex64::from_polar(1.2, TAU / 8.0 * 3.0 + 0.1)), 2 * 8 + 3);
        assert_eq!(g.output_index(Complex64::from_polar(1.2, -0.1)), 2 * 8);
        assert_eq!(g.output_index(Complex64::new(5.0, 0.0)), g.overflow_index());
    }

    #[test]
    fn sector_masses_sum_to_amplitude_density() {
        let p = desk();
        let h = pdf_harmonics(0.021, 0.022, &p, 1e-12).unwrap();
        let s: f64 = sector_masses(&h, 16, 0.0).iter().sum();
        assert!((s - amplitude_pdf(0.021, 0.022, &p).unwrap()).abs() < 1e-10 * s);
        let direct = h.arc_mass(3.0 * TAU / 16.0, TAU / 16.0);
        assert!((sector_masses(&h, 16, 0.0)[3] - direct).abs() < 1e-10 * s);
    }

    #[test]
    fn rows_are_stochastic_and_cover_mass() {
        let p = desk();
        let power = 0.5e-3;
        let r_max = 5.0 * (p.noise_power() + power).sqrt();
        let g = build_grid(50, 64, r_max, Spacing::Uniform).unwrap();
        let build = transition_closed_form(&g, &p, &DmcConfig::default()).unwrap();
        assert!(build.matrix.stochastic_error().unwrap() < 1e-9);
        let r0 = power.sqrt();
        let row = joint_row(r0, 0.0, &g, &p, &DmcConfig::default()).unwrap();
        assert!(row.probs[g.overflow_index()] < 1e-6);
        assert!(build.max_clamped < 1e-6);
    }

    #[test]
    fn gaussian_case_matches_bin_quadrature() {
        let p = FiberParams::new(0.0, 2.5e-5 / 5000.0, 5000.0).unwrap();
        let g = build_grid(8, 8, 0.045, Spacing::Uniform).unwrap();
        let cfg = DmcConfig { radial_nodes: 6, tol: 1e-13 };
        let r0 = 0.02;
        let row = joint_row(r0, 0.0, &g, &p, &cfg).unwrap();
        let in0 = PolarSample::new(r0, 0.0).unwrap();
        let dphi = g.phase_step();
        for (j, k) in [(3, 0), (4, 1), (5, 7), (2, 4)] {
            let (a, b) = (g.edges[j], g.edges[j + 1]);
            let phi_c = k as f64 * dphi;
            let mass = integrate(
                |r| {
                    integrate(
                        |phi| gaussian_polar_pdf(PolarSample { r, phi }, in0, p.noise_power()),
                        phi_c - dphi / 2.0,
                        phi_c + dphi / 2.0,
                        1e-16,
                        1e-11,
                    )
                    .unwrap()
                    .value
                },
                a,
                b,
                1e-16,
                1e-10,
            )
            .unwrap()
            .value;
            let got = row.probs[j * 8 + k];
            assert!((got - mass).abs() < 1e-6 * mass.max(1e-3), "bin ({j},{k}): {got} vs {mass}");
        }
    }

    #[test]
    fn rotation_is_an_index_shift() {
        let p = desk();
        let g = build_grid(10, 12, 0.05, Spacing::Uniform).unwrap();
        let cfg = DmcConfig::default();
        let a = joint_row(0.022, 0.0, &g, &p, &cfg).unwrap().probs;
        for shift in [1usize, 5, 11] {
            let b = joint_row(0.022, shift as f64 * g.phase_step(), &g, &p, &cfg).unwrap().probs;
            for j in 0..10 {
                for k in 0..12 {
                    let x = a[j * 12 + k];
                    let y = b[j * 12 + (k + shift) % 12];
                    assert!((x - y).abs() < 1e-12, "shift {shift}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn amplitude_rows_are_phase_marginals() {
        let p = desk();
        let g = build_grid(20, 16, 0.05, Spacing::Uniform).unwrap();
        let cfg = DmcConfig::default();
        for r0 in [0.0, 0.015, 0.03] {
            let joint = joint_row(r0, 0.0, &g, &p, &cfg).unwrap().probs;
            let amp = amplitude_row(r0, &g, &p, &cfg).unwrap().probs;
            for j in 0..20 {
                let s: f64 = joint[j * 16..(j + 1) * 16].iter().sum();
                assert!((s - amp[j]).abs() < 1e-12);
            }
            assert_eq!(joint[g.overflow_index()], amp[20]);
        }
    }

    #[test]
    fn amplitude_dmc_is_gamma_free() {
        let g = build_grid(12, 1, 0.05, Spacing::Uniform).unwrap();
        let cfg = DmcConfig::default();
        let a = amplitude_transition(&g, &desk(), &cfg).unwrap().matrix;
        let b = amplitude_transition(&g, &FiberParams { gamma: 10.0, ..desk() }, &cfg).unwrap().matrix;
        assert_eq!(a, b);
        assert!(a.stochastic_error().unwrap() < 1e-12);
    }

    #[test]
    fn binary_round_trip_and_bad_magic() {
        let m = TransitionMatrix::from_rows(vec![vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 4 * 8);
        assert_eq!(TransitionMatrix::read_binary(buf.as_slice()).unwrap(), m);
        buf[0] = b'X';
        assert!(matches!(TransitionMatrix::read_binary(buf.as_slice()), Err(Error::Format(_))));
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }

    #[test]
    fn input_distribution_basics() {
        let d = InputDistribution::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.25, 0.25]).unwrap();
        assert_eq!(d.average_power(), 1.25);
        assert_eq!(d.zero_mass(), 0.5);
        assert_eq!(d.support_size(0.3), 1);
        assert!(InputDistribution::new(vec![1.0], vec![0.5]).is_err());
        assert!(InputDistribution::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn propagator_single_noiseless_step_rotates() {
        let p = FiberParams::new(1.27, 1e-14, 5000.0).unwrap();
        let g = build_grid(20, 32, 0.05, Spacing::Uniform).unwrap();
        let r0 = g.centers[8];
        let b = propagate_rows(&[r0], &g, &p, 1, &DmcConfig::default()).unwrap();
        let target = g.output_index(Complex64::from_polar(r0, p.rotation(r0)));
        assert!(b.matrix.get(0, target) > 0.999);
        assert!(!b.warnings.is_empty());
    }

    #[test]
    fn propagator_single_step_equals_closed_form_at_gamma_zero() {
        let p = FiberParams::new(0.0, 2.5e-5 / 5000.0, 5000.0).unwrap();
        let g = build_grid(16, 24, 0.045, Spacing::Uniform).unwrap();
        let cfg = DmcConfig::default();
        let a = propagate_rows(&[0.02], &g, &p, 1, &cfg).unwrap().matrix;
        let b = joint_rows(&[0.02], &g, &p, &cfg).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
