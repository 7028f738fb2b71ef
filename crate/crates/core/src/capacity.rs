//! Mutual information and power-constrained capacity of the gridded channel.

use crate::channel::{halfgaussian_input_pdf, FiberParams};
use crate::dmc::{
    amplitude_row, amplitude_transition, joint_row, joint_rows, transition_closed_form, DmcConfig, InputDistribution, RingGrid,
    TransitionMatrix,
};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::quad::integrate;
use serde::{Deserialize, Serialize};
use std::borrow::Cow;

/// Symmetry imposed on the output law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    #[default]
    None,
    /// Columns are ring-major blocks of `n_phases` sectors plus a trailing
    /// overflow column, and each row stands for its whole orbit under
    /// rotation by the sector step: the input phase is uniform over the
    /// sector angles, so the output law is uniform across each ring.
    UniformPhase { n_phases: usize },
}

impl Symmetry {
    fn check(self, cols: usize) -> Result<()> {
        match self {
            Self::UniformPhase { n_phases } if n_phases == 0 || !(cols - 1).is_multiple_of(n_phases) => Err(invalid(format!(
                "{cols} columns are not rings of {n_phases} sectors plus an overflow bin"
            ))),
            _ => Ok(()),
        }
    }
}

/// The channel in the form the solver works on: `D_i = offset_i - sum_j a_ij ln q_j`
/// with `q = p^T a`.
///
/// Without symmetry `a = T` and `offset_i = sum_j t_ij ln t_ij`. Under
/// uniform phase the output law is flat across each ring, so only ring sums
/// enter the cross term: `a` is `T` folded over sectors and the `ln M` per
/// unit of ring mass moves into the offset. Exact, and `M` times cheaper.
struct Reduced<'a> {
    a: Cow<'a, TransitionMatrix>,
    offset: Vec<f64>,
}

fn reduce(t: &TransitionMatrix, sym: Symmetry) -> Result<Reduced<'_>> {
    sym.check(t.cols)?;
    let neg_h = (0..t.rows).map(|i| t.row(i).iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>());
    Ok(match sym {
        Symmetry::None => Reduced { a: Cow::Borrowed(t), offset: neg_h.collect() },
        Symmetry::UniformPhase { n_phases } => {
            let ln_m = (n_phases as f64).ln();
            let rows: Vec<Vec<f64>> = (0..t.rows)
                .map(|i| {
                    let (rings, over) = t.row(i).split_at(t.cols - 1);
                    let mut folded: Vec<f64> = rings.chunks(n_phases).map(|c| c.iter().sum()).collect();
                    folded.push(over[0]);
                    folded
                })
                .collect();
            let offset =
                neg_h.zip(&rows).map(|(h, r)| h + ln_m * r[..r.len() - 1].iter().sum::<f64>()).collect();
            Reduced { a: Cow::Owned(TransitionMatrix::from_rows(rows)?), offset }
        }
    })
}

impl Reduced<'_> {
    /// Divergences `D_i` and the mutual information at `p`.
    fn divergences(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let a = &*self.a;
        let mut q = vec![0.0; a.cols];
        for (i, &pi) in p.iter().enumerate() {
            if pi > 0.0 {
                for (qj, aij) in q.iter_mut().zip(a.row(i)) {
                    *qj += pi * aij;
                }
            }
        }
        let ln_q: Vec<f64> = q.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).collect();
        let d: Vec<f64> = (0..a.rows)
            .map(|i| {
                let cross: f64 = a.row(i).iter().zip(&ln_q).filter(|(a, _)| **a > 0.0).map(|(a, l)| a * l).sum();
                self.offset[i] - cross
            })
            .collect();
        let mi = p.iter().zip(&d).filter(|(pi, _)| **pi > 0.0).map(|(pi, di)| pi * di).sum::<f64>().max(0.0);
        (d, mi)
    }
}

/// `I = sum_i p_i sum_j t_ij ln(t_ij / q_j)`, `q = p^T T`, in nats.
pub fn mutual_information(t: &TransitionMatrix, p: &[f64]) -> Result<f64> {
    mutual_information_with(t, p, Symmetry::None)
}

/// Mutual information with the output law symmetrised as `sym` dictates.
/// With [`Symmetry::UniformPhase`] this is the information carried by ring
/// inputs with uniform phase.
pub fn mutual_information_with(t: &TransitionMatrix, p: &[f64], sym: Symmetry) -> Result<f64> {
    if p.len() != t.rows {
        return Err(Error::DimensionMismatch { expected: t.rows, got: p.len() });
    }
    Ok(reduce(t, sym)?.divergences(p).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaOptions {
    /// Duality-gap tolerance in nats; bisection also stops once the unused
    /// power is worth less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the objective `I - lambda * power` of every inner iterate.
    pub record_trace: bool,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self { tol: 1e-5, max_iter: 50_000, record_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Nats per channel use.
    pub capacity: f64,
    pub input: InputDistribution,
    pub multiplier: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Duality gap of the final inner solve.
    pub mi_gap: f64,
    pub power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Vec<f64>>>,
}

struct Inner {
    p: Vec<f64>,
    mi: f64,
    power: f64,
    gap: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

/// Divergences `D_i`, mutual information and power at `p`.
fn evaluate(ch: &Reduced, powers: &[f64], p: &[f64]) -> (Vec<f64>, f64, f64) {
    let (d, mi) = ch.divergences(p);
    let power = p.iter().zip(powers).map(|(pi, s)| pi * s).sum();
    (d, mi, power)
}

/// Blahut-Arimoto for a fixed multiplier, over-relaxed:
/// `p_i <- p_i exp(c (D_i - lambda s_i)) / Z`. The step factor `c` grows
/// while the objective `I - lambda * power` increases; a step that would
/// decrease it is replaced by the plain `c = 1` step, which never does.
fn ba_fixed(ch: &Reduced, powers: &[f64], lambda: f64, p0: &[f64], opts: &BaOptions) -> Inner {
    let mut p = p0.to_vec();
    let (mut d, mut mi, mut power) = evaluate(ch, powers, &p);
    let mut trace = Vec::new();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut c: f64 = 1.0;
    let step = |p: &[f64], tilt: &[f64], upper: f64, c: f64| -> Vec<f64> {
        // Floored so no symbol underflows to a probability it can't leave.
        let mut next: Vec<f64> =
            p.iter().zip(tilt).map(|(pi, ti)| (pi * (c * (ti - upper)).exp()).max(1e-250)).collect();
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= z);
        next
    };
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let objective = mi - lambda * power;
        if opts.record_trace {
            trace.push(objective);
        }
        let tilt: Vec<f64> = d.iter().zip(powers).map(|(di, s)| di - lambda * s).collect();
        let upper = tilt.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        gap = upper - objective;
        if gap < opts.tol {
            converged = true;
            break;
        }
        let mut next = step(&p, &tilt, upper, c);
        let mut eval = evaluate(ch, powers, &next);
        if c > 1.0 && eval.1 - lambda * eval.2 < objective {
            c = 1.0;
            next = step(&p, &tilt, upper, c);
            eval = evaluate(ch, powers, &next);
        } else {
            c = (c * 1.5).min(256.0);
        }
        p = next;
        (d, mi, power) = eval;
    }
    Inner { p, mi, power, gap, iterations, converged, trace }
}

/// Capacity of `t` under `sum p_i powers_i <= power_limit`.
///
/// Runs unconstrained first; if that violates the budget, doubles the
/// multiplier until the power drops below half the budget and then bisects.
/// The returned distribution is always on the feasible side.
pub fn blahut_arimoto(
    t: &TransitionMatrix,
    powers: &[f64],
    power_limit: f64,
    sym: Symmetry,
    opts: &BaOptions,
) -> Result<CapacityResult> {
    if powers.len() != t.rows {
        return Err(Error::DimensionMismatch { expected: t.rows, got: powers.len() });
    }
    ensure_finite("power", power_limit)?;
    if power_limit <= 0.0 || opts.tol <= 0.0 {
        return Err(invalid("need a positive power budget and tolerance"));
    }
    let min_power = powers.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_power > power_limit {
        return Err(Error::Domain(format!(
            "power budget {power_limit:.3e} is below the cheapest symbol's power {min_power:.3e}"
        )));
    }
    let ch = reduce(t, sym)?;
    let n = t.rows;
    let uniform = vec![1.0 / n as f64; n];
    let mut traces = Vec::new();
    let mut total_iter = 0;
    let run = |lambda: f64, start: &[f64], traces: &mut Vec<Vec<f64>>, total: &mut usize| {
        // Warm starts keep a little uniform mass for the same reason.
        let start: Vec<f64> = start.iter().map(|p| (1.0 - 1e-9) * p + 1e-9 / n as f64).collect();
        let r = ba_fixed(&ch, powers, lambda, &start, opts);
        *total += r.iterations;
        if opts.record_trace {
            traces.push(r.trace.clone());
        }
        r
    };
    let free = run(0.0, &uniform, &mut traces, &mut total_iter);
    let slack = power_limit * (1.0 + 1e-12);
    let finish = |inner: Inner, lambda: f64, traces: Vec<Vec<f64>>, iterations: usize| -> Result<CapacityResult> {
        let radii: Vec<f64> = powers.iter().map(|s| s.sqrt()).collect();
        Ok(CapacityResult {
            capacity: inner.mi,
            input: InputDistribution::new(radii, inner.p)?,
            multiplier: lambda,
            iterations,
            converged: inner.converged,
            mi_gap: inner.gap,
            power: inner.power,
            trace: opts.record_trace.then_some(traces),
        })
    };
    if free.power <= slack {
        return finish(free, 0.0, traces, total_iter);
    }
    let mut lo = 0.0;
    let mut warm = free.p.clone();
    let mut hi = 1.0 / power_limit;
    let mut hi_run = run(hi, &warm, &mut traces, &mut total_iter);
    let mut doublings = 0;
    // Only infeasible multipliers may become the lower end of the bracket.
    while hi_run.power >= 0.5 * power_limit && !(hi_run.power <= slack && doublings >= 60) {
        if hi_run.power > slack {
            lo = hi;
        }
        warm = hi_run.p.clone();
        hi *= 2.0;
        hi_run = run(hi, &warm, &mut traces, &mut total_iter);
        doublings += 1;
        if doublings > 200 {
            return Err(crate::error::numerical("could not bracket the power multiplier"));
        }
    }
    for _ in 0..100 {
        // The multiplier is the slope of capacity in power, so this bounds
        // the information left unused by the power slack.
        if (hi - lo) <= 1e-12 * hi || hi * (power_limit - hi_run.power) <= opts.tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = run(mid, &hi_run.p, &mut traces, &mut total_iter);
        if r.power > slack {
            lo = mid;
        } else {
            hi = mid;
            hi_run = r;
        }
    }
    finish(hi_run, hi, traces, total_iter)
}

/// Drop input symbols above a peak amplitude.
fn restrict(t: &TransitionMatrix, radii: &[f64], peak: Option<f64>) -> Result<(TransitionMatrix, Vec<f64>)> {
    let keep: Vec<usize> = (0..t.rows)
        .filter(|&i| peak.is_none_or(|pk| radii[i] <= pk * (1.0 + 1e-12)))
        .collect();
    if keep.is_empty() {
        return Err(invalid("peak constraint removes every input symbol"));
    }
    let rows = keep.iter().map(|&i| t.row(i).to_vec()).collect();
    Ok((TransitionMatrix::from_rows(rows)?, keep.iter().map(|&i| radii[i]).collect()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacityOptions {
    pub ba: BaOptions,
    pub dmc: DmcConfig,
    /// Peak amplitude; symbols above it are removed from the alphabet.
    pub peak: Option<f64>,
}


/// Capacity of the gridded joint channel over ring inputs with uniform
/// phase, under average power `power`.
pub fn joint_capacity(params: &FiberParams, grid: &RingGrid, power: f64, opts: &CapacityOptions) -> Result<CapacityResult> {
    let build = transition_closed_form(grid, params, &opts.dmc)?;
    capacity_of(&build.matrix, &build.inputs, power, Symmetry::UniformPhase { n_phases: grid.n_phases }, opts)
}

/// Capacity of the amplitude (IM/DD) subchannel on the same grid.
pub fn amplitude_capacity(params: &FiberParams, grid: &RingGrid, power: f64, opts: &CapacityOptions) -> Result<CapacityResult> {
    let build = amplitude_transition(grid, params, &opts.dmc)?;
    capacity_of(&build.matrix, &build.inputs, power, Symmetry::None, opts)
}

/// Blahut-Arimoto over a prebuilt matrix whose rows are the inputs `radii`.
pub fn capacity_of(
    t: &TransitionMatrix,
    radii: &[f64],
    power: f64,
    sym: Symmetry,
    opts: &CapacityOptions,
) -> Result<CapacityResult> {
    let (t, radii) = restrict(t, radii, opts.peak)?;
    let powers: Vec<f64> = radii.iter().map(|r| r * r).collect();
    blahut_arimoto(&t, &powers, power, sym, &opts.ba)
}

/// Rows for `n_levels` equiprobable phases at amplitude `sqrt(P)`. When the
/// sector count is a multiple of `n_levels` the rows are index shifts of one
/// computed row.
fn phase_rows(n_levels: usize, power: f64, params: &FiberParams, grid: &RingGrid, cfg: &DmcConfig) -> Result<TransitionMatrix> {
    if n_levels < 1 {
        return Err(invalid("need at least one phase level"));
    }
    let r0 = power.sqrt();
    let m = grid.n_phases;
    let rows: Vec<Vec<f64>> = if m.is_multiple_of(n_levels) {
        let base = joint_row(r0, 0.0, grid, params, cfg)?.probs;
        let stride = m / n_levels;
        (0..n_levels)
            .map(|l| {
                let mut row = vec![0.0; base.len()];
                for j in 0..grid.n_rings() {
                    for k in 0..m {
                        row[j * m + (k + l * stride) % m] = base[j * m + k];
                    }
                }
                row[grid.overflow_index()] = base[grid.overflow_index()];
                row
            })
            .collect()
    } else {
        (0..n_levels)
            .map(|l| {
                let phi0 = std::f64::consts::TAU * l as f64 / n_levels as f64;
                joint_row(r0, phi0, grid, params, cfg).map(|r| r.probs)
            })
            .collect::<Result<_>>()?
    };
    TransitionMatrix::from_rows(rows)
}

/// Rate of equiprobable `M`-PSK at amplitude `sqrt(P)`.
pub fn mpsk_rate(m: usize, power: f64, params: &FiberParams, grid: &RingGrid, cfg: &DmcConfig) -> Result<f64> {
    if m < 2 {
        return Err(invalid(format!("M-PSK needs M >= 2, got {m}")));
    }
    phase_rate(power, params, grid, m, cfg)
}

/// Information carried by the phase alone: `n_levels` equiprobable phases
/// at fixed amplitude `sqrt(P)`.
pub fn phase_rate(power: f64, params: &FiberParams, grid: &RingGrid, n_levels: usize, cfg: &DmcConfig) -> Result<f64> {
    ensure_finite("power", power)?;
    if power <= 0.0 {
        return Err(invalid("phase_rate needs P > 0"));
    }
    let t = phase_rows(n_levels, power, params, grid, cfg)?;
    mutual_information(&t, &vec![1.0 / n_levels as f64; n_levels])
}

/// Band grid around `sqrt(P)` wide enough for the output of a ring at that
/// amplitude (7 noise standard deviations each side).
pub fn phase_grid(power: f64, params: &FiberParams, n_rings: usize, n_phases: usize) -> Result<RingGrid> {
    let r0 = power.sqrt();
    let w = 7.0 * params.noise_power().sqrt();
    RingGrid::band(n_rings, n_phases, (r0 - w).max(0.0), r0 + w)
}

/// Half-Gaussian amplitude profile (`E R0^2 = P`) discretised onto the
/// grid's rings: ring `j` gets the profile's mass in `[e_j, e_{j+1})`, the
/// tail beyond the grid goes to the outermost ring.
pub fn halfgaussian_distribution(grid: &RingGrid, power: f64) -> Result<InputDistribution> {
    ensure_finite("power", power)?;
    if power <= 0.0 {
        return Err(invalid("half-Gaussian profile needs P > 0"));
    }
    let mut probs = vec![0.0];
    for w in grid.edges.windows(2) {
        probs.push(integrate(|r| halfgaussian_input_pdf(r, power), w[0], w[1], 1e-15, 1e-12)?.value);
    }
    let total: f64 = probs.iter().sum();
    let n = probs.len();
    probs[n - 1] += (1.0 - total).max(0.0);
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    InputDistribution::new(grid.input_radii(), probs)
}

/// Mutual information of the discretised half-Gaussian input with uniform
/// phase.
pub fn halfgaussian_rate(power: f64, params: &FiberParams, grid: &RingGrid, cfg: &DmcConfig) -> Result<f64> {
    let dist = halfgaussian_distribution(grid, power)?;
    let build = transition_closed_form(grid, params, cfg)?;
    mutual_information_with(&build.matrix, &dist.probs, Symmetry::UniformPhase { n_phases: grid.n_phases })
}

/// Which subchannel a mass-point search optimises over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// `R0 -> R`, the IM/DD channel.
    Amplitude,
    /// `R0 -> (R, Phi)` with uniform input phase.
    Joint,
}

impl ChannelKind {
    pub fn symmetry(self, grid: &RingGrid) -> Symmetry {
        match self {
            Self::Amplitude => Symmetry::None,
            Self::Joint => Symmetry::UniformPhase { n_phases: grid.n_phases },
        }
    }

    fn row(self, r0: f64, grid: &RingGrid, params: &FiberParams, cfg: &DmcConfig) -> Result<Vec<f64>> {
        Ok(match self {
            Self::Amplitude => amplitude_row(r0, grid, params, cfg)?.probs,
            Self::Joint => joint_row(r0, 0.0, grid, params, cfg)?.probs,
        })
    }

    fn rows(self, radii: &[f64], grid: &RingGrid, params: &FiberParams, cfg: &DmcConfig) -> Result<TransitionMatrix> {
        match self {
            Self::Joint => joint_rows(radii, grid, params, cfg),
            Self::Amplitude => {
                TransitionMatrix::from_rows(radii.iter().map(|&r| self.row(r, grid, params, cfg)).collect::<Result<_>>()?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub channel: ChannelKind,
    /// Points with less probability are dropped.
    pub prune_below: f64,
    pub rounds: usize,
    pub ba: BaOptions,
    pub dmc: DmcConfig,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            channel: ChannelKind::Amplitude,
            prune_below: 1e-2,
            rounds: 4,
            ba: BaOptions::default(),
            dmc: DmcConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub input: InputDistribution,
    pub mi: f64,
    pub init_mi: f64,
    pub multiplier: f64,
    /// Set when refinement ended more than 1e-3 nats below the start and
    /// the pruned start was returned instead.
    pub fell_back: bool,
}

impl SearchResult {
    pub fn support_size(&self) -> usize {
        self.input.probs.len()
    }

    /// Probability of transmitting nonzero amplitude over that of zero.
    pub fn on_off_ratio(&self) -> f64 {
        let off = self.input.zero_mass();
        (1.0 - off) / off
    }
}

/// Reduce a gridded capacity-achieving input to a few mass points.
///
/// Points below `prune_below` are dropped and the probabilities re-solved.
/// Each round then moves every nonzero radius by golden-section search on
/// the Lagrangian `I - lambda * power` between its neighbours (and below
/// the peak), merges points that end up within half a ring width of each
/// other at their power-preserving radius, re-solves the probabilities and
/// prunes again. The zero point never moves.
pub fn discrete_input_search(
    params: &FiberParams,
    grid: &RingGrid,
    power: f64,
    peak: Option<f64>,
    init: &CapacityResult,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let kind = opts.channel;
    let sym = kind.symmetry(grid);
    let cap_opts = CapacityOptions { ba: opts.ba, dmc: opts.dmc, peak };
    let solve = |radii: &[f64]| -> Result<(TransitionMatrix, CapacityResult)> {
        let t = kind.rows(radii, grid, params, &opts.dmc)?;
        let res = capacity_of(&t, radii, power, sym, &cap_opts)?;
        Ok((t, res))
    };
    let prune = |res: &CapacityResult| -> Vec<f64> {
        let keep: Vec<f64> =
            res.input.radii.iter().zip(&res.input.probs).filter(|(_, p)| **p >= opts.prune_below).map(|(r, _)| *r).collect();
        if keep.is_empty() { res.input.radii.clone() } else { keep }
    };

    let (mut t, start) = solve(&prune(init))?;
    let pruned = start.clone();
    let mut radii = start.input.radii.clone();
    let mut probs = start.input.probs.clone();
    let mut lambda = start.multiplier;
    let mut mi = start.capacity;
    let r_cap = peak.unwrap_or(grid.r_max()).min(grid.r_max());

    for _ in 0..opts.rounds {
        for i in 0..radii.len() {
            if radii[i] == 0.0 {
                continue;
            }
            let lo = if i > 0 { radii[i - 1] } else { 0.0 };
            let hi = if i + 1 < radii.len() { radii[i + 1] } else { r_cap };
            if hi <= lo {
                continue;
            }
            let cols = t.cols;
            let mut objective = |r: f64| -> Result<f64> {
                let mut trial = t.clone();
                trial.data[i * cols..(i + 1) * cols].copy_from_slice(&kind.row(r, grid, params, &opts.dmc)?);
                let pw: f64 = radii.iter().zip(&probs).enumerate().map(|(k, (rk, pk))| pk * if k == i { r * r } else { rk * rk }).sum();
                Ok(mutual_information_with(&trial, &probs, sym)? - lambda * pw)
            };
            radii[i] = golden_max(&mut objective, lo, hi, radii[i], 1e-3 * ring_width(grid, radii[i]))?;
            t.data[i * cols..(i + 1) * cols].copy_from_slice(&kind.row(radii[i], grid, params, &opts.dmc)?);
        }
        // Merge near-coincident points at their power-preserving radius.
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (&r, &p) in radii.iter().zip(&probs) {
            if let Some(last) = merged.last_mut() {
                let lr = last.0;
                if r - lr < 0.5 * ring_width(grid, lr) && lr > 0.0 {
                    let e = last.1 * lr * lr + p * r * r;
                    last.1 += p;
                    last.0 = (e / last.1).sqrt();
                    continue;
                }
            }
            merged.push((r, p));
        }
        let candidate: Vec<f64> = merged.iter().map(|m| m.0).collect();
        let (_, res) = solve(&candidate)?;
        let (t_next, res) = solve(&prune(&res))?;
        t = t_next;
        radii.clone_from(&res.input.radii);
        probs.clone_from(&res.input.probs);
        lambda = res.multiplier;
        mi = res.capacity;
    }
    if mi < init.capacity - 1e-3 && mi < pruned.capacity {
        return Ok(SearchResult {
            mi: pruned.capacity,
            input: pruned.input,
            init_mi: init.capacity,
            multiplier: pruned.multiplier,
            fell_back: true,
        });
    }
    Ok(SearchResult { input: InputDistribution::new(radii, probs)?, mi, init_mi: init.capacity, multiplier: lambda, fell_back: false })
}

fn ring_width(grid: &RingGrid, r: f64) -> f64 {
    let j = grid.ring(r).unwrap_or(if r < grid.r_min() { 0 } else { grid.n_rings() - 1 });
    grid.edges[j + 1] - grid.edges[j]
}

/// Golden-section maximisation on `[a, b]`, never returning a point worse
/// than `start`.
fn golden_max(f: &mut impl FnMut(f64) -> Result<f64>, a: f64, b: f64, start: f64, tol: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let (x, fx) = if fc >= fd { (c, fc) } else { (d, fd) };
    let fs = f(start)?;
    Ok(if fx > fs { x } else { start })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc(e: f64) -> TransitionMatrix {
        TransitionMatrix::from_rows(vec![vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap()
    }

    fn h2(p: f64) -> f64 {
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    #[test]
    fn mi_trivial_cases() {
        let perm = TransitionMatrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let mi = mutual_information(&perm, &[1.0 / 3.0; 3]).unwrap();
        assert!((mi - 3f64.ln()).abs() < 1e-14);
        let same = TransitionMatrix::from_rows(vec![vec![0.3, 0.7]; 2]).unwrap();
        assert_eq!(mutual_information(&same, &[0.5, 0.5]).unwrap(), 0.0);
        let mi = mutual_information(&bsc(0.11), &[0.5, 0.5]).unwrap();
        assert!((mi - (2f64.ln() - h2(0.11))).abs() < 1e-14);
        assert!((mi / 2f64.ln() - 0.5).abs() < 1e-3);
        assert!(mutual_information(&bsc(0.1), &[1.0]).is_err());
    }

    #[test]
    fn ba_on_bsc_and_single_symbol() {
        let r = blahut_arimoto(&bsc(0.11), &[0.0, 0.0], 1.0, Symmetry::None, &BaOptions::default()).unwrap();
        assert!((r.capacity / 2f64.ln() - 0.5).abs() < 1e-3);
        assert!(r.converged && r.multiplier == 0.0);
        let one = TransitionMatrix::from_rows(vec![vec![0.2, 0.8]]).unwrap();
        let r = blahut_arimoto(&one, &[1.0], 1.0, Symmetry::None, &BaOptions::default()).unwrap();
        assert_eq!(r.capacity, 0.0);
    }

    #[test]
    fn ba_power_constraint_binds_and_traces_are_monotone() {
        // Noiseless 4-ary channel with powers 0..3: unconstrained optimum has
        // power 1.5, so a budget of 0.5 must bind.
        let t = TransitionMatrix::from_rows((0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect()).unwrap();
        let opts = BaOptions { record_trace: true, ..BaOptions::default() };
        let r = blahut_arimoto(&t, &[0.0, 1.0, 2.0, 3.0], 0.5, Symmetry::None, &opts).unwrap();
        assert!(r.power <= 0.5 + 1e-9);
        assert!(r.multiplier * (0.5 - r.power) <= 1e-5);
        assert!(r.multiplier > 0.0);
        // Closed form: p_i ∝ exp(-lambda s_i) (Gibbs), entropy is the MI.
        let z: f64 = (0..4).map(|i| (-r.multiplier * i as f64).exp()).sum();
        for i in 0..4 {
            assert!((r.input.probs[i] - (-r.multiplier * i as f64).exp() / z).abs() < 1e-4);
        }
        for tr in r.trace.unwrap() {
            for w in tr.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }

    #[test]
    fn ba_uses_the_whole_budget_when_the_first_multiplier_is_feasible() {
        // At lambda = 1/P the Gibbs power is ~0.507, already inside [P/2, P].
        let t = TransitionMatrix::from_rows((0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect()).unwrap();
        let r = blahut_arimoto(&t, &[0.0, 1.0, 2.0, 3.0], 1.0, Symmetry::None, &BaOptions::default()).unwrap();
        assert!(r.power <= 1.0 + 1e-12);
        assert!(r.multiplier * (1.0 - r.power) <= 1e-5, "{r:?}");
    }

    #[test]
    fn ba_rejects_infeasible_budget() {
        let r = blahut_arimoto(&bsc(0.1), &[1.0, 2.0], 0.5, Symmetry::None, &BaOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn golden_section_finds_interior_max() {
        let mut f = |x: f64| Ok(-(x - 0.3) * (x - 0.3));
        let x = golden_max(&mut f, 0.0, 1.0, 0.9, 1e-8).unwrap();
        assert!((x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn uniform_phase_fold_matches_the_expanded_orbit() {
        // 3 inputs, 2 rings of 4 sectors plus overflow; compare with the
        // plain MI of every rotated copy of every row, each at p_i / 4.
        let m = 4;
        let raw = [
            [0.30, 0.10, 0.05, 0.05, 0.20, 0.10, 0.05, 0.05, 0.10],
            [0.02, 0.08, 0.10, 0.05, 0.40, 0.15, 0.10, 0.05, 0.05],
            [0.00, 0.00, 0.01, 0.04, 0.05, 0.30, 0.30, 0.10, 0.20],
        ];
        let t = TransitionMatrix::from_rows(raw.iter().map(|r| r.to_vec()).collect()).unwrap();
        let p = [0.5, 0.3, 0.2];
        let mut rows = Vec::new();
        let mut q = Vec::new();
        for (row, pi) in raw.iter().zip(p) {
            for shift in 0..m {
                let mut r = row.to_vec();
                for ring in 0..2 {
                    for k in 0..m {
                        r[ring * m + (k + shift) % m] = row[ring * m + k];
                    }
                }
                rows.push(r);
                q.push(pi / m as f64);
            }
        }
        let expanded = mutual_information(&TransitionMatrix::from_rows(rows).unwrap(), &q).unwrap();
        let folded = mutual_information_with(&t, &p, Symmetry::UniformPhase { n_phases: m }).unwrap();
        assert!((expanded - folded).abs() < 1e-14, "{expanded} vs {folded}");
        assert!(mutual_information_with(&t, &p, Symmetry::UniformPhase { n_phases: 3 }).is_err());
    }

    #[test]
    fn linear_channel_capacity_approaches_awgn() {
        let params = FiberParams::new(0.0, 1e-9, 5000.0).unwrap();
        let s = params.noise_power();
        let power = 10.0 * s;
        let grid = RingGrid::new(48, 48, 3.2 * power.sqrt(), crate::dmc::Spacing::Uniform).unwrap();
        let c = joint_capacity(&params, &grid, power, &CapacityOptions::default()).unwrap();
        let awgn = 11f64.ln();
        assert!(c.capacity <= awgn + 1e-3 && c.capacity > awgn - 0.1, "{} vs {awgn}", c.capacity);
    }
}
