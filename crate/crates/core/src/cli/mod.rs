//! Command-line front end: `pdf`, `sample`, `capacity`, `validate`.
//!
//! Tabular output is CSV (a `# fibercap-<cmd> v<N>` comment line, then a
//! header row) with a JSON sidecar at `<out>.json`, or a single JSON
//! document with `--format json`. Floats are written in shortest
//! round-trip form, so a fixed config and seed give byte-identical files.

mod validate;

use crate::bounds::{lb_high, lb_medium, lb_theorem1, regime_classify, Region};
use crate::capacity::{
    amplitude_capacity, capacity_of, discrete_input_search, halfgaussian_distribution, mutual_information_with,
    BaOptions, CapacityOptions, SearchOptions, Symmetry,
};
use crate::channel::{pdf_harmonics, FiberParams, DEFAULT_PDF_TOL};
use crate::dmc::{amplitude_transition, transition_closed_form, DmcConfig, RingGrid};
use crate::error::{invalid, Error, Result};
use crate::presets::{GridSpec, Preset, Sweep, NAMES};
use crate::quad::integrate;
use crate::samplers::{algebraic_sample, exact_path_sample, split_step_sample, split_step_stability, KlConfig, SimConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub use validate::{run_checks, Check, ValidationReport, VALIDATE_SCHEMA};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION_FAILED: u8 = 1;
pub const EXIT_INVALID_ARGS: u8 = 2;

/// Version of every table layout written by the tool.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "fibercap", version, about = "Per-sample capacity of the zero-dispersion nonlinear fiber channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Conditional density on the grid for one input point.
    Pdf(PdfArgs),
    /// Channel outputs for one input from a Monte Carlo oracle.
    Sample(SampleArgs),
    /// Capacity and bounds over a power sweep.
    Capacity(CapacityArgs),
    /// Cross-check the closed forms against the independent oracles.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// Named parameter set.
    #[arg(long, default_value = "desk", value_parser = clap::builder::PossibleValuesParser::new(NAMES))]
    pub preset: String,
    /// Kerr coefficient, 1/(W km).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Per-sample noise intensity, W/km.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma2: Option<f64>,
    /// Fiber length, km.
    #[arg(long, allow_hyphen_values = true)]
    pub length: Option<f64>,
    /// Output grid as rings x sectors, e.g. 50x64.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Outer grid radius, sqrt(W). Without it, `capacity` widens the preset's
    /// grid to cover the largest unpeaked power.
    #[arg(long, allow_hyphen_values = true)]
    pub r_max: Option<f64>,
    /// RNG seed; defaults to the preset's.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent (no sidecar then).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct PdfArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Input power; the input amplitude is its square root. Defaults to the preset's.
    #[arg(long, conflicts_with = "r0", allow_hyphen_values = true)]
    pub power: Option<f64>,
    /// Input amplitude, sqrt(W).
    #[arg(long, allow_hyphen_values = true)]
    pub r0: Option<f64>,
    /// Input phase, rad.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oracle {
    SplitStep,
    ExactPath,
    Algebraic,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_enum, default_value_t = Oracle::SplitStep)]
    pub oracle: Oracle,
    /// Number of outputs to draw.
    #[arg(long, default_value_t = 10_000)]
    pub batch: usize,
    /// Steps along the fiber (split-step, exact-path).
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// KL terms (algebraic).
    #[arg(long, default_value_t = crate::samplers::KL_DEFAULT_TERMS)]
    pub kl_terms: usize,
    /// Input power; the input amplitude is its square root. Defaults to the preset's.
    #[arg(long, conflicts_with = "r0", allow_hyphen_values = true)]
    pub power: Option<f64>,
    /// Input amplitude, sqrt(W).
    #[arg(long, allow_hyphen_values = true)]
    pub r0: Option<f64>,
    /// Input phase, rad.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelChoice {
    Joint,
    Amplitude,
}

#[derive(Debug, Clone, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Single average power, W.
    #[arg(long, conflicts_with = "sweep", allow_hyphen_values = true)]
    pub power: Option<f64>,
    /// SNR sweep in dB as MIN:MAX:POINTS (log-spaced). Defaults to the preset's.
    #[arg(long, value_parser = parse_sweep, allow_hyphen_values = true)]
    pub sweep: Option<Sweep>,
    #[arg(long = "channel", value_enum, default_value_t = ChannelChoice::Joint)]
    pub kind: ChannelChoice,
    /// Peak amplitude, sqrt(W); overrides the preset's.
    #[arg(long, conflicts_with = "no_peak", allow_hyphen_values = true)]
    pub peak: Option<f64>,
    /// Drop the preset's peak constraint.
    #[arg(long)]
    pub no_peak: bool,
    /// Refine each optimum into a finite set of mass points.
    #[arg(long)]
    pub search: bool,
    /// Duality-gap tolerance of Blahut-Arimoto, nats.
    #[arg(long, default_value_t = BaOptions::default().tol)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Report file (JSON); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturb gamma and sigma2 of the analytic side by this relative amount.
    #[arg(long, allow_hyphen_values = true)]
    pub inject_fault: Option<f64>,
    /// Also check a `sample` output file against the closed form.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (n, m) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got '{s}'"))?;
    let n: usize = n.trim().parse().map_err(|e| format!("rings: {e}"))?;
    let m: usize = m.trim().parse().map_err(|e| format!("sectors: {e}"))?;
    if n == 0 || m == 0 {
        return Err("grid sizes must be >= 1".into());
    }
    Ok((n, m))
}

fn parse_sweep(s: &str) -> std::result::Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected MIN_DB:MAX_DB:POINTS, got '{s}'"));
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("min: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("max: {e}"))?;
    let n: usize = parts[2].parse().map_err(|e| format!("points: {e}"))?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo || n == 0 {
        return Err(format!("bad sweep '{s}'"));
    }
    Ok(Sweep::from_db(lo, hi, n))
}

impl ChannelArgs {
    /// The preset with every override applied and checked.
    pub fn resolve(&self) -> Result<Preset> {
        let mut p = Preset::by_name(&self.preset)?;
        p.params = FiberParams::new(
            self.gamma.unwrap_or(p.params.gamma),
            self.sigma2.unwrap_or(p.params.sigma2),
            self.length.unwrap_or(p.params.length),
        )?;
        if let Some((n, m)) = self.grid {
            p.grid = GridSpec { n_rings: n, n_phases: m, ..p.grid };
        }
        if let Some(r) = self.r_max {
            p.grid.r_max = r;
        }
        p.grid.build()?;
        if let Some(seed) = self.seed {
            p.seed = seed;
        }
        Ok(p)
    }
}

fn input_amplitude(preset: &Preset, power: Option<f64>, r0: Option<f64>) -> Result<f64> {
    let r0 = match (power, r0) {
        (_, Some(r)) => r,
        (Some(p), None) => {
            if !(p.is_finite() && p >= 0.0) {
                return Err(invalid(format!("power must be finite and >= 0, got {p}")));
            }
            p.sqrt()
        }
        (None, None) => preset.power.sqrt(),
    };
    if !(r0.is_finite() && r0 >= 0.0) {
        return Err(invalid(format!("input amplitude must be finite and >= 0, got {r0}")));
    }
    Ok(r0)
}

/// A table plus its metadata, written as CSV + sidecar or as one JSON document.
struct Table {
    command: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
    meta: Value,
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn num(x: f64) -> Value {
    json!(x)
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// Sidecar path for a CSV file: the file name with `.json` appended.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Table {
    fn schema(&self) -> String {
        format!("fibercap-{}/{FORMAT_VERSION}", self.command)
    }

    fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# fibercap-{} v{FORMAT_VERSION} columns={}", self.command, self.columns.join(","))?;
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(cell).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    fn document(&self, with_rows: bool) -> Value {
        let mut doc = json!({ "schema": self.schema(), "columns": self.columns, "meta": self.meta });
        if with_rows {
            doc["rows"] = Value::Array(self.rows.iter().map(|r| Value::Array(r.clone())).collect());
        }
        doc
    }

    fn emit(&self, out: &OutputArgs) -> Result<()> {
        match (&out.out, out.format) {
            (None, Format::Csv) => self.write_csv(BufWriter::new(io::stdout().lock()))?,
            (None, Format::Json) => write_json(BufWriter::new(io::stdout().lock()), &self.document(true))?,
            (Some(path), Format::Csv) => {
                let mut w = BufWriter::new(File::create(path)?);
                self.write_csv(&mut w)?;
                w.flush()?;
                write_json(BufWriter::new(File::create(sidecar_path(path))?), &self.document(false))?;
            }
            (Some(path), Format::Json) => write_json(BufWriter::new(File::create(path)?), &self.document(true))?,
        }
        Ok(())
    }
}

fn write_json(mut w: impl Write, v: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn preset_meta(p: &Preset) -> Value {
    json!({
        "preset": p.name,
        "params": p.params,
        "sigma2L": p.params.noise_power(),
        "grid": p.grid,
        "seed": p.seed,
    })
}

/// `int int f dr dphi` over the plane for the clamped density, with the
/// phase integral done by the trapezoid rule (exact for the truncated
/// series) and the radial one adaptively.
fn pdf_mass(r0: f64, params: &FiberParams, tol: f64) -> Result<f64> {
    let r_hi = r0 + 14.0 * params.noise_power().sqrt();
    let mut err = None;
    let q = integrate(
        |r| match pdf_harmonics(r, r0, params, tol) {
            Ok(h) => {
                let k = (4 * h.coeffs.len()).max(64);
                let dphi = std::f64::consts::TAU / k as f64;
                (0..k).map(|i| h.eval(i as f64 * dphi).max(0.0)).sum::<f64>() * dphi
            }
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        r_hi,
        1e-12,
        1e-11,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

fn cmd_pdf(a: &PdfArgs) -> Result<()> {
    let preset = a.channel.resolve()?;
    let r0 = input_amplitude(&preset, a.power, a.r0)?;
    crate::error::ensure_finite("phi0", a.phi0)?;
    let grid = preset.grid.build()?;
    let params = preset.params;
    let dphi = grid.phase_step();
    let per_ring: Vec<(Vec<f64>, usize, bool)> = grid
        .centers
        .par_iter()
        .map(|&r| {
            let h = pdf_harmonics(r, r0, &params, DEFAULT_PDF_TOL)?;
            let d = (0..grid.n_phases).map(|k| h.eval(k as f64 * dphi - a.phi0)).collect();
            Ok((d, h.coeffs.len() - 1, h.hit_cap))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(grid.n_rings() * grid.n_phases);
    let (mut grid_mass, mut clamped, mut max_terms, mut hit_cap) = (0.0, 0usize, 0usize, false);
    for (j, (dens, terms, cap)) in per_ring.iter().enumerate() {
        max_terms = max_terms.max(*terms);
        hit_cap |= cap;
        for (k, &raw) in dens.iter().enumerate() {
            clamped += usize::from(raw < 0.0);
            let f = raw.max(0.0);
            // f is per dr dphi and a bin's planar area is r dr dphi.
            grid_mass += f * grid.bin_area(j) / grid.centers[j];
            rows.push(vec![num(grid.centers[j]), num(k as f64 * dphi), num(f)]);
        }
    }
    let total = pdf_mass(r0, &params, DEFAULT_PDF_TOL)?;
    let mut meta = preset_meta(&preset);
    meta["input"] = json!({ "r0": r0, "phi0": a.phi0 });
    meta["density"] = json!("per dr dphi at ring centers and sector centers k*dphi");
    meta["diagnostics"] = json!({
        "normalization_deficit": (1.0 - total).abs(),
        "grid_mass": grid_mass,
        "max_terms": max_terms,
        "hit_cap": hit_cap,
        "clamped_bins": clamped,
        "series_tol": DEFAULT_PDF_TOL,
    });
    Table { command: "pdf", columns: vec!["r", "phi", "density"], rows, meta }.emit(&a.output)
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let preset = a.channel.resolve()?;
    let r0 = input_amplitude(&preset, a.power, a.r0)?;
    crate::error::ensure_finite("phi0", a.phi0)?;
    let params = preset.params;
    let q0 = Complex64::from_polar(r0, a.phi0);
    let cfg = SimConfig::new(a.steps, preset.seed, a.batch)?;
    let mut config = json!({ "oracle": a.oracle, "batch": a.batch, "seed": preset.seed });
    let points: Vec<(f64, f64)> = match a.oracle {
        Oracle::SplitStep | Oracle::ExactPath => {
            config["steps"] = json!(a.steps);
            let q = if a.oracle == Oracle::SplitStep {
                let stab = split_step_stability(q0, &params, &cfg);
                config["phase_per_step"] = json!(stab);
                if stab > 1e-2 {
                    eprintln!("warning: nonlinear phase per step is {stab:.2e}; increase --steps");
                }
                split_step_sample(q0, &params, &cfg)?
            } else {
                exact_path_sample(q0, &params, &cfg)?
            };
            q.iter().map(|z| (z.norm(), crate::channel::canonical_phase(z.arg()))).collect()
        }
        Oracle::Algebraic => {
            let kl = KlConfig { n_terms: a.kl_terms, ..KlConfig::default() };
            config["kl"] = json!(kl);
            config["kl_tail_fraction"] = json!(kl.tail_fraction());
            algebraic_sample(r0, a.phi0, &params, &kl, preset.seed, a.batch)?
                .iter()
                .map(|o| (o.r_sq.sqrt(), o.phi))
                .collect()
        }
    };
    let n = points.len() as f64;
    let mean_r2 = points.iter().map(|(r, _)| r * r).sum::<f64>() / n;
    let mut meta = preset_meta(&preset);
    meta["input"] = json!({ "r0": r0, "phi0": a.phi0 });
    meta["config"] = config;
    meta["summary"] = json!({
        "mean_r2": mean_r2,
        "expected_mean_r2": r0 * r0 + params.noise_power(),
    });
    let rows = points.into_iter().map(|(r, phi)| vec![num(r), num(phi)]).collect();
    Table { command: "sample", columns: vec!["r", "phi"], rows, meta }.emit(&a.output)
}

/// One row of the capacity table.
#[derive(Debug, Clone, Serialize)]
struct CapacityPoint {
    power: f64,
    capacity: f64,
    multiplier: f64,
    support_size: usize,
    converged: bool,
    halfgaussian: Option<f64>,
    /// Average power of the half-Gaussian profile after discretisation.
    halfgaussian_power: Option<f64>,
    iterations: usize,
    mi_gap: f64,
    support: Vec<(f64, f64)>,
    search_mi: Option<f64>,
}

/// Mass below this is not counted in `support_size` without `--search`.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;
/// Without a peak constraint the grid reaches this many `sqrt(P)` (plus six
/// noise deviations) past the origin at the largest swept power.
pub const UNPEAKED_REACH: f64 = 3.0;

fn cmd_capacity(a: &CapacityArgs) -> Result<()> {
    let mut preset = a.channel.resolve()?;
    let params = preset.params;
    let s = params.noise_power();
    let powers: Vec<f64> = match (a.power, a.sweep) {
        (Some(p), _) => vec![p],
        (None, Some(sw)) => sw.rhos().into_iter().map(|r| r * s).collect(),
        (None, None) => preset.powers(),
    };
    if let Some(p) = powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(invalid(format!("powers must be positive, got {p}")));
    }
    let peak = if a.no_peak { None } else { a.peak.or(preset.peak) };
    // One matrix serves every power, so without a peak the grid must reach
    // past the largest one or the power constraint goes slack.
    if a.channel.r_max.is_none() && peak.is_none() {
        let p_max = powers.iter().copied().fold(0.0, f64::max);
        preset.grid.r_max = preset.grid.r_max.max(UNPEAKED_REACH * p_max.sqrt() + 6.0 * s.sqrt());
    }
    let grid: RingGrid = preset.grid.build()?;
    let ba = BaOptions { tol: a.tol, ..BaOptions::default() };
    let opts = CapacityOptions { ba, dmc: DmcConfig::default(), peak };
    let (build, sym) = match a.kind {
        ChannelChoice::Joint => {
            (transition_closed_form(&grid, &params, &opts.dmc)?, Symmetry::UniformPhase { n_phases: grid.n_phases })
        }
        ChannelChoice::Amplitude => (amplitude_transition(&grid, &params, &opts.dmc)?, Symmetry::None),
    };
    let points: Vec<CapacityPoint> = powers
        .par_iter()
        .map(|&pw| {
            let r = capacity_of(&build.matrix, &build.inputs, pw, sym, &opts)?;
            let (halfgaussian, halfgaussian_power) = match a.kind {
                ChannelChoice::Joint => {
                    let hg = halfgaussian_distribution(&grid, pw)?;
                    (Some(mutual_information_with(&build.matrix, &hg.probs, sym)?), Some(hg.average_power()))
                }
                ChannelChoice::Amplitude => (None, None),
            };
            let (support, support_size, search_mi) = if a.search {
                let init = amplitude_capacity(&params, &grid, pw, &opts)?;
                let so = SearchOptions { ba, ..SearchOptions::default() };
                let found = discrete_input_search(&params, &grid, pw, peak, &init, &so)?;
                let pts = found.input.radii.iter().copied().zip(found.input.probs.iter().copied()).collect();
                (pts, found.support_size(), Some(found.mi))
            } else {
                let pts = r
                    .input
                    .radii
                    .iter()
                    .zip(&r.input.probs)
                    .filter(|(_, p)| **p > SUPPORT_THRESHOLD)
                    .map(|(r, p)| (*r, *p))
                    .collect();
                (pts, r.input.support_size(SUPPORT_THRESHOLD), None)
            };
            Ok(CapacityPoint {
                power: pw,
                capacity: r.capacity,
                multiplier: r.multiplier,
                support_size,
                converged: r.converged,
                halfgaussian,
                halfgaussian_power,
                iterations: r.iterations,
                mi_gap: r.mi_gap,
                support,
                search_mi,
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut extras = Vec::new();
    for pt in &points {
        let rho = pt.power / s;
        let regime = regime_classify(pt.power, &params)?;
        let medium = if regime.region == Region::MediumPower && params.gamma > 0.0 {
            Some(lb_medium(pt.power, &params)?)
        } else {
            None
        };
        let high = (regime.region == Region::HighPower).then(|| lb_high(pt.power, &params)).transpose()?;
        rows.push(vec![
            num(pt.power),
            num(10.0 * rho.log10()),
            num(s),
            num(pt.capacity),
            num(pt.capacity * std::f64::consts::LOG2_E),
            num(pt.multiplier),
            json!(pt.support_size),
            json!(pt.converged),
            opt(pt.halfgaussian),
            num(lb_theorem1(rho)?),
            opt(medium),
            opt(high),
            serde_json::to_value(regime.region).map_err(|e| Error::Format(e.to_string()))?,
        ]);
        extras.push(json!({
            "P": pt.power,
            "iterations": pt.iterations,
            "mi_gap": pt.mi_gap,
            "support": pt.support,
            "search_mi": pt.search_mi,
            "halfgaussian_power": pt.halfgaussian_power,
            "regime": regime,
        }));
    }
    let mut meta = preset_meta(&preset);
    meta["channel"] = json!(match a.kind {
        ChannelChoice::Joint => "joint",
        ChannelChoice::Amplitude => "amplitude",
    });
    meta["peak"] = opt(peak);
    meta["ba"] = json!(ba);
    meta["search"] = json!(a.search);
    meta["support_threshold"] = json!(SUPPORT_THRESHOLD);
    meta["dmc_warnings"] = json!(build.warnings);
    meta["bounds_note"] = json!("lb_medium and lb_high are filled only inside their regime");
    meta["points"] = Value::Array(extras);
    let columns = vec![
        "P",
        "snr_db",
        "sigma2L",
        "capacity_nats",
        "capacity_bits",
        "multiplier",
        "support_size",
        "converged",
        "halfgaussian_nats",
        "lb_theorem1",
        "lb_medium",
        "lb_high",
        "region",
    ];
    Table { command: "capacity", columns, rows, meta }.emit(&a.output)
}

fn cmd_validate(a: &ValidateArgs) -> Result<bool> {
    let preset = a.channel.resolve()?;
    if let Some(eps) = a.inject_fault {
        if !eps.is_finite() || eps <= -1.0 {
            return Err(invalid(format!("fault must be finite and > -1, got {eps}")));
        }
    }
    let report = run_checks(&preset, a.inject_fault, a.samples.as_deref())?;
    for c in &report.checks {
        eprintln!("{} {}: {:.3e} (threshold {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    let doc = serde_json::to_value(&report).map_err(|e| Error::Format(e.to_string()))?;
    match &a.out {
        Some(p) => write_json(BufWriter::new(File::create(p)?), &doc)?,
        None => write_json(BufWriter::new(io::stdout().lock()), &doc)?,
    }
    Ok(report.passed)
}

/// Exit status for an error: bad input is 2, anything else 1.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Domain(_) | Error::DimensionMismatch { .. } => EXIT_INVALID_ARGS,
        _ => EXIT_VALIDATION_FAILED,
    }
}

pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Pdf(a) => cmd_pdf(a).map(|_| true),
        Command::Sample(a) => cmd_sample(a).map(|_| true),
        Command::Capacity(a) => cmd_capacity(a).map(|_| true),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID_ARGS } else { EXIT_OK });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::from(EXIT_OK),
        Ok(false) => ExitCode::from(EXIT_VALIDATION_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
