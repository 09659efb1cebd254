//! Parameter-grid execution engine for efficiency maps.
//!
//! A sweep evaluates a transfer run at every point of a 2-D linear grid.
//! Points are computed in row-major order (axis1 outer, axis2 inner), rows
//! parallelized over a caller-sized worker pool. Every point is an
//! independent pure computation, so results are identical for any worker
//! count. Newly finished records are handed to a caller sink in grid order,
//! which supports incremental flushing and resuming from a partial file.
//!
//! The CSV format is the artifact's exchange format: a fixed header plus one
//! record per grid point, all floats at full double precision so that reruns
//! diff cleanly.

use std::io::{BufRead, Write};
use std::time::Instant;

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{DynamicsError, PulsePair, SystemParams};
use crate::hilbert::{Basis, HilbertError, StateLabel};
use crate::observables::{leakage, transfer_efficiency, LeakageMode};
use crate::propagator::{propagate, IntegratorOpts, PropagatorError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("worker count must be at least 1")]
    InvalidWorkers,
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error("sweep axes are not a (g_peak, T) grid")]
    NotAGtSweep,
    #[error("iso-gT line A = {0} does not intersect the grid")]
    SliceOutsideGrid(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Parameter that a sweep axis ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisParam {
    GPeak,
    Width,
    Delta,
    DeltaP,
    Kappa,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::GPeak => "g_peak",
            AxisParam::Width => "T",
            AxisParam::Delta => "delta",
            AxisParam::DeltaP => "delta_p",
            AxisParam::Kappa => "kappa",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "g_peak" => Some(AxisParam::GPeak),
            "T" | "width" => Some(AxisParam::Width),
            "delta" => Some(AxisParam::Delta),
            "delta_p" => Some(AxisParam::DeltaP),
            "kappa" => Some(AxisParam::Kappa),
            _ => None,
        }
    }
}

/// One linearly spaced sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub param: AxisParam,
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.n_points;
        let step = (self.max - self.min) / (n - 1) as f64;
        let mut vals: Vec<f64> = (0..n).map(|k| self.min + k as f64 * step).collect();
        vals[n - 1] = self.max;
        vals
    }
}

/// How the pulse delay is derived at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// `tau = fraction * T` (0.7 in all standard runs).
    FractionOfWidth(f64),
    Fixed(f64),
}

/// How the pulse width is derived at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthRule {
    /// Take the axis value (or the base width if no axis sweeps T).
    Base,
    /// Hold the pulse area constant: `T = A / g_peak`.
    IsoGt(f64),
}

/// How the loss rate is derived at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum KappaRule {
    /// Take the axis value (or the base kappa if no axis sweeps kappa).
    Base,
    /// Piecewise-linear `kappa(g_peak)` from a table of `(g, kappa)` pairs
    /// sorted by `g`; clamped at the table ends.
    Table(Vec<(f64, f64)>),
}

impl KappaRule {
    fn kappa_at(&self, g: f64, base: f64) -> f64 {
        match self {
            KappaRule::Base => base,
            KappaRule::Table(table) => {
                if table.is_empty() {
                    return base;
                }
                if g <= table[0].0 {
                    return table[0].1;
                }
                for w in table.windows(2) {
                    let (g0, k0) = w[0];
                    let (g1, k1) = w[1];
                    if g <= g1 {
                        let f = (g - g0) / (g1 - g0);
                        return k0 + f * (k1 - k0);
                    }
                }
                table[table.len() - 1].1
            }
        }
    }
}

/// Full description of a 2-D sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis1: SweepAxis,
    pub axis2: SweepAxis,
    /// Parameters at the grid origin; axis values and rules override fields
    /// per point.
    pub base_params: SystemParams,
    pub base_g_peak: f64,
    pub base_width: f64,
    /// Initial state as (label, amplitude) pairs; normalized per point.
    pub psi0: Vec<(StateLabel, Complex64)>,
    pub n_max: usize,
    pub tau_rule: TauRule,
    pub width_rule: WidthRule,
    pub kappa_rule: KappaRule,
    pub integrator: IntegratorOpts,
    /// Output times per trajectory; bounds the resolution of peak-leakage
    /// tracking.
    pub n_out: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.axis1.param == self.axis2.param {
            return Err(SweepError::InvalidSpec(format!(
                "both axes sweep {}",
                self.axis1.param.name()
            )));
        }
        for axis in [&self.axis1, &self.axis2] {
            if axis.n_points < 2 {
                return Err(SweepError::InvalidSpec(format!(
                    "axis {} needs at least 2 points",
                    axis.param.name()
                )));
            }
            if !axis.min.is_finite() || !axis.max.is_finite() || axis.min > axis.max {
                return Err(SweepError::InvalidSpec(format!(
                    "axis {} has an empty or non-finite range",
                    axis.param.name()
                )));
            }
        }
        if self.psi0.is_empty() {
            return Err(SweepError::InvalidSpec("empty initial state".into()));
        }
        if self.n_out < 2 {
            return Err(SweepError::InvalidSpec(
                "n_out must be at least 2".into(),
            ));
        }
        if let KappaRule::Table(t) = &self.kappa_rule {
            if t.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(SweepError::InvalidSpec(
                    "kappa table must be strictly increasing in g".into(),
                ));
            }
        }
        Ok(())
    }

    /// Parameters and pulses at one grid point.
    pub fn resolve(&self, a1: f64, a2: f64) -> Result<(SystemParams, PulsePair), SweepError> {
        let mut params = self.base_params;
        let mut g_peak = self.base_g_peak;
        let mut width = self.base_width;
        for (axis, value) in [(&self.axis1, a1), (&self.axis2, a2)] {
            match axis.param {
                AxisParam::GPeak => g_peak = value,
                AxisParam::Width => width = value,
                AxisParam::Delta => params.delta = value,
                AxisParam::DeltaP => params.delta_p = value,
                AxisParam::Kappa => params.kappa = value,
            }
        }
        if let WidthRule::IsoGt(area) = self.width_rule {
            width = area / g_peak;
        }
        let tau = match self.tau_rule {
            TauRule::FractionOfWidth(f) => f * width,
            TauRule::Fixed(tau) => tau,
        };
        params.kappa = self.kappa_rule.kappa_at(g_peak, params.kappa);
        let pulses = PulsePair::with_default_span(g_peak, width, tau)?;
        Ok((params, pulses))
    }
}

/// Outcome of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub axis1: f64,
    pub axis2: f64,
    /// Final `|0eg>` population; NaN when the point failed.
    pub efficiency: f64,
    pub final_norm_sq: f64,
    /// Peak STIRAP-subspace leakage over the trajectory.
    pub peak_leakage: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// `None` on success, error text otherwise.
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Run provenance recorded alongside the grid.
#[derive(Debug, Clone)]
pub struct SweepMetadata {
    pub code_version: String,
    pub workers: usize,
    pub wall_time_s: f64,
}

/// All records of a completed sweep, row-major in (axis1, axis2).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis1: SweepAxis,
    pub axis2: SweepAxis,
    pub records: Vec<SweepRecord>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn record_at(&self, i: usize, j: usize) -> &SweepRecord {
        &self.records[i * self.axis2.n_points + j]
    }
}

/// Evaluate the whole grid with `workers` parallel workers.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult, SweepError> {
    run_sweep_resumable(spec, workers, &[], |_| Ok(()))
}

/// Like [`run_sweep`], but skipping any leading `existing` records that match
/// the grid (a resume prefix) and passing each newly computed record to
/// `sink` in grid order as soon as its row completes.
pub fn run_sweep_resumable(
    spec: &SweepSpec,
    workers: usize,
    existing: &[SweepRecord],
    mut sink: impl FnMut(&SweepRecord) -> Result<(), SweepError>,
) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    if workers < 1 {
        return Err(SweepError::InvalidWorkers);
    }
    let start = Instant::now();
    let a1s = spec.axis1.values();
    let a2s = spec.axis2.values();
    let n2 = a2s.len();
    let prefix = resume_prefix(&a1s, &a2s, existing);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
    let basis = Basis::new(spec.n_max)?;

    let mut records: Vec<SweepRecord> = existing[..prefix].to_vec();
    for (i, &a1) in a1s.iter().enumerate() {
        let row_start = i * n2;
        if row_start + n2 <= prefix {
            continue; // whole row already present
        }
        let todo: Vec<usize> = (0..n2).filter(|j| row_start + j >= prefix).collect();
        let computed: Vec<SweepRecord> = pool.install(|| {
            todo.par_iter()
                .map(|&j| compute_point(spec, &basis, a1, a2s[j]))
                .collect()
        });
        for rec in computed {
            sink(&rec)?;
            records.push(rec);
        }
    }

    Ok(SweepResult {
        axis1: spec.axis1,
        axis2: spec.axis2,
        records,
        metadata: SweepMetadata {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// Number of leading `existing` records that a resumed run of `spec` will
/// reuse verbatim.
pub fn matching_prefix(spec: &SweepSpec, existing: &[SweepRecord]) -> usize {
    resume_prefix(&spec.axis1.values(), &spec.axis2.values(), existing)
}

/// Number of leading `existing` records that sit exactly on the grid, in
/// row-major order. Anything after the first mismatch is ignored.
fn resume_prefix(a1s: &[f64], a2s: &[f64], existing: &[SweepRecord]) -> usize {
    let n2 = a2s.len();
    let total = a1s.len() * n2;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    for (k, rec) in existing.iter().enumerate() {
        if k >= total {
            return total;
        }
        let (i, j) = (k / n2, k % n2);
        if !close(rec.axis1, a1s[i]) || !close(rec.axis2, a2s[j]) {
            return k;
        }
    }
    existing.len().min(total)
}

fn compute_point(spec: &SweepSpec, basis: &Basis, a1: f64, a2: f64) -> SweepRecord {
    match try_point(spec, basis, a1, a2) {
        Ok(rec) => rec,
        Err(e) => SweepRecord {
            axis1: a1,
            axis2: a2,
            efficiency: f64::NAN,
            final_norm_sq: f64::NAN,
            peak_leakage: f64::NAN,
            accepted_steps: 0,
            rejected_steps: 0,
            error: Some(e.to_string()),
        },
    }
}

fn try_point(
    spec: &SweepSpec,
    basis: &Basis,
    a1: f64,
    a2: f64,
) -> Result<SweepRecord, SweepError> {
    let (params, pulses) = spec.resolve(a1, a2)?;
    let psi0: Array1<Complex64> = basis.state_vector(&spec.psi0)?;
    let grid = pulses.time_grid(spec.n_out);
    let traj = propagate(&params, &pulses, basis, &psi0, &grid, &spec.integrator)?;
    let efficiency = transfer_efficiency(&traj, basis);
    let leak = leakage(&traj, basis, LeakageMode::StirapSubspace)
        .expect("basis matches trajectory");
    let peak_leakage = leak.iter().cloned().fold(f64::MIN, f64::max);
    Ok(SweepRecord {
        axis1: a1,
        axis2: a2,
        efficiency,
        final_norm_sq: traj.final_norm_sq(),
        peak_leakage,
        accepted_steps: traj.stats.accepted,
        rejected_steps: traj.stats.rejected,
        error: None,
    })
}

/// Efficiencies along the constant-area line `T = A / g`, taking the nearest
/// T grid point for each g on the grid. Works on sweeps whose axes are
/// `g_peak` and `T` in either order.
pub fn iso_gt_slice(result: &SweepResult, area: f64) -> Result<Vec<(f64, f64)>, SweepError> {
    let (g_is_axis1, g_axis, t_axis) = match (result.axis1.param, result.axis2.param) {
        (AxisParam::GPeak, AxisParam::Width) => (true, result.axis1, result.axis2),
        (AxisParam::Width, AxisParam::GPeak) => (false, result.axis2, result.axis1),
        _ => return Err(SweepError::NotAGtSweep),
    };
    let gs = g_axis.values();
    let ts = t_axis.values();
    let t_step = if ts.len() > 1 {
        (t_axis.max - t_axis.min) / (ts.len() - 1) as f64
    } else {
        0.0
    };

    let mut out = Vec::new();
    for (gi, &g) in gs.iter().enumerate() {
        if g <= 0.0 {
            continue;
        }
        let t_target = area / g;
        if t_target < t_axis.min - 0.5 * t_step || t_target > t_axis.max + 0.5 * t_step {
            continue;
        }
        let tj = ts
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - t_target)
                    .abs()
                    .partial_cmp(&(*b - t_target).abs())
                    .expect("finite grid values")
            })
            .map(|(j, _)| j)
            .expect("nonempty axis");
        let rec = if g_is_axis1 {
            result.record_at(gi, tj)
        } else {
            result.record_at(tj, gi)
        };
        out.push((g, rec.efficiency));
    }
    if out.is_empty() {
        return Err(SweepError::SliceOutsideGrid(area));
    }
    Ok(out)
}

/// Full-precision float formatting (17 significant digits) used in every CSV
/// this crate writes, so reruns are byte-comparable.
pub fn format_full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

pub const SWEEP_CSV_HEADER: &str = "axis1,axis2,efficiency,final_norm,peak_leakage,status";

/// One CSV record line (no trailing newline).
pub fn record_csv_line(rec: &SweepRecord) -> String {
    let status = match &rec.error {
        None => "ok".to_string(),
        // Keep the line machine-splittable.
        Some(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
    };
    format!(
        "{},{},{},{},{},{}",
        format_full_precision(rec.axis1),
        format_full_precision(rec.axis2),
        format_full_precision(rec.efficiency),
        format_full_precision(rec.final_norm_sq),
        format_full_precision(rec.peak_leakage),
        status
    )
}

/// Write header plus all records.
pub fn write_csv<W: Write>(mut w: W, records: &[SweepRecord]) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for rec in records {
        writeln!(w, "{}", record_csv_line(rec))?;
    }
    Ok(())
}

/// Read records back from CSV. A malformed trailing line (torn write from an
/// interrupted run) is dropped silently; a malformed line elsewhere is an
/// error.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<SweepRecord>, SweepError> {
    let mut lines = Vec::new();
    for (k, line) in r.lines().enumerate() {
        lines.push((k + 1, line?));
    }
    let mut iter = lines.into_iter().filter(|(_, l)| !l.trim().is_empty());
    match iter.next() {
        Some((n, header)) => {
            if header.trim() != SWEEP_CSV_HEADER {
                return Err(SweepError::Csv {
                    line: n,
                    msg: format!("unexpected header {header:?}"),
                });
            }
        }
        None => return Ok(Vec::new()),
    }
    let rest: Vec<(usize, String)> = iter.collect();
    let mut records = Vec::new();
    for (pos, (n, line)) in rest.iter().enumerate() {
        match parse_record(line) {
            Some(rec) => records.push(rec),
            None if pos + 1 == rest.len() => break,
            None => {
                return Err(SweepError::Csv {
                    line: *n,
                    msg: format!("malformed record {line:?}"),
                })
            }
        }
    }
    Ok(records)
}

fn parse_record(line: &str) -> Option<SweepRecord> {
    let fields: Vec<&str> = line.splitn(6, ',').collect();
    if fields.len() != 6 {
        return None;
    }
    let num = |s: &str| s.trim().parse::<f64>().ok();
    let status = fields[5].trim();
    let error = if status == "ok" {
        None
    } else {
        Some(status.strip_prefix("failed: ").unwrap_or(status).to_string())
    };
    Some(SweepRecord {
        axis1: num(fields[0])?,
        axis2: num(fields[1])?,
        efficiency: num(fields[2])?,
        final_norm_sq: num(fields[3])?,
        peak_leakage: num(fields[4])?,
        accepted_steps: 0,
        rejected_steps: 0,
        error,
    })
}
