//! Time evolution of a state vector under the time-dependent (possibly
//! non-Hermitian) Hamiltonian.
//!
//! Three layers:
//! - [`propagate`]: adaptive Dormand-Prince 5(4) integration of
//!   `i d psi / dt = H(t) psi`, with PI step-size control, exact landing on
//!   requested output times, and norm-law enforcement;
//! - [`propagate_oracle`]: piecewise-constant midpoint rule, one dense matrix
//!   exponential per slice; converges to the true evolution at second order
//!   in the slice width and serves as an independent check on `propagate`;
//! - [`converge_cutoff`]: ladder search for a Fock cutoff at which a chosen
//!   observable has stopped changing.
//!
//! The state is never renormalized. For `kappa = 0` the squared norm must
//! stay within `norm_tol` of one; for `kappa > 0` it must be non-increasing.
//! Violations are reported as errors rather than silently accepted.

use ndarray::Array1;
use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{DynamicsError, PulsePair, RabiHamiltonian, SystemParams};
use crate::expm::matrix_exp;
use crate::hilbert::{Basis, HilbertError, StateLabel};

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("initial state norm is {0}, expected 1 within 1e-10")]
    UnnormalizedInitialState(f64),
    #[error("output grid needs at least two times")]
    EmptyOutputGrid,
    #[error("output times must be strictly increasing (index {0})")]
    OutputTimesNotIncreasing(usize),
    #[error("output times must cover the protocol window ({0}, {1}) exactly at both ends")]
    OutputTimesNotCoveringWindow(f64, f64),
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("exceeded {max} integration steps at t = {t}")]
    MaxStepsExceeded { t: f64, max: usize },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("norm drift at t = {t}: |psi|^2 = {norm_sq} deviates from 1 beyond {tol:.1e}")]
    NormDrift { t: f64, norm_sq: f64, tol: f64 },
    #[error("squared norm increased under loss at t = {t}: {prev} -> {next}")]
    NormIncrease { t: f64, prev: f64, next: f64 },
    #[error("oracle slice count must be at least 1")]
    InvalidSliceCount,
    #[error("observable did not converge in the cutoff ladder up to n_max = {max}: {ladder:?}")]
    NoCutoffConvergence {
        max: usize,
        ladder: Vec<(usize, f64)>,
    },
}

/// Integrator controls. Defaults are tuned so that all standard runs keep
/// `|psi|^2` constant to well below 1e-8 when lossless. The binding case is
/// a bare energy eigenstate (e.g. the joint ground state), whose full-speed
/// phase rotation accumulates secular norm error in any explicit
/// Runge-Kutta scheme; the drift scales linearly with rtol and reaches
/// ~5e-9 per 500 time units at rtol = 1e-11.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOpts {
    /// Relative tolerance of the embedded error estimate.
    pub rtol: f64,
    /// Absolute tolerance floor.
    pub atol: f64,
    /// Hard cap on accepted+rejected steps per trajectory.
    pub max_steps: usize,
    /// Allowed deviation of `|psi|^2` from 1 for lossless runs.
    pub norm_tol: f64,
}

impl Default for IntegratorOpts {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-12,
            max_steps: 10_000_000,
            norm_tol: 1e-8,
        }
    }
}

/// Counters from one adaptive integration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest weighted local error estimate among accepted steps
    /// (1.0 means exactly at tolerance).
    pub max_error_estimate: f64,
}

/// Time evolution sampled on the requested output grid. States are the raw
/// integrator output: unnormalized whenever the evolution is lossy.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array1<Complex64>>,
    /// Squared norm at each output time.
    pub norm_sq: Vec<f64>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &Array1<Complex64> {
        self.states.last().expect("trajectory has output points")
    }

    pub fn final_norm_sq(&self) -> f64 {
        *self.norm_sq.last().expect("trajectory has output points")
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// The last row of `A` doubles as the 5th-order weights (FSAL).
/// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// PI controller constants (Hairer's DOPRI5 defaults).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const MAX_SHRINK: f64 = 5.0; // h may shrink at most to h/5 per step
const MAX_GROWTH: f64 = 10.0; // and grow at most to 10 h

struct Derivative<'a> {
    hamiltonian: &'a RabiHamiltonian,
    pulses: &'a PulsePair,
}

impl Derivative<'_> {
    /// `out = -i H(t) y`.
    fn eval(&self, t: f64, y: &Array1<Complex64>, out: &mut Array1<Complex64>) {
        self.hamiltonian
            .apply_scaled_into(self.pulses, t, Complex64::new(0.0, -1.0), &y.view(), out)
            .expect("dimension checked at setup");
    }
}

fn norm_sq(y: &Array1<Complex64>) -> f64 {
    y.iter().map(|z| z.norm_sqr()).sum()
}

/// Weighted RMS of the error estimate against `atol + rtol * max(|y|, |y_new|)`.
fn error_norm(
    err: &Array1<Complex64>,
    y: &Array1<Complex64>,
    y_new: &Array1<Complex64>,
    opts: &IntegratorOpts,
) -> f64 {
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
        let r = err[i].norm() / sc;
        acc += r * r;
    }
    (acc / n as f64).sqrt()
}

/// Initial step size heuristic (Hairer, Norsett & Wanner II.4).
fn initial_step(
    f: &Derivative,
    t0: f64,
    y0: &Array1<Complex64>,
    f0: &Array1<Complex64>,
    span: f64,
    opts: &IntegratorOpts,
) -> f64 {
    let wrms = |v: &Array1<Complex64>, y: &Array1<Complex64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..v.len() {
            let sc = opts.atol + opts.rtol * y[i].norm();
            let r = v[i].norm() / sc;
            acc += r * r;
        }
        (acc / v.len() as f64).sqrt()
    };
    let d0 = wrms(y0, y0);
    let d1 = wrms(f0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);

    let y1 = y0 + &f0.mapv(|z| z * Complex64::new(h0, 0.0));
    let mut f1 = Array1::zeros(y0.len());
    f.eval(t0 + h0, &y1, &mut f1);
    let d2 = wrms(&(&f1 - f0), y0) / h0;

    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate `i d psi / dt = H(t) psi` across the protocol window, reporting
/// the state exactly at each requested output time.
///
/// Requirements: `|psi0| = 1` within 1e-10; `out_times` strictly increasing
/// and matching the window endpoints (use [`PulsePair::time_grid`]).
pub fn propagate(
    params: &SystemParams,
    pulses: &PulsePair,
    basis: &Basis,
    psi0: &Array1<Complex64>,
    out_times: &[f64],
    opts: &IntegratorOpts,
) -> Result<Trajectory, PropagatorError> {
    let hamiltonian = RabiHamiltonian::new(params, basis)?;
    if psi0.len() != basis.dim() {
        return Err(DynamicsError::DimensionMismatch(psi0.len(), basis.dim()).into());
    }
    let n0 = norm_sq(psi0).sqrt();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(PropagatorError::UnnormalizedInitialState(n0));
    }
    validate_out_times(out_times, pulses.t_span())?;

    let f = Derivative {
        hamiltonian: &hamiltonian,
        pulses,
    };
    let dim = basis.dim();
    let span = pulses.t_end() - pulses.t_start();
    let lossless = params.effective_kappa() == 0.0;

    let mut t = out_times[0];
    let mut y = psi0.clone();
    let mut k: Vec<Array1<Complex64>> = (0..7).map(|_| Array1::zeros(dim)).collect();
    let mut y_stage: Array1<Complex64> = Array1::zeros(dim);
    let mut y_new: Array1<Complex64> = Array1::zeros(dim);
    let mut err_vec: Array1<Complex64> = Array1::zeros(dim);

    let mut stats = StepStats::default();
    let mut states = Vec::with_capacity(out_times.len());
    let mut norms = Vec::with_capacity(out_times.len());

    let record = |states: &mut Vec<Array1<Complex64>>,
                  norms: &mut Vec<f64>,
                  t: f64,
                  y: &Array1<Complex64>|
     -> Result<(), PropagatorError> {
        let ns = norm_sq(y);
        if lossless {
            if (ns - 1.0).abs() > opts.norm_tol {
                return Err(PropagatorError::NormDrift {
                    t,
                    norm_sq: ns,
                    tol: opts.norm_tol,
                });
            }
        } else if let Some(&prev) = norms.last() {
            if ns > prev + 1e-10 {
                return Err(PropagatorError::NormIncrease {
                    t,
                    prev,
                    next: ns,
                });
            }
        }
        states.push(y.clone());
        norms.push(ns);
        Ok(())
    };

    f.eval(t, &y, &mut k[0]);
    record(&mut states, &mut norms, t, &y)?;

    let mut h = initial_step(&f, t, &y, &k[0], span, opts);
    let mut facold: f64 = 1e-4;
    let tiny = 1e-14 * span.max(1.0);

    for &target in &out_times[1..] {
        while t < target - tiny {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(PropagatorError::MaxStepsExceeded {
                    t,
                    max: opts.max_steps,
                });
            }
            let clamped = t + h >= target - tiny;
            let h_step = if clamped { target - t } else { h };
            if h_step.abs() < tiny {
                return Err(PropagatorError::StepSizeUnderflow { t, h: h_step });
            }

            // Stages 2..=6 (k[0] holds f(t, y) via FSAL).
            for s in 1..6 {
                y_stage.assign(&y);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        let w = Complex64::new(h_step * a, 0.0);
                        y_stage.zip_mut_with(kj, |ys, kv| *ys += w * kv);
                    }
                }
                let t_stage = t + C[s] * h_step;
                f.eval(t_stage, &y_stage, &mut k[s]);
            }
            // The last tableau row is the 5th-order solution itself.
            y_new.assign(&y);
            for (j, kj) in k.iter().enumerate().take(6) {
                let a = A[6][j];
                if a != 0.0 {
                    let w = Complex64::new(h_step * a, 0.0);
                    y_new.zip_mut_with(kj, |yn, kv| *yn += w * kv);
                }
            }
            f.eval(t + h_step, &y_new, &mut k[6]);

            err_vec.fill(Complex64::new(0.0, 0.0));
            for (j, kj) in k.iter().enumerate() {
                let e = E[j];
                if e != 0.0 {
                    let w = Complex64::new(h_step * e, 0.0);
                    err_vec.zip_mut_with(kj, |ev, kv| *ev += w * kv);
                }
            }
            let err = error_norm(&err_vec, &y, &y_new, opts);
            if !err.is_finite() {
                return Err(PropagatorError::NonFiniteState { t });
            }

            // PI step-size controller.
            let fac11 = err.powf(EXPO1);
            let fac = (fac11 / facold.powf(BETA) / SAFETY)
                .clamp(1.0 / MAX_GROWTH, MAX_SHRINK);
            let h_next = h_step / fac;

            if err <= 1.0 {
                stats.accepted += 1;
                stats.max_error_estimate = stats.max_error_estimate.max(err);
                facold = err.max(1e-4);
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6); // FSAL: f at the new point becomes stage one
                t = if clamped { target } else { t + h_step };
                if y.iter().any(|z| !z.is_finite()) {
                    return Err(PropagatorError::NonFiniteState { t });
                }
                // Keep the controller's proposal; never shrink because of a
                // window-landing clamp.
                h = if clamped { h.max(h_next) } else { h_next };
            } else {
                stats.rejected += 1;
                h = h_step / (fac11 / SAFETY).min(MAX_SHRINK);
                if h.abs() < tiny {
                    return Err(PropagatorError::StepSizeUnderflow { t, h });
                }
            }
        }
        t = target;
        record(&mut states, &mut norms, t, &y)?;
    }

    Ok(Trajectory {
        times: out_times.to_vec(),
        states,
        norm_sq: norms,
        stats,
    })
}

fn validate_out_times(out_times: &[f64], t_span: (f64, f64)) -> Result<(), PropagatorError> {
    if out_times.len() < 2 {
        return Err(PropagatorError::EmptyOutputGrid);
    }
    for i in 1..out_times.len() {
        if out_times[i] <= out_times[i - 1] {
            return Err(PropagatorError::OutputTimesNotIncreasing(i));
        }
    }
    let span = (t_span.1 - t_span.0).max(1.0);
    let eps = 1e-12 * span;
    let first = out_times[0];
    let last = *out_times.last().expect("nonempty");
    if (first - t_span.0).abs() > eps || (last - t_span.1).abs() > eps {
        return Err(PropagatorError::OutputTimesNotCoveringWindow(
            t_span.0, t_span.1,
        ));
    }
    Ok(())
}

/// Piecewise-constant midpoint propagation: the window is cut into
/// `n_slices` equal slices and `exp(-i H(t_mid) dt)` is applied per slice via
/// a dense matrix exponential. Second-order accurate in the slice width;
/// intended as an independent oracle for tests, not for production runs.
pub fn propagate_oracle(
    params: &SystemParams,
    pulses: &PulsePair,
    basis: &Basis,
    psi0: &Array1<Complex64>,
    n_slices: usize,
) -> Result<Array1<Complex64>, PropagatorError> {
    if n_slices < 1 {
        return Err(PropagatorError::InvalidSliceCount);
    }
    let hamiltonian = RabiHamiltonian::new(params, basis)?;
    if psi0.len() != basis.dim() {
        return Err(DynamicsError::DimensionMismatch(psi0.len(), basis.dim()).into());
    }
    let (t0, t1) = pulses.t_span();
    let dt = (t1 - t0) / n_slices as f64;
    let phase = Complex64::new(0.0, -dt);

    let mut psi = psi0.clone();
    for s in 0..n_slices {
        let t_mid = t0 + (s as f64 + 0.5) * dt;
        let h = hamiltonian.assemble(pulses, t_mid);
        let u = matrix_exp(&h.matrix().mapv(|z| z * phase));
        psi = u.dot(&psi);
    }
    Ok(psi)
}

/// Outcome of the Fock-cutoff ladder search.
#[derive(Debug, Clone)]
pub struct CutoffResult {
    /// First cutoff whose observable agrees with the previous ladder level.
    pub n_max: usize,
    /// Observable value at that cutoff.
    pub value: f64,
    /// All `(n_max, value)` pairs evaluated, in ladder order.
    pub ladder: Vec<(usize, f64)>,
}

/// Highest cutoff attempted by [`converge_cutoff`].
pub const MAX_CUTOFF: usize = 32;

/// Number of output times used for trajectories inside the ladder search,
/// enough for series observables such as peak leakage.
pub const CUTOFF_GRID_POINTS: usize = 201;

/// Walk the cutoff ladder `start, start+4, start+8, ...` and return the first
/// level whose observable differs from the previous one by less than
/// `rel_tol` (measured against `max(1, |value|)`).
///
/// The initial state is rebuilt at every level from `(label, amplitude)`
/// pairs and normalized.
pub fn converge_cutoff<F>(
    params: &SystemParams,
    pulses: &PulsePair,
    psi0: &[(StateLabel, Complex64)],
    start_nmax: usize,
    rel_tol: f64,
    opts: &IntegratorOpts,
    observable: F,
) -> Result<CutoffResult, PropagatorError>
where
    F: Fn(&Trajectory, &Basis) -> f64,
{
    let out_of = |n_max: usize| -> Result<f64, PropagatorError> {
        let basis = Basis::new(n_max)?;
        let psi = basis.state_vector(psi0)?;
        let grid = pulses.time_grid(CUTOFF_GRID_POINTS);
        let traj = propagate(params, pulses, &basis, &psi, &grid, opts)?;
        Ok(observable(&traj, &basis))
    };

    let mut ladder = Vec::new();
    let mut prev = out_of(start_nmax)?;
    ladder.push((start_nmax, prev));
    let mut n = start_nmax + 4;
    while n <= MAX_CUTOFF {
        let value = out_of(n)?;
        ladder.push((n, value));
        let scale = value.abs().max(1.0);
        if (value - prev).abs() < rel_tol * scale {
            return Ok(CutoffResult {
                n_max: n,
                value,
                ladder,
            });
        }
        prev = value;
        n += 4;
    }
    Err(PropagatorError::NoCutoffConvergence {
        max: MAX_CUTOFF,
        ladder,
    })
}
