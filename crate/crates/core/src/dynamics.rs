//! Pulse schedules and time-dependent Hamiltonian assembly.
//!
//! The Hamiltonian is
//!
//! ```text
//! H(t) = (w_c - i k) a^dag a - 1/2 sum_i eps_i sigma_3^i
//!        + sum_i g_i(t) (a^dag sigma_-^i + a sigma_+^i)          (rotating)
//!        + sum_i g_i(t) (a sigma_-^i + a^dag sigma_+^i)          (counterrotating)
//! ```
//!
//! with the counterrotating sum present only for [`ModelVariant::FullRabi`].
//! The couplings are Gaussian pulses in the counterintuitive order: the
//! qubit-2 pulse peaks at `-tau`, the qubit-1 pulse at `+tau`, `tau > 0`.
//!
//! Cavity loss enters through the replacement `w_c -> w_c - i kappa` on the
//! photon term, making `H` non-Hermitian for `kappa > 0`.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use thiserror::Error;

use crate::hilbert::{annihilation, creation, qubit_op, Basis, Operator, QubitOpKind};

pub use crate::hilbert::Qubit;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("pulse width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("pulse delay must be positive, got {0}")]
    InvalidDelay(f64),
    #[error("peak coupling must be non-negative, got {0}")]
    InvalidPeak(f64),
    #[error("protocol window ({0}, {1}) does not contain both pulse centers (-tau, +tau) = (-{2}, {2})")]
    WindowExcludesPulses(f64, f64, f64),
    #[error("protocol window must have t_start < t_end, got ({0}, {1})")]
    EmptyWindow(f64, f64),
    #[error("cavity loss rate must be non-negative, got {0}")]
    NegativeKappa(f64),
    #[error("state vector length {0} does not match basis dimension {1}")]
    DimensionMismatch(usize, usize),
}

/// Whether counterrotating coupling terms are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    /// Rotating-wave approximation; conserves total excitation number.
    Rwa,
    /// Full Rabi coupling including counterrotating terms.
    FullRabi,
}

/// Physical parameters of the two-qubit/one-mode system, in units of the
/// cavity frequency.
///
/// The qubit splittings are derived quantities:
/// `eps_1 = omega_c + delta_p` and `eps_2 = eps_1 - delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Cavity frequency; sets the unit and is 1.0 in every standard run.
    pub omega_c: f64,
    /// Single-photon detuning `eps_1 - omega_c`.
    pub delta_p: f64,
    /// Two-photon detuning `eps_1 - eps_2`.
    pub delta: f64,
    /// Cavity loss rate; enters as `omega_c -> omega_c - i kappa`.
    pub kappa: f64,
    pub variant: ModelVariant,
    /// Use `-i kappa/2 a^dag a` instead of the literal `-i kappa a^dag a`.
    /// Off by default; the literal frequency replacement is the reference
    /// convention throughout.
    pub loss_halving: bool,
}

impl SystemParams {
    /// Lossless resonant system (`delta = delta_p = kappa = 0`).
    pub fn resonant(variant: ModelVariant) -> Self {
        Self {
            omega_c: 1.0,
            delta_p: 0.0,
            delta: 0.0,
            kappa: 0.0,
            variant,
            loss_halving: false,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_detunings(mut self, delta: f64, delta_p: f64) -> Self {
        self.delta = delta;
        self.delta_p = delta_p;
        self
    }

    /// Qubit splittings `(eps_1, eps_2)` implied by the detunings.
    pub fn energy_splittings(&self) -> (f64, f64) {
        let eps1 = self.omega_c + self.delta_p;
        let eps2 = eps1 - self.delta;
        (eps1, eps2)
    }

    /// Effective loss rate on the photon-number term.
    pub fn effective_kappa(&self) -> f64 {
        if self.loss_halving {
            self.kappa / 2.0
        } else {
            self.kappa
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(DynamicsError::NegativeKappa(self.kappa));
        }
        Ok(())
    }
}

/// The two Gaussian coupling envelopes of the transfer protocol.
///
/// `g2(t) = g_peak exp(-((t + tau)/width)^2)` peaks first (at `-tau`),
/// `g1(t) = g_peak exp(-((t - tau)/width)^2)` second (at `+tau`).
/// Envelopes are never truncated to zero outside the window; the window
/// margin keeps edge values negligible instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePair {
    g_peak: f64,
    width: f64,
    tau: f64,
    t_span: (f64, f64),
}

impl PulsePair {
    /// Margin (in units of `width`) recommended between each pulse center and
    /// the nearer window edge. At 2 widths the edge envelope is `<= e^-4`.
    pub const RECOMMENDED_MARGIN_WIDTHS: f64 = 2.0;

    pub fn new(g_peak: f64, width: f64, tau: f64, t_span: (f64, f64)) -> Result<Self, DynamicsError> {
        if !width.is_finite() || width <= 0.0 {
            return Err(DynamicsError::InvalidWidth(width));
        }
        if !tau.is_finite() || tau <= 0.0 {
            return Err(DynamicsError::InvalidDelay(tau));
        }
        if !g_peak.is_finite() || g_peak < 0.0 {
            return Err(DynamicsError::InvalidPeak(g_peak));
        }
        let (t0, t1) = t_span;
        if !t0.is_finite() || !t1.is_finite() || t0 >= t1 {
            return Err(DynamicsError::EmptyWindow(t0, t1));
        }
        if t0 > -tau || t1 < tau {
            return Err(DynamicsError::WindowExcludesPulses(t0, t1, tau));
        }
        let pulses = Self {
            g_peak,
            width,
            tau,
            t_span,
        };
        if !pulses.has_recommended_margin() {
            log::warn!(
                "protocol window ({t0}, {t1}) leaves less than {}T margin around the pulse \
                 centers +-{tau}; envelope values at the edges may not be negligible",
                Self::RECOMMENDED_MARGIN_WIDTHS
            );
        }
        Ok(pulses)
    }

    /// Pulses on the default window `(-tau - 3 width, tau + 3 width)`, whose
    /// edge envelopes are `<= e^-9 g_peak`.
    pub fn with_default_span(g_peak: f64, width: f64, tau: f64) -> Result<Self, DynamicsError> {
        let span = (-tau - 3.0 * width, tau + 3.0 * width);
        Self::new(g_peak, width, tau, span)
    }

    /// Both pulse centers at least [`Self::RECOMMENDED_MARGIN_WIDTHS`] widths
    /// away from the window edges.
    pub fn has_recommended_margin(&self) -> bool {
        let m = Self::RECOMMENDED_MARGIN_WIDTHS * self.width;
        self.t_span.0 <= -self.tau - m && self.t_span.1 >= self.tau + m
    }

    pub fn g_peak(&self) -> f64 {
        self.g_peak
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_span(&self) -> (f64, f64) {
        self.t_span
    }

    pub fn t_start(&self) -> f64 {
        self.t_span.0
    }

    pub fn t_end(&self) -> f64 {
        self.t_span.1
    }

    /// Envelope of the coupling to the given qubit at time `t`.
    pub fn value(&self, which: Qubit, t: f64) -> f64 {
        let center = match which {
            Qubit::One => self.tau,
            Qubit::Two => -self.tau,
        };
        let x = (t - center) / self.width;
        self.g_peak * (-x * x).exp()
    }

    /// Uniform grid of `n` output times covering the window endpoints.
    pub fn time_grid(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2, "need at least the two window endpoints");
        let (t0, t1) = self.t_span;
        let dt = (t1 - t0) / (n - 1) as f64;
        let mut ts: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
        ts[n - 1] = t1;
        ts
    }
}

/// Time-dependent Hamiltonian with precomputed static and coupling parts.
///
/// Assembly at a given time costs a few scalar-weighted matrix additions;
/// applying to a state costs one fused pass over the three cached matrices.
/// Immutable after construction, safe to share across sweep workers.
#[derive(Debug, Clone)]
pub struct RabiHamiltonian {
    dim: usize,
    kappa_eff: f64,
    /// `(w_c - i k_eff) a^dag a - 1/2 (eps_1 sigma_3^1 + eps_2 sigma_3^2)`.
    static_part: Array2<Complex64>,
    /// Coupling operator per qubit (index 0 -> qubit 1).
    coupling: [Array2<Complex64>; 2],
}

impl RabiHamiltonian {
    pub fn new(params: &SystemParams, basis: &Basis) -> Result<Self, DynamicsError> {
        params.validate()?;
        let a = annihilation(basis);
        let ad = creation(basis);
        let (eps1, eps2) = params.energy_splittings();
        let kappa_eff = params.effective_kappa();

        let number = ad.matrix().dot(a.matrix());
        let mode_coeff = Complex64::new(params.omega_c, -kappa_eff);
        let mut static_part = number.mapv(|z| z * mode_coeff);
        let s31 = qubit_op(basis, Qubit::One, QubitOpKind::Sigma3);
        let s32 = qubit_op(basis, Qubit::Two, QubitOpKind::Sigma3);
        static_part = static_part
            - s31.matrix().mapv(|z| z * Complex64::new(0.5 * eps1, 0.0))
            - s32.matrix().mapv(|z| z * Complex64::new(0.5 * eps2, 0.0));

        let coupling = [Qubit::One, Qubit::Two].map(|q| {
            let sm = qubit_op(basis, q, QubitOpKind::SigmaMinus);
            let sp = qubit_op(basis, q, QubitOpKind::SigmaPlus);
            let mut c = ad.matrix().dot(sm.matrix()) + a.matrix().dot(sp.matrix());
            if params.variant == ModelVariant::FullRabi {
                c = c + a.matrix().dot(sm.matrix()) + ad.matrix().dot(sp.matrix());
            }
            c
        });

        Ok(Self {
            dim: basis.dim(),
            kappa_eff,
            static_part,
            coupling,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Full matrix `H(t)`; Hermitian-flagged iff the system is lossless.
    pub fn assemble(&self, pulses: &PulsePair, t: f64) -> Operator {
        let g1 = Complex64::new(pulses.value(Qubit::One, t), 0.0);
        let g2 = Complex64::new(pulses.value(Qubit::Two, t), 0.0);
        let m = &self.static_part
            + &self.coupling[0].mapv(|z| z * g1)
            + &self.coupling[1].mapv(|z| z * g2);
        Operator::new(m, self.kappa_eff == 0.0)
            .expect("assembled Hamiltonian violates its Hermiticity flag")
    }

    /// `out = scale * H(t) * psi` in one fused pass.
    pub fn apply_scaled_into(
        &self,
        pulses: &PulsePair,
        t: f64,
        scale: Complex64,
        psi: &ArrayView1<Complex64>,
        out: &mut Array1<Complex64>,
    ) -> Result<(), DynamicsError> {
        let dim = self.dim;
        if psi.len() != dim || out.len() != dim {
            return Err(DynamicsError::DimensionMismatch(psi.len(), dim));
        }
        let g1 = Complex64::new(pulses.value(Qubit::One, t), 0.0);
        let g2 = Complex64::new(pulses.value(Qubit::Two, t), 0.0);
        let s = self.static_part.as_slice().expect("contiguous");
        let c1 = self.coupling[0].as_slice().expect("contiguous");
        let c2 = self.coupling[1].as_slice().expect("contiguous");
        let x = psi.as_slice().expect("contiguous");
        let y = out.as_slice_mut().expect("contiguous");
        for (i, y_i) in y.iter_mut().enumerate() {
            let row = i * dim;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..dim {
                let h = s[row + j] + g1 * c1[row + j] + g2 * c2[row + j];
                acc += h * x[j];
            }
            *y_i = scale * acc;
        }
        Ok(())
    }
}

/// One-off Hamiltonian assembly; for repeated evaluation construct a
/// [`RabiHamiltonian`] once and reuse it.
pub fn assemble_hamiltonian(
    params: &SystemParams,
    pulses: &PulsePair,
    t: f64,
    basis: &Basis,
) -> Result<Operator, DynamicsError> {
    Ok(RabiHamiltonian::new(params, basis)?.assemble(pulses, t))
}
