//! Truncated product Hilbert space for two qubits and one bosonic mode, and
//! the elementary operators acting on it.
//!
//! Basis states are labeled `|n, q2, q1>` with `n` the photon number and
//! `q1`, `q2` the two qubit states. The canonical index of a label is
//! `4*n + 2*q2 + q1` with `g -> 0`, `e -> 1`; this ordering is fixed so that
//! state vectors and output columns are stable everywhere.
//!
//! Sign conventions: `sigma_3 |g> = +|g>`, `sigma_3 |e> = -|e>`, and the
//! raising operator moves `g -> e`, so a qubit term `-eps/2 * sigma_3` makes
//! `|e>` the higher-energy state.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use thiserror::Error;

/// Maximum allowed Hermiticity deviation for operators flagged Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HilbertError {
    #[error("Fock cutoff n_max must be at least 1, got {0}")]
    InvalidCutoff(usize),
    #[error("label {0} does not fit in a basis with n_max = {1}")]
    UnknownLabel(StateLabel, usize),
    #[error("operator flagged Hermitian deviates from M = M^dagger by {0:.3e}")]
    NotHermitian(f64),
    #[error("dimension mismatch: operator dim {op} vs vector/basis dim {other}")]
    DimensionMismatch { op: usize, other: usize },
    #[error("state amplitudes have zero norm")]
    ZeroState,
}

/// One of the two qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qubit {
    One,
    Two,
}

/// Single-qubit basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QubitState {
    Ground,
    Excited,
}

impl QubitState {
    fn bit(self) -> usize {
        match self {
            QubitState::Ground => 0,
            QubitState::Excited => 1,
        }
    }

    /// Eigenvalue of sigma_3: +1 for `|g>`, -1 for `|e>`.
    pub fn sigma3_eigenvalue(self) -> f64 {
        match self {
            QubitState::Ground => 1.0,
            QubitState::Excited => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            QubitState::Ground => 'g',
            QubitState::Excited => 'e',
        }
    }
}

/// Label of a product basis state `|n, q2, q1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateLabel {
    pub n: usize,
    pub q2: QubitState,
    pub q1: QubitState,
}

impl StateLabel {
    pub fn new(n: usize, q2: QubitState, q1: QubitState) -> Self {
        Self { n, q2, q1 }
    }

    /// Total excitation number: photons plus excited qubits.
    pub fn excitation_number(&self) -> usize {
        self.n + self.q2.bit() + self.q1.bit()
    }

    /// Parity eigenvalue `(-1)^N`.
    pub fn parity(&self) -> f64 {
        if self.excitation_number().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "|{}{}{}>", self.n, self.q2.symbol(), self.q1.symbol())
    }
}

/// Convenience constructor, e.g. `label(0, 'g', 'e')` for `|0ge>`.
///
/// Panics on characters other than 'g'/'e'; intended for literals in tests
/// and fixed observable definitions.
pub fn label(n: usize, q2: char, q1: char) -> StateLabel {
    let conv = |c: char| match c {
        'g' => QubitState::Ground,
        'e' => QubitState::Excited,
        _ => panic!("qubit state must be 'g' or 'e', got {c:?}"),
    };
    StateLabel::new(n, conv(q2), conv(q1))
}

/// Truncated product basis `{|n, q2, q1>}` with `n <= n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    n_max: usize,
    dim: usize,
    states: Vec<StateLabel>,
}

impl Basis {
    /// Build the basis for photon numbers `0..=n_max`. Requires `n_max >= 1`
    /// so that the one-photon intermediate state exists.
    pub fn new(n_max: usize) -> Result<Self, HilbertError> {
        if n_max < 1 {
            return Err(HilbertError::InvalidCutoff(n_max));
        }
        let dim = 4 * (n_max + 1);
        let qs = [QubitState::Ground, QubitState::Excited];
        let mut states = Vec::with_capacity(dim);
        for n in 0..=n_max {
            for q2 in qs {
                for q1 in qs {
                    states.push(StateLabel::new(n, q2, q1));
                }
            }
        }
        Ok(Self { n_max, dim, states })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[StateLabel] {
        &self.states
    }

    /// Canonical position of a label, `None` if `n > n_max`.
    pub fn index_of(&self, label: StateLabel) -> Option<usize> {
        (label.n <= self.n_max).then(|| 4 * label.n + 2 * label.q2.bit() + label.q1.bit())
    }

    pub fn label_at(&self, index: usize) -> StateLabel {
        self.states[index]
    }

    /// Unit vector for a single basis state.
    pub fn unit_state(&self, label: StateLabel) -> Result<Array1<Complex64>, HilbertError> {
        let idx = self
            .index_of(label)
            .ok_or(HilbertError::UnknownLabel(label, self.n_max))?;
        let mut v = Array1::zeros(self.dim);
        v[idx] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    /// Normalized superposition of basis states from (label, amplitude) pairs.
    pub fn state_vector(
        &self,
        amplitudes: &[(StateLabel, Complex64)],
    ) -> Result<Array1<Complex64>, HilbertError> {
        let mut v: Array1<Complex64> = Array1::zeros(self.dim);
        for &(lbl, amp) in amplitudes {
            let idx = self
                .index_of(lbl)
                .ok_or(HilbertError::UnknownLabel(lbl, self.n_max))?;
            v[idx] += amp;
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(HilbertError::ZeroState);
        }
        v.mapv_inplace(|z| z / norm);
        Ok(v)
    }
}

/// Dense operator over a truncated basis, with an optional Hermiticity
/// assertion checked at construction.
#[derive(Debug, Clone)]
pub struct Operator {
    matrix: Array2<Complex64>,
    hermitian: bool,
}

impl Operator {
    /// Wrap a square matrix. If `hermitian` is set, the matrix must satisfy
    /// `max |M - M^dagger| < 1e-12`.
    pub fn new(matrix: Array2<Complex64>, hermitian: bool) -> Result<Self, HilbertError> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(HilbertError::DimensionMismatch { op: r, other: c });
        }
        if hermitian {
            let dev = hermiticity_deviation(&matrix.view());
            if dev >= HERMITICITY_TOL {
                return Err(HilbertError::NotHermitian(dev));
            }
        }
        Ok(Self { matrix, hermitian })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Matrix-vector product `M psi`.
    pub fn apply(&self, psi: &ArrayView1<Complex64>) -> Result<Array1<Complex64>, HilbertError> {
        if psi.len() != self.dim() {
            return Err(HilbertError::DimensionMismatch {
                op: self.dim(),
                other: psi.len(),
            });
        }
        Ok(self.matrix.dot(psi))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        let adj = self.matrix.t().mapv(|z| z.conj());
        Operator {
            matrix: adj,
            hermitian: self.hermitian,
        }
    }
}

/// Largest entry modulus; handy for operator-identity checks.
pub fn max_abs(m: &ArrayView2<Complex64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

fn hermiticity_deviation(m: &ArrayView2<Complex64>) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Photon annihilation operator: `a |n, q2, q1> = sqrt(n) |n-1, q2, q1>`.
pub fn annihilation(basis: &Basis) -> Operator {
    let dim = basis.dim();
    let mut m = Array2::zeros((dim, dim));
    for (col, lbl) in basis.states().iter().enumerate() {
        if lbl.n > 0 {
            let target = StateLabel::new(lbl.n - 1, lbl.q2, lbl.q1);
            let row = basis.index_of(target).expect("target within cutoff");
            m[[row, col]] = Complex64::new((lbl.n as f64).sqrt(), 0.0);
        }
    }
    Operator {
        matrix: m,
        hermitian: false,
    }
}

/// Photon creation operator, the adjoint of [`annihilation`].
pub fn creation(basis: &Basis) -> Operator {
    annihilation(basis).dagger()
}

/// Kind of single-qubit operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitOpKind {
    /// `sigma_3`: +1 on `|g>`, -1 on `|e>`.
    Sigma3,
    /// `sigma_+`: `|e><g|` on the chosen qubit.
    SigmaPlus,
    /// `sigma_-`: `|g><e|` on the chosen qubit.
    SigmaMinus,
}

/// Operator acting on one qubit factor, identity on the rest.
pub fn qubit_op(basis: &Basis, which: Qubit, kind: QubitOpKind) -> Operator {
    let dim = basis.dim();
    let mut m = Array2::zeros((dim, dim));
    let one = Complex64::new(1.0, 0.0);
    for (col, lbl) in basis.states().iter().enumerate() {
        let state = match which {
            Qubit::One => lbl.q1,
            Qubit::Two => lbl.q2,
        };
        match kind {
            QubitOpKind::Sigma3 => {
                m[[col, col]] = Complex64::new(state.sigma3_eigenvalue(), 0.0);
            }
            QubitOpKind::SigmaPlus => {
                if state == QubitState::Ground {
                    let target = flip(*lbl, which, QubitState::Excited);
                    m[[basis.index_of(target).unwrap(), col]] = one;
                }
            }
            QubitOpKind::SigmaMinus => {
                if state == QubitState::Excited {
                    let target = flip(*lbl, which, QubitState::Ground);
                    m[[basis.index_of(target).unwrap(), col]] = one;
                }
            }
        }
    }
    let hermitian = kind == QubitOpKind::Sigma3;
    Operator { matrix: m, hermitian }
}

fn flip(lbl: StateLabel, which: Qubit, to: QubitState) -> StateLabel {
    match which {
        Qubit::One => StateLabel::new(lbl.n, lbl.q2, to),
        Qubit::Two => StateLabel::new(lbl.n, to, lbl.q1),
    }
}

/// Total excitation number `N = a^dagger a + sum_i (1 - sigma_3^i) / 2`,
/// diagonal in the canonical basis.
pub fn number_op(basis: &Basis) -> Operator {
    let dim = basis.dim();
    let mut m = Array2::zeros((dim, dim));
    for (i, lbl) in basis.states().iter().enumerate() {
        m[[i, i]] = Complex64::new(lbl.excitation_number() as f64, 0.0);
    }
    Operator {
        matrix: m,
        hermitian: true,
    }
}

/// Z2 parity `exp(i pi N)`: diagonal with eigenvalues `(-1)^N`.
pub fn parity_op(basis: &Basis) -> Operator {
    let dim = basis.dim();
    let mut m = Array2::zeros((dim, dim));
    for (i, lbl) in basis.states().iter().enumerate() {
        m[[i, i]] = Complex64::new(lbl.parity(), 0.0);
    }
    Operator {
        matrix: m,
        hermitian: true,
    }
}
