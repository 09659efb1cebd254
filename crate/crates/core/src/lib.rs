//! Simulation of adiabatic population transfer between two qubits coupled to
//! a common (lossy) cavity mode.
//!
//! The model is two two-level systems coupled to a single quantized mode with
//! Gaussian-pulsed coupling strengths, either in the rotating-wave
//! approximation or with the counterrotating terms retained. Cavity loss is
//! modeled by an imaginary shift of the mode frequency, giving a
//! non-Hermitian effective Hamiltonian; the state is never renormalized, so
//! lost norm represents photons leaving the cavity.
//!
//! Modules:
//! - [`hilbert`]: truncated product basis and elementary operators
//! - [`dynamics`]: pulse schedules and time-dependent Hamiltonian assembly
//! - [`propagator`]: adaptive Runge-Kutta time evolution, a matrix-exponential
//!   oracle, and a Fock-cutoff convergence search
//! - [`observables`]: populations, transfer efficiency, subspace leakage
//! - [`sweep`]: parallel parameter-grid runs with resumable CSV output
//!
//! All quantities are expressed in units of the cavity frequency.

pub mod dynamics;
pub mod expm;
pub mod hilbert;
pub mod observables;
pub mod propagator;
pub mod sweep;

pub use dynamics::{ModelVariant, PulsePair, Qubit, RabiHamiltonian, SystemParams};
pub use hilbert::{Basis, Operator, QubitState, StateLabel};
pub use observables::{transfer_efficiency, LeakageMode, PopulationSeries};
pub use propagator::{converge_cutoff, propagate, propagate_oracle, IntegratorOpts, Trajectory};
pub use sweep::{iso_gt_slice, run_sweep, SweepAxis, SweepRecord, SweepResult, SweepSpec};
