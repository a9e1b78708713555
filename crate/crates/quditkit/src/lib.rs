//! Simulation toolkit for a spin-j qudit encoded in the energy eigenstates of
//! a transmon.
//!
//! The crate covers the full control-and-measurement stack at desk scale:
//!
//! - [`spin`]: exact spin-j operators, basis index maps, and Clebsch-Gordan
//!   coefficients.
//! - [`gates`]: ideal spin displacement and SNAP unitaries plus fidelity
//!   metrics.
//! - [`decompose`]: synthesis of arbitrary SU(d) unitaries as interleaved
//!   SNAP-displacement layers via gradient-based optimization.
//! - [`wigner`]: spin Wigner kernel, phase-space scans on the sphere, and
//!   density-matrix reconstruction.
//! - [`transmon`]: charge-basis transmon diagonalization and derived spectra.
//! - [`pulse`]: lab-frame propagator simulation of multi-tone displacement
//!   drives with phase/detuning/DRAG corrections optimized by co-integrated
//!   parameter derivatives.
//! - [`rb`]: spin-cat logical qubit, Clifford compilation, and randomized
//!   benchmarking under random CPTP perturbations.
//! - [`readout`]: synthetic multi-tone dispersive readout with
//!   Gaussian-mixture classification.
//! - [`budget`]: closed-form coherent/incoherent error budget.
//!
//! All randomness flows through seedable ChaCha12 generators, so every
//! computation in the crate is deterministic given a seed.

pub mod budget;
pub mod decompose;
pub mod gates;
pub mod linalg;
pub mod optim;
pub mod pulse;
pub mod rb;
pub mod readout;
pub mod spin;
pub mod transmon;
pub mod wigner;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid qudit dimension {0}: must be at least 2")]
    InvalidDimension(usize),
    #[error("invalid half-integer pair: {0}")]
    InvalidHalfInteger(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not unitary (residual {residual:.3e} exceeds {tol:.3e})")]
    NotUnitary { residual: f64, tol: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("charge-basis cutoff too small: {0}")]
    CutoffTooSmall(String),
    #[error("phase-space grid is rank deficient: rank {rank} < {needed} required")]
    RankDeficientGrid { rank: usize, needed: usize },
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("incomplete Kraus set: completeness residual {0:.3e}")]
    IncompleteKrausSet(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
