//! Ideal unitary gates (spin displacement, SNAP, virtual Jz rotations) and
//! fidelity metrics.
//!
//! Conventions pinned here and used everywhere else:
//! - `D(θ, φ) = exp(α J₊ - α* J₋)` with `α = -(θ/2) e^{-iφ}`, equal to
//!   `exp(-iφ Jz) · exp(-iθ Jy) · exp(+iφ Jz)`.
//! - SNAP phases enter with a plus sign: `S(φ⃗) = diag(e^{+iφ_n})`. A virtual
//!   Jz rotation by λ is the SNAP with `φ_n = -λ(j - n)`.
//! - All fidelity and equality checks are global-phase insensitive.

use serde::{Deserialize, Serialize};

use crate::linalg::{expm_antihermitian, CMat, CVec};
use crate::spin::{build_angular_momentum, SpinDimension};
use crate::{Error, Result};

use std::f64::consts::TAU;

/// Rotation parameters (θ, φ) of a spin displacement, canonicalized to
/// [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementParams {
    theta: f64,
    phi: f64,
}

impl DisplacementParams {
    /// Canonicalizes to θ ∈ [0, 2π), φ ∈ [0, 2π). A negative θ maps to
    /// (-θ, φ+π), which carries the same amplitude α exactly; reduction of
    /// θ by full turns identifies gates that differ only in global phase.
    pub fn new(theta: f64, phi: f64) -> Self {
        let (theta, phi) = if theta < 0.0 {
            (-theta, phi + std::f64::consts::PI)
        } else {
            (theta, phi)
        };
        DisplacementParams {
            theta: theta.rem_euclid(TAU),
            phi: phi.rem_euclid(TAU),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The complex displacement amplitude α = -(θ/2)·e^{-iφ}.
    pub fn alpha(&self) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(self.theta / 2.0, -self.phi).scale(-1.0)
    }
}

/// Length-d vector of SNAP phases in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapPhases(pub Vec<f64>);

impl SnapPhases {
    pub fn zeros(d: usize) -> Self {
        SnapPhases(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Spin displacement unitary `exp(α J₊ - α* J₋)`.
pub fn displacement(dim: SpinDimension, params: DisplacementParams) -> CMat {
    let ops = build_angular_momentum(dim);
    let alpha = params.alpha();
    let generator = ops.jplus.map(|z| z * alpha) - ops.jminus.map(|z| z * alpha.conj());
    expm_antihermitian(&generator)
}

/// SNAP unitary `diag(e^{+iφ_n})`.
pub fn snap(dim: SpinDimension, phases: &SnapPhases) -> Result<CMat> {
    let d = dim.d();
    if phases.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "SNAP phase vector has length {} but d = {d}",
            phases.len()
        )));
    }
    let mut m = CMat::zeros(d, d);
    for (n, &phi) in phases.0.iter().enumerate() {
        m[(n, n)] = num_complex::Complex64::from_polar(1.0, phi);
    }
    Ok(m)
}

/// The SNAP phases implementing `exp(-iλ Jz)` up to a global phase:
/// `φ_n = -λ(j - n)`.
pub fn jz_rotation_phases(dim: SpinDimension, lambda: f64) -> SnapPhases {
    let j = dim.j_value();
    SnapPhases((0..dim.d()).map(|n| -lambda * (j - n as f64)).collect())
}

/// Spin coherent state `D(θ, φ)|0⟩`.
pub fn coherent_state(dim: SpinDimension, theta: f64, phi: f64) -> CVec {
    let d = displacement(dim, DisplacementParams::new(theta, phi));
    d.column(0).into_owned()
}

fn ensure_normalized(psi: &CVec, tol: f64) -> Result<()> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > tol {
        return Err(Error::InvalidState(format!(
            "state norm {norm} differs from 1 by more than {tol:.1e}"
        )));
    }
    Ok(())
}

/// ⟨Jz⟩ for a normalized pure state (tolerance 1e-9 on the norm).
pub fn expectation_jz(psi: &CVec) -> Result<f64> {
    ensure_normalized(psi, 1e-9)?;
    let dim = SpinDimension::new(psi.len())?;
    let j = dim.j_value();
    let mut acc = 0.0;
    for (n, amp) in psi.iter().enumerate() {
        acc += (j - n as f64) * amp.norm_sqr();
    }
    Ok(acc)
}

/// Tr(ρ Jz) for a valid density matrix.
pub fn expectation_jz_density(rho: &CMat) -> Result<f64> {
    crate::linalg::ensure_density_matrix(rho, 1e-9)?;
    let dim = SpinDimension::new(rho.nrows())?;
    let j = dim.j_value();
    let mut acc = 0.0;
    for n in 0..rho.nrows() {
        acc += (j - n as f64) * rho[(n, n)].re;
    }
    Ok(acc)
}

/// Unitary overlap fidelity `(1/d²)|Tr(u†v)|²`.
///
/// Both arguments must be unitary within 1e-9 and share dimensions.
pub fn unitary_fidelity(u: &CMat, v: &CMat) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols()
        )));
    }
    crate::linalg::ensure_unitary(u, 1e-9)?;
    crate::linalg::ensure_unitary(v, 1e-9)?;
    let d = u.nrows() as f64;
    let tr = (u.adjoint() * v).trace();
    Ok(tr.norm_sqr() / (d * d))
}

/// `|⟨ψ|φ⟩|²` for normalized state vectors.
pub fn state_fidelity(psi: &CVec, phi: &CVec) -> Result<f64> {
    ensure_normalized(psi, 1e-9)?;
    ensure_normalized(phi, 1e-9)?;
    if psi.len() != phi.len() {
        return Err(Error::DimensionMismatch(format!(
            "state lengths {} vs {}",
            psi.len(),
            phi.len()
        )));
    }
    Ok(psi.dotc(phi).norm_sqr())
}
