//! Dense complex matrix helpers shared by every module.
//!
//! Matrices are carried as `nalgebra::DMatrix<Complex64>` throughout the
//! crate. Matrix exponentials of (anti-)Hermitian generators go through a
//! Hermitian eigendecomposition so that the results are unitary to machine
//! precision for the small dimensions used here (d up to a few tens).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense d×d complex matrix; carrier for operators, unitaries, and density
/// matrices.
pub type CMat = DMatrix<Complex64>;
/// Dense complex vector; carrier for state vectors.
pub type CVec = DVector<Complex64>;

/// Complex unit `i`.
pub const IM: Complex64 = Complex64::new(0.0, 1.0);
/// Complex one.
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
/// Complex zero.
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex from a real value.
#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Conjugate transpose.
#[inline]
pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// d×d identity.
pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Max-norm residual of `U†U - I`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let d = u.nrows();
    max_abs_diff(&(dagger(u) * u), &identity(d))
}

/// Errors if `u` is not unitary within `tol` in max-norm.
pub fn ensure_unitary(u: &CMat, tol: f64) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let residual = unitarity_residual(u);
    if residual > tol {
        return Err(Error::NotUnitary { residual, tol });
    }
    Ok(())
}

/// Max-norm residual of `m - m†`.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    max_abs_diff(m, &dagger(m))
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted
/// ascending. Returns `(eigenvalues, eigenvectors)` with eigenvectors in the
/// columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let d = m.nrows();
    // Symmetrize to suppress round-off asymmetry before factorizing.
    let h = (m + dagger(m)).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `exp(-i·t·H)` for Hermitian `H`, computed by eigendecomposition.
///
/// Unitary to machine precision by construction.
pub fn expm_i_hermitian(h: &CMat, t: f64) -> CMat {
    let (values, vectors) = hermitian_eigen(h);
    let d = h.nrows();
    let mut phased = vectors.clone();
    for (k, &ev) in values.iter().enumerate().take(d) {
        let phase = Complex64::from_polar(1.0, -t * ev);
        for i in 0..d {
            phased[(i, k)] *= phase;
        }
    }
    phased * dagger(&vectors)
}

/// `exp(A)` for anti-Hermitian `A` (writes `A = -i·H` with `H` Hermitian).
pub fn expm_antihermitian(a: &CMat) -> CMat {
    // H = i·A is Hermitian when A is anti-Hermitian.
    let h = a.map(|z| z * IM);
    expm_i_hermitian(&h, 1.0)
}

/// Scales `u` by the global phase that aligns it with `v`, using the first
/// entry (row-major) where both matrices are significantly nonzero.
pub fn phase_align(u: &CMat, v: &CMat) -> CMat {
    assert_eq!(u.shape(), v.shape(), "phase_align: shape mismatch");
    let (rows, cols) = u.shape();
    for i in 0..rows {
        for j in 0..cols {
            if u[(i, j)].norm() > 1e-12 && v[(i, j)].norm() > 1e-12 {
                let phase = v[(i, j)] / u[(i, j)];
                let phase = phase / re(phase.norm());
                return u.map(|z| z * phase);
            }
        }
    }
    u.clone()
}

/// Max-norm distance between `u` and `v` after aligning global phase by the
/// first significant entry.
pub fn phase_aligned_distance(u: &CMat, v: &CMat) -> f64 {
    max_abs_diff(&phase_align(u, v), v)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let scale = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = scale * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Outer product `|v⟩⟨w|`.
pub fn outer(v: &CVec, w: &CVec) -> CMat {
    v * w.adjoint()
}

/// Validates a density matrix: Hermitian, unit trace, and positive
/// semidefinite within `tol`.
pub fn ensure_density_matrix(rho: &CMat, tol: f64) -> Result<()> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::InvalidDensityMatrix(format!(
            "not square: {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let herm = hermiticity_residual(rho);
    if herm > tol {
        return Err(Error::InvalidDensityMatrix(format!(
            "not Hermitian: residual {herm:.3e}"
        )));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > tol {
        return Err(Error::InvalidDensityMatrix(format!(
            "trace {tr} is not 1"
        )));
    }
    let (values, _) = hermitian_eigen(rho);
    if let Some(&min) = values.first() {
        if min < -tol {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
    }
    Ok(())
}

/// Trace distance `½·Σ|λ_i|` of the Hermitian difference `a - b`.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    let (values, _) = hermitian_eigen(&(a - b));
    0.5 * values.iter().map(|v| v.abs()).sum::<f64>()
}
