//! Spin Wigner kernel, phase-space scans on the sphere, and density-matrix
//! reconstruction from Wigner data.
//!
//! The kernel is the displaced diagonal operator
//! `Δ(θ, φ) = 2 D(θ,φ) Π D†(θ,φ)` with `2Π_mm = Σ_l (2l+1)/(2j+1) ⟨j m; l 0|j m⟩`.
//! With this normalization the Stratonovich-Weyl traciality relation
//! `Tr[AB] = (2j+1)/(4π) ∫ W_A W_B dΩ` holds with unit proportionality
//! constant; the constant is fixed by the d = 2 case and frozen in
//! [`TRACIALITY_CONSTANT`].

use num_complex::Complex64;

use crate::gates::{displacement, DisplacementParams};
use crate::linalg::{dagger, re, CMat};
use crate::spin::{build_angular_momentum, clebsch_gordan, HalfInt, SpinDimension};
use crate::{Error, Result};

use std::f64::consts::PI;

/// Kernel-normalization constant of the traciality relation, calibrated from
/// the analytic d = 2 case (see the golden test in this module).
pub const TRACIALITY_CONSTANT: f64 = 1.0;

/// The diagonal parity-like operator Π of the spin Wigner kernel.
#[derive(Debug, Clone)]
pub struct SpinParityOperator {
    pub dim: SpinDimension,
    pub matrix: CMat,
}

/// Builds Π from the Clebsch-Gordan sum.
pub fn build_parity(dim: SpinDimension) -> SpinParityOperator {
    let d = dim.d();
    let dj = dim.j().doubled();
    let mut matrix = CMat::zeros(d, d);
    for n in 0..d {
        // Basis index n carries m = j - n.
        let dm = dj - 2 * n as i64;
        let mut acc = 0.0;
        for l in 0..=dj {
            let cg = clebsch_gordan(
                HalfInt::from_doubled(dj),
                HalfInt::from_doubled(dm),
                HalfInt::from_int(l),
                HalfInt::from_int(0),
                HalfInt::from_doubled(dj),
                HalfInt::from_doubled(dm),
            )
            .expect("valid CG arguments by construction");
            acc += (2 * l + 1) as f64 / (dj + 1) as f64 * cg;
        }
        matrix[(n, n)] = re(acc / 2.0);
    }
    SpinParityOperator { dim, matrix }
}

/// The kernel `Δ(θ, φ) = 2 D Π D†` at one phase-space point.
pub fn kernel_at(parity: &SpinParityOperator, theta: f64, phi: f64) -> CMat {
    let d_op = displacement(parity.dim, DisplacementParams::new(theta, phi));
    (&d_op * &parity.matrix * dagger(&d_op)).scale(2.0)
}

/// Phase-space sample points (θ ∈ [0, π], φ ∈ [0, 2π)) with quadrature
/// weights for integration over the sphere; weights sum to 4π.
#[derive(Debug, Clone)]
pub struct PhaseSpaceGrid {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl PhaseSpaceGrid {
    /// Gauss-Legendre nodes in cos θ crossed with a uniform φ grid.
    pub fn gauss_legendre(n_theta: usize, n_phi: usize) -> Self {
        let (nodes, gl_weights) = gauss_legendre_rule(n_theta);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for (&x, &w) in nodes.iter().zip(&gl_weights) {
            let theta = x.acos();
            for k in 0..n_phi {
                points.push((theta, k as f64 * dphi));
                weights.push(w * dphi);
            }
        }
        PhaseSpaceGrid { points, weights }
    }

    /// Default grid for dimension d: 4d × 4d points.
    pub fn standard(dim: SpinDimension) -> Self {
        let n = 4 * dim.d();
        Self::gauss_legendre(n, n)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Wigner function value `W(θ, φ) = Tr[ρ Δ(θ, φ)]` for a valid density
/// matrix. The imaginary part is asserted below 1e-10 and dropped.
pub fn wigner_at(rho: &CMat, theta: f64, phi: f64) -> Result<f64> {
    crate::linalg::ensure_density_matrix(rho, 1e-9)?;
    let dim = SpinDimension::new(rho.nrows())?;
    let parity = build_parity(dim);
    let delta = kernel_at(&parity, theta, phi);
    let value = (rho * delta).trace();
    debug_assert!(value.im.abs() < 1e-10, "Wigner value not real: {value}");
    Ok(value.re)
}

/// Scans the Wigner function over a grid. Returns values aligned with
/// `grid.points`.
pub fn wigner_scan(rho: &CMat, grid: &PhaseSpaceGrid) -> Result<Vec<f64>> {
    crate::linalg::ensure_density_matrix(rho, 1e-9)?;
    let dim = SpinDimension::new(rho.nrows())?;
    let parity = build_parity(dim);
    let d = dim.d();

    // K(θ) = 2·Ry(θ) Π Ry(θ)†; Δ(θ, φ) = Rz(φ) K(θ) Rz(φ)† because Π and
    // Rz are both diagonal. Then W = Σ_{m,n} ρ[n,m]·K[m,n]·e^{-iφ(n-m)}.
    let ops = build_angular_momentum(dim);
    let (jy_values, jy_vectors) = crate::linalg::hermitian_eigen(&ops.jy);
    let jy_vectors_dag = dagger(&jy_vectors);
    let mut kernel_cache: Vec<(f64, CMat)> = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    for &(theta, phi) in &grid.points {
        if kernel_cache
            .last()
            .map_or(true, |(t, _)| (*t - theta).abs() > 1e-15)
        {
            let mut phased = jy_vectors.clone();
            for (col, &ev) in jy_values.iter().enumerate() {
                let phase = Complex64::from_polar(1.0, -theta * ev);
                for row in 0..d {
                    phased[(row, col)] *= phase;
                }
            }
            let ry = &phased * &jy_vectors_dag;
            let k = (&ry * &parity.matrix * dagger(&ry)).scale(2.0);
            kernel_cache.push((theta, k));
        }
        let k_theta = &kernel_cache.last().expect("cache populated").1;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..d {
            for n in 0..d {
                // (Rz K Rz†)[m,n] = K[m,n]·e^{-iφ(n-m)} with Rz entries
                // e^{-iφ(j-n)} on basis index n.
                let phase = Complex64::from_polar(1.0, -phi * (n as f64 - m as f64));
                acc += rho[(n, m)] * k_theta[(m, n)] * phase;
            }
        }
        debug_assert!(acc.im.abs() < 1e-9, "Wigner value not real: {acc}");
        values.push(acc.re);
    }
    Ok(values)
}

/// Result of a least-squares density-matrix reconstruction.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: CMat,
    /// L2 residual ‖A·x - w‖ of the linear system.
    pub residual: f64,
    /// Smallest eigenvalue of the reconstructed matrix (negative values
    /// measure the distance to the PSD cone; positivity is reported, not
    /// enforced).
    pub min_eigenvalue: f64,
}

/// Reconstructs a density matrix from Wigner samples `(θ, φ, w)` by solving
/// the real linear system `Tr[ρ Δ_i] = w_i` in the Hermitian-basis
/// parameterization under the unit-trace constraint.
///
/// Requires an informationally complete sample set (rank d²); rank
/// deficiency is reported as an error.
pub fn reconstruct_density(
    dim: SpinDimension,
    samples: &[(f64, f64, f64)],
) -> Result<Reconstruction> {
    let d = dim.d();
    let n_params = d * d;
    if samples.len() < n_params {
        return Err(Error::RankDeficientGrid {
            rank: samples.len(),
            needed: n_params,
        });
    }
    let parity = build_parity(dim);

    // Hermitian basis: diagonal E_ii, then (E_ij + E_ji) and i(E_ij - E_ji)
    // for i < j. Design entries Tr[B_a Δ_i] are real by Hermiticity.
    let mut design = nalgebra::DMatrix::<f64>::zeros(samples.len(), n_params);
    let mut rhs = nalgebra::DVector::<f64>::zeros(samples.len());
    for (row, &(theta, phi, w)) in samples.iter().enumerate() {
        let delta = kernel_at(&parity, theta, phi);
        rhs[row] = w;
        for i in 0..d {
            design[(row, i)] = delta[(i, i)].re;
        }
        let mut col = d;
        for i in 0..d {
            for jj in i + 1..d {
                // Tr[(E_ij + E_ji)Δ] = 2 Re Δ[j,i]; Tr[i(E_ij - E_ji)Δ] = 2 Im Δ[j,i].
                design[(row, col)] = 2.0 * delta[(jj, i)].re;
                design[(row, col + 1)] = 2.0 * delta[(jj, i)].im;
                col += 2;
            }
        }
    }

    // Rank check on the full design matrix.
    let svd_full = design.clone().svd(false, false);
    let sigma_max = svd_full.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd_full
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * sigma_max)
        .count();
    if rank < n_params {
        return Err(Error::RankDeficientGrid {
            rank,
            needed: n_params,
        });
    }

    // Eliminate the trace constraint Σ x_ii = 1 via x_00 = 1 - Σ_{i>0} x_ii.
    let reduced_cols = n_params - 1;
    let mut reduced = nalgebra::DMatrix::<f64>::zeros(samples.len(), reduced_cols);
    let mut reduced_rhs = rhs.clone();
    for row in 0..samples.len() {
        reduced_rhs[row] -= design[(row, 0)];
        for i in 1..d {
            reduced[(row, i - 1)] = design[(row, i)] - design[(row, 0)];
        }
        for c in d..n_params {
            reduced[(row, c - 1)] = design[(row, c)];
        }
    }
    let svd = reduced.svd(true, true);
    let solution = svd
        .solve(&reduced_rhs, 1e-12)
        .map_err(|e| Error::SingularMatrix(e.to_string()))?;

    // Assemble ρ.
    let mut rho = CMat::zeros(d, d);
    let mut diag_sum = 0.0;
    for i in 1..d {
        rho[(i, i)] = re(solution[i - 1]);
        diag_sum += solution[i - 1];
    }
    rho[(0, 0)] = re(1.0 - diag_sum);
    let mut col = d - 1;
    for i in 0..d {
        for jj in i + 1..d {
            let s = solution[col];
            let a = solution[col + 1];
            rho[(jj, i)] = Complex64::new(s, a);
            rho[(i, jj)] = Complex64::new(s, -a);
            col += 2;
        }
    }

    // Residual of the full system and distance to the PSD cone.
    let mut x_full = nalgebra::DVector::<f64>::zeros(n_params);
    for i in 0..d {
        x_full[i] = rho[(i, i)].re;
    }
    let mut c = d;
    for i in 0..d {
        for jj in i + 1..d {
            x_full[c] = rho[(jj, i)].re;
            x_full[c + 1] = rho[(jj, i)].im;
            c += 2;
        }
    }
    let residual = (&design * &x_full - &rhs).norm();
    let (eigenvalues, _) = crate::linalg::hermitian_eigen(&rho);
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(0.0);

    Ok(Reconstruction {
        rho,
        residual,
        min_eigenvalue,
    })
}

/// Convenience: reconstruct from a grid-aligned scan.
pub fn reconstruct_density_from_scan(
    dim: SpinDimension,
    grid: &PhaseSpaceGrid,
    values: &[f64],
) -> Result<Reconstruction> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "scan has {} values but grid has {} points",
            values.len(),
            grid.len()
        )));
    }
    let samples: Vec<(f64, f64, f64)> = grid
        .points
        .iter()
        .zip(values)
        .map(|(&(t, p), &w)| (t, p, w))
        .collect();
    reconstruct_density(dim, &samples)
}

/// Measures the traciality proportionality constant
/// `Tr[AB] / ((2j+1)/(4π) Σ_i w_i W_A(Ω_i) W_B(Ω_i))` for seeded random
/// Hermitian probes A, B.
pub fn measure_traciality_constant(dim: SpinDimension, grid: &PhaseSpaceGrid, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let d = dim.d();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut random_hermitian = || {
        let g = CMat::from_fn(d, d, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        (&g + dagger(&g)).scale(0.5)
    };
    let a = random_hermitian();
    let b = random_hermitian();
    let parity = build_parity(dim);
    let mut integral = 0.0;
    for (&(theta, phi), &w) in grid.points.iter().zip(&grid.weights) {
        let delta = kernel_at(&parity, theta, phi);
        let wa = (&a * &delta).trace().re;
        let wb = (&b * &delta).trace().re;
        integral += w * wa * wb;
    }
    let lhs = (&a * &b).trace().re;
    let rhs = (d as f64) / (4.0 * PI) * integral;
    lhs / rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::coherent_state;
    use crate::linalg::{max_abs_diff, outer, trace_distance, CVec};
    use crate::spin::basis_state;
    use std::f64::consts::FRAC_PI_2;

    fn dim(d: usize) -> SpinDimension {
        SpinDimension::new(d).unwrap()
    }

    fn pure_density(psi: &CVec) -> CMat {
        outer(psi, psi)
    }

    #[test]
    fn gauss_legendre_weights_integrate_sphere() {
        for d in [2usize, 5, 8] {
            let grid = PhaseSpaceGrid::standard(dim(d));
            let total: f64 = grid.weights.iter().sum();
            assert!((total - 4.0 * PI).abs() < 1e-9, "d={d}: {total}");
        }
        // The rule integrates low-degree polynomials exactly.
        let grid = PhaseSpaceGrid::gauss_legendre(8, 8);
        let integral: f64 = grid
            .points
            .iter()
            .zip(&grid.weights)
            .map(|(&(t, _), &w)| w * t.cos().powi(2))
            .sum();
        assert!((integral - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn parity_d2_matches_analytic_values() {
        // Candidate values (1±√3)/4, verified against the CG-sum
        // construction (the CG path itself is oracle-checked in spin).
        let parity = build_parity(dim(2));
        let want0 = (1.0 + 3.0f64.sqrt()) / 4.0;
        let want1 = (1.0 - 3.0f64.sqrt()) / 4.0;
        assert!((parity.matrix[(0, 0)].re - want0).abs() < 1e-12);
        assert!((parity.matrix[(1, 1)].re - want1).abs() < 1e-12);
    }

    #[test]
    fn parity_trace_identity() {
        // Tr(2Π) = 1 for d = 2..8: only the l = 0 term survives the m-sum.
        for d in 2..=8 {
            let parity = build_parity(dim(d));
            let tr = parity.matrix.trace().re * 2.0;
            assert!((tr - 1.0).abs() < 1e-11, "d={d}: {tr}");
        }
    }

    #[test]
    fn kernel_at_origin_is_twice_parity() {
        let parity = build_parity(dim(5));
        let delta = kernel_at(&parity, 0.0, 0.0);
        assert!(max_abs_diff(&delta, &parity.matrix.scale(2.0)) < 1e-12);
    }

    #[test]
    fn ground_state_wigner_at_pole() {
        // ρ = |0⟩⟨0| at θ = 0 → 2Π_00.
        for d in [2usize, 4, 8] {
            let rho = pure_density(&basis_state(d, 0));
            let parity = build_parity(dim(d));
            let w = wigner_at(&rho, 0.0, 0.0).unwrap();
            assert!((w - 2.0 * parity.matrix[(0, 0)].re).abs() < 1e-11, "d={d}");
        }
    }

    #[test]
    fn coherent_state_wigner_peaks_at_its_center() {
        let d = 6;
        let (theta0, phi0) = (1.1, 2.2);
        let rho = pure_density(&coherent_state(dim(d), theta0, phi0));
        let grid = PhaseSpaceGrid::standard(dim(d));
        let values = wigner_scan(&rho, &grid).unwrap();
        let (best_idx, _) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| {
                if v > acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        let (tb, pb) = grid.points[best_idx];
        // Great-circle closeness between the peak and the preparation point.
        let cos_gap = theta0.cos() * tb.cos() + theta0.sin() * tb.sin() * (phi0 - pb).cos();
        assert!(cos_gap > 0.97, "peak at ({tb:.2}, {pb:.2}), cos gap {cos_gap}");
    }

    #[test]
    fn eigenstates_are_phase_delocalized_with_negativity() {
        let d = 5;
        let grid = PhaseSpaceGrid::standard(dim(d));
        for n in 1..d - 1 {
            let rho = pure_density(&basis_state(d, n));
            let values = wigner_scan(&rho, &grid).unwrap();
            // φ-independence: each θ ring is constant.
            let n_phi = 4 * d;
            for chunk in values.chunks(n_phi) {
                let first = chunk[0];
                for &v in chunk {
                    assert!((v - first).abs() < 1e-9, "φ dependence at n={n}");
                }
            }
            // Intermediate eigenstates carry Wigner negativity.
            assert!(
                values.iter().cloned().fold(f64::INFINITY, f64::min) < -1e-3,
                "no negative region for |{n}⟩"
            );
        }
    }

    #[test]
    fn superposition_has_k_fold_symmetry() {
        let d = 6;
        for k in [2usize, 4] {
            let mut psi = CVec::zeros(d);
            psi[0] = re(1.0 / 2f64.sqrt());
            psi[k] = re(1.0 / 2f64.sqrt());
            let rho = pure_density(&psi);
            // W(θ, φ) = W(θ, φ + 2π/k): a φ grid that is a multiple of k
            // turns the shift into an index rotation.
            let n_phi = 4 * k;
            let grid = PhaseSpaceGrid::gauss_legendre(12, n_phi);
            let values = wigner_scan(&rho, &grid).unwrap();
            let shift = n_phi / k;
            for (idx, &v) in values.iter().enumerate() {
                let theta_block = idx / n_phi;
                let phi_idx = idx % n_phi;
                let rotated = theta_block * n_phi + (phi_idx + shift) % n_phi;
                assert!(
                    (v - values[rotated]).abs() < 1e-9,
                    "k={k}: W not invariant under 2π/{k} rotation"
                );
            }
        }
    }

    #[test]
    fn cat_state_shows_interference_fringes() {
        let d = 8;
        let lobe_a = coherent_state(dim(d), FRAC_PI_2, 0.0);
        let lobe_b = coherent_state(dim(d), -FRAC_PI_2, 0.0);
        let mut cat = &lobe_a + &lobe_b;
        cat /= re(cat.norm());
        let rho_cat = pure_density(&cat);
        let rho_mix = (pure_density(&lobe_a) + pure_density(&lobe_b)).scale(0.5);
        let grid = PhaseSpaceGrid::standard(dim(d));
        let w_cat = wigner_scan(&rho_cat, &grid).unwrap();
        let w_mix = wigner_scan(&rho_mix, &grid).unwrap();
        // Interference: the cat deviates sharply from the incoherent
        // mixture of its lobes and carries deep negativity.
        let max_gap = w_cat
            .iter()
            .zip(&w_mix)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_gap > 0.1, "no fringes: max gap {max_gap}");
        assert!(w_cat.iter().cloned().fold(f64::INFINITY, f64::min) < -0.05);
        // Even-parity support makes the Wigner function π-periodic in φ.
        let n_phi = 4 * d;
        for (idx, &v) in w_cat.iter().enumerate() {
            let theta_block = idx / n_phi;
            let phi_idx = idx % n_phi;
            let rotated = theta_block * n_phi + (phi_idx + n_phi / 2) % n_phi;
            assert!((v - w_cat[rotated]).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_covariance_under_z_rotations() {
        let d = 5;
        let parity = build_parity(dim(d));
        let ops = build_angular_momentum(dim(d));
        for &beta in &[0.3, 1.7, 4.4] {
            let rz = crate::linalg::expm_i_hermitian(&ops.jz, beta);
            let rotated = &rz * kernel_at(&parity, 0.9, 0.4) * dagger(&rz);
            let direct = kernel_at(&parity, 0.9, 0.4 + beta);
            assert!(max_abs_diff(&rotated, &direct) < 1e-11, "beta={beta}");
        }
    }

    #[test]
    fn traciality_constant_is_unity_at_d2_golden() {
        let grid = PhaseSpaceGrid::standard(dim(2));
        let c = measure_traciality_constant(dim(2), &grid, 7);
        assert!(
            (c - TRACIALITY_CONSTANT).abs() < 1e-10,
            "measured {c} vs frozen {TRACIALITY_CONSTANT}"
        );
    }

    #[test]
    fn traciality_consistent_across_dimensions() {
        for d in 3..=8 {
            let grid = PhaseSpaceGrid::standard(dim(d));
            let c = measure_traciality_constant(dim(d), &grid, 11 + d as u64);
            assert!(
                (c - TRACIALITY_CONSTANT).abs() < 1e-6,
                "d={d}: constant {c}"
            );
        }
    }

    #[test]
    fn reconstruction_round_trips_ground_state() {
        let d = 4;
        let rho = pure_density(&basis_state(d, 0));
        let grid = PhaseSpaceGrid::standard(dim(d));
        let values = wigner_scan(&rho, &grid).unwrap();
        let rec = reconstruct_density_from_scan(dim(d), &grid, &values).unwrap();
        assert!(trace_distance(&rec.rho, &rho) < 1e-8, "trace distance");
        assert!(rec.residual < 1e-9);
        assert!(rec.min_eigenvalue > -1e-9);
    }

    #[test]
    fn reconstruction_round_trips_random_mixed_state() {
        use rand::{Rng, SeedableRng};
        let d = 5;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let g = CMat::from_fn(d, d, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut rho = &g * dagger(&g);
        let tr = rho.trace().re;
        rho = rho.scale(1.0 / tr);
        let grid = PhaseSpaceGrid::standard(dim(d));
        let values = wigner_scan(&rho, &grid).unwrap();
        let rec = reconstruct_density_from_scan(dim(d), &grid, &values).unwrap();
        assert!(
            trace_distance(&rec.rho, &rho) < 1e-6,
            "trace distance {}",
            trace_distance(&rec.rho, &rho)
        );
    }

    #[test]
    fn reconstruction_rejects_rank_deficient_grids() {
        // A single θ ring cannot be informationally complete.
        let d = 4;
        let rho = pure_density(&basis_state(d, 0));
        let ring: Vec<(f64, f64, f64)> = (0..32)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / 32.0;
                (1.0, phi, wigner_at(&rho, 1.0, phi).unwrap())
            })
            .collect();
        match reconstruct_density(dim(d), &ring) {
            Err(Error::RankDeficientGrid { .. }) => {}
            other => panic!("expected rank-deficiency error, got {other:?}"),
        }
    }

    #[test]
    fn scan_matches_pointwise_evaluation() {
        let d = 5;
        let rho = pure_density(&coherent_state(dim(d), 0.8, 1.9));
        let grid = PhaseSpaceGrid::gauss_legendre(6, 6);
        let values = wigner_scan(&rho, &grid).unwrap();
        for (idx, &(t, p)) in grid.points.iter().enumerate().step_by(7) {
            let direct = wigner_at(&rho, t, p).unwrap();
            assert!((values[idx] - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn wigner_rejects_invalid_density() {
        let mut rho = CMat::identity(3, 3).scale(1.0 / 3.0);
        rho[(0, 1)] = re(0.8);
        assert!(wigner_at(&rho, 0.5, 0.5).is_err());
    }
}
