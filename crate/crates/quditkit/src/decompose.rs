//! Synthesis of SU(d) unitaries as interleaved SNAP and displacement layers.
//!
//! A depth-N program applies, right to left,
//! `S(φ⃗^(N)) · D(θ^(N)) · … · S(φ⃗^(1)) · D(θ^(1)) · S(φ⃗^(0))`,
//! where every displacement has its phase fixed to zero (the phase is
//! absorbed into the adjacent SNAP layers). Parameters are found by
//! quasi-Newton maximization of the overlap fidelity with an analytic
//! gradient propagated layer by layer; random restarts guard against the
//! local minima of the cost surface.
//!
//! The same machinery also solves partial problems (state preparation and
//! logical-subspace targets) by optimizing the overlap on a list of
//! input/output pairs instead of the full unitary.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::gates::{snap, unitary_fidelity, SnapPhases};
use crate::linalg::{dagger, re, CMat, CVec};
use crate::optim;
use crate::spin::{build_angular_momentum, SpinDimension};
use crate::{Error, Result};

use std::f64::consts::FRAC_PI_2;

/// Layer placement mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMode {
    /// Displacement angles θ^(k) are free optimization parameters.
    General,
    /// Every displacement is the fixed calibrated π/2 pulse.
    PiHalfCanonical,
}

/// One SNAP-then-displacement layer: `D(θ) · S(φ⃗)` reading right to left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub theta: f64,
    pub snap: Vec<f64>,
}

/// An interleaved SNAP-displacement program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapDisplacementProgram {
    pub d: usize,
    pub mode: DecompositionMode,
    pub layers: Vec<Layer>,
    pub trailing_snap: Vec<f64>,
}

impl SnapDisplacementProgram {
    /// The identity program of depth zero.
    pub fn identity(d: usize) -> Self {
        SnapDisplacementProgram {
            d,
            mode: DecompositionMode::General,
            layers: Vec::new(),
            trailing_snap: vec![0.0; d],
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Number of physical displacement pulses (layers with nonzero θ).
    pub fn displacement_count(&self) -> usize {
        self.layers.iter().filter(|l| l.theta.abs() > 1e-12).count()
    }

    fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidDimension(self.d));
        }
        if self.trailing_snap.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "trailing SNAP has length {} but d = {}",
                self.trailing_snap.len(),
                self.d
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.snap.len() != self.d {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k} SNAP has length {} but d = {}",
                    layer.snap.len(),
                    self.d
                )));
            }
        }
        Ok(())
    }
}

/// Multiplies the program out into a d×d unitary.
pub fn reconstruct(program: &SnapDisplacementProgram) -> Result<CMat> {
    program.validate()?;
    let dim = SpinDimension::new(program.d)?;
    let basis = DisplacementBasis::new(dim);
    let mut u = snap(dim, &SnapPhases(program.trailing_snap.clone()))?;
    // Walk from the last layer down: U = S(φ^N) D(θ^N) … D(θ^1) S(φ^0).
    for layer in program.layers.iter().rev() {
        u *= basis.displacement(layer.theta);
        u *= snap(dim, &SnapPhases(layer.snap.clone()))?;
    }
    Ok(u)
}

/// Eigendecomposition of Jy, cached so that D(θ) = V e^{-iθΛ} V† costs two
/// small matrix products per evaluation.
struct DisplacementBasis {
    vectors: CMat,
    vectors_dag: CMat,
    eigenvalues: Vec<f64>,
}

impl DisplacementBasis {
    fn new(dim: SpinDimension) -> Self {
        let ops = build_angular_momentum(dim);
        let (eigenvalues, vectors) = crate::linalg::hermitian_eigen(&ops.jy);
        let vectors_dag = dagger(&vectors);
        DisplacementBasis {
            vectors,
            vectors_dag,
            eigenvalues,
        }
    }

    /// `exp(-iθ Jy)`.
    fn displacement(&self, theta: f64) -> CMat {
        let d = self.eigenvalues.len();
        let mut phased = self.vectors.clone();
        for (k, &ev) in self.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -theta * ev);
            for i in 0..d {
                phased[(i, k)] *= phase;
            }
        }
        &phased * &self.vectors_dag
    }
}

/// Result of a decomposition run.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub program: SnapDisplacementProgram,
    /// 1 - F of the reconstructed program against the target, re-evaluated
    /// through the public reconstruction path.
    pub infidelity: f64,
    /// Restart that produced the winning program.
    pub restart_index: usize,
    pub restarts_run: usize,
}

/// Options for the decomposition optimizer.
#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Infidelity below which a restart counts as converged and the restart
    /// loop stops early.
    pub convergence_threshold: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            restarts: 20,
            max_iterations: 5000,
            convergence_threshold: 1e-10,
        }
    }
}

/// Decomposes `target` into a depth-`depth` program.
///
/// Optimizer failure is not an error; the best achieved infidelity over all
/// restarts is reported. Restarts are ranked by (infidelity, parameter
/// L2-norm, restart index) and stop early once one reaches the convergence
/// threshold.
pub fn decompose(
    target: &CMat,
    depth: usize,
    mode: DecompositionMode,
    seed: u64,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    crate::linalg::ensure_unitary(target, 1e-9)?;
    let d = target.nrows();
    let dim = SpinDimension::new(d)?;
    // Full-unitary overlap: pairs (e_b, target·e_b) for every basis column.
    let pairs: Vec<(CVec, CVec)> = (0..d)
        .map(|b| {
            (
                crate::spin::basis_state(d, b),
                target.column(b).into_owned(),
            )
        })
        .collect();
    decompose_map(dim, &pairs, depth, mode, seed, opts)
}

/// Decomposes a partial map: finds a program maximizing
/// `|Σ_i ⟨out_i|U|in_i⟩|² / k²` over the given input/output pairs.
///
/// With k = d orthonormal pairs this is the unitary overlap fidelity; with a
/// single pair it is state-preparation fidelity; with a logical-basis pair
/// list it is the fidelity of the restriction to that subspace.
pub fn decompose_map(
    dim: SpinDimension,
    pairs: &[(CVec, CVec)],
    depth: usize,
    mode: DecompositionMode,
    seed: u64,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let d = dim.d();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no input/output pairs".into()));
    }
    for (input, output) in pairs {
        if input.len() != d || output.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "pair vectors must have length {d}"
            )));
        }
    }

    let problem = MapProblem::new(dim, pairs, depth, mode);
    let n_params = problem.parameter_len();

    let mut best: Option<(f64, f64, usize, Vec<f64>)> = None; // (infid, l2, index, params)
    let mut restarts_run = 0usize;
    for restart in 0..opts.restarts.max(1) {
        restarts_run = restart + 1;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64 + 1);
        let x0: Vec<f64> = (0..n_params)
            .map(|k| {
                if problem.is_theta_param(k) {
                    rng.gen_range(0.0..std::f64::consts::PI)
                } else {
                    rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
                }
            })
            .collect();
        let result = optim::minimize(
            |x, g| problem.infidelity_and_gradient(x, g),
            &x0,
            &optim::Options {
                max_iterations: opts.max_iterations,
                target_value: opts.convergence_threshold,
                gradient_tol: 1e-13,
                ..Default::default()
            },
        );
        let l2 = result.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let candidate = (result.value, l2, restart, result.x);
        let replace = match &best {
            None => true,
            Some((bv, bl2, bi, _)) => (candidate.0, candidate.1, candidate.2) < (*bv, *bl2, *bi),
        };
        if replace {
            best = Some(candidate);
        }
        if best
            .as_ref()
            .is_some_and(|(v, ..)| *v < opts.convergence_threshold)
        {
            break;
        }
    }

    let (_, _, restart_index, params) = best.expect("at least one restart runs");
    let program = problem.program_from_params(&params);
    // Re-evaluate through the public reconstruction path.
    let rebuilt = reconstruct(&program)?;
    let infidelity = 1.0 - problem.pair_fidelity(&rebuilt);
    Ok(Decomposition {
        program,
        infidelity,
        restart_index,
        restarts_run,
    })
}

/// The overlap-maximization problem over a pair list.
struct MapProblem {
    dim: SpinDimension,
    depth: usize,
    mode: DecompositionMode,
    basis: DisplacementBasis,
    jy: CMat,
    inputs: CMat,  // d×k
    outputs: CMat, // d×k
    k: usize,
}

impl MapProblem {
    fn new(
        dim: SpinDimension,
        pairs: &[(CVec, CVec)],
        depth: usize,
        mode: DecompositionMode,
    ) -> Self {
        let d = dim.d();
        let k = pairs.len();
        let mut inputs = CMat::zeros(d, k);
        let mut outputs = CMat::zeros(d, k);
        for (c, (input, output)) in pairs.iter().enumerate() {
            inputs.set_column(c, input);
            outputs.set_column(c, output);
        }
        let ops = build_angular_momentum(dim);
        MapProblem {
            dim,
            depth,
            mode,
            basis: DisplacementBasis::new(dim),
            jy: ops.jy,
            inputs,
            outputs,
            k,
        }
    }

    /// θ parameters first (general mode only), then (d-1) phases per SNAP
    /// layer with the first phase of each layer pinned to zero.
    fn parameter_len(&self) -> usize {
        let d = self.dim.d();
        let thetas = match self.mode {
            DecompositionMode::General => self.depth,
            DecompositionMode::PiHalfCanonical => 0,
        };
        thetas + (self.depth + 1) * (d - 1)
    }

    fn is_theta_param(&self, index: usize) -> bool {
        matches!(self.mode, DecompositionMode::General) && index < self.depth
    }

    fn theta(&self, params: &[f64], layer: usize) -> f64 {
        match self.mode {
            DecompositionMode::General => params[layer],
            DecompositionMode::PiHalfCanonical => FRAC_PI_2,
        }
    }

    fn snap_slice<'a>(&self, params: &'a [f64], snap_index: usize) -> &'a [f64] {
        let d = self.dim.d();
        let base = match self.mode {
            DecompositionMode::General => self.depth,
            DecompositionMode::PiHalfCanonical => 0,
        };
        let start = base + snap_index * (d - 1);
        &params[start..start + (d - 1)]
    }

    fn program_from_params(&self, params: &[f64]) -> SnapDisplacementProgram {
        let d = self.dim.d();
        let full_snap = |slice: &[f64]| -> Vec<f64> {
            let mut v = Vec::with_capacity(d);
            v.push(0.0);
            v.extend_from_slice(slice);
            v
        };
        let layers = (0..self.depth)
            .map(|k| Layer {
                theta: self.theta(params, k),
                snap: full_snap(self.snap_slice(params, k)),
            })
            .collect();
        SnapDisplacementProgram {
            d,
            mode: self.mode,
            layers,
            trailing_snap: full_snap(self.snap_slice(params, self.depth)),
        }
    }

    fn pair_fidelity(&self, u: &CMat) -> f64 {
        let z = (self.outputs.adjoint() * u * &self.inputs).trace();
        z.norm_sqr() / (self.k * self.k) as f64
    }

    /// Infidelity 1 - |z|²/k² and its gradient via one forward and one
    /// backward sweep through the layers.
    fn infidelity_and_gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim.d();
        let n_layers = self.depth;
        let snap_diag = |slice: &[f64]| -> Vec<Complex64> {
            let mut v = Vec::with_capacity(d);
            v.push(re(1.0));
            v.extend(slice.iter().map(|&p| Complex64::from_polar(1.0, p)));
            v
        };

        // Forward pass, recording the state after each operation.
        // Operation order: S(φ^0), D(θ^1), S(φ^1), …, D(θ^N), S(φ^N).
        let mut after_snap: Vec<CMat> = Vec::with_capacity(n_layers + 1);
        let mut after_disp: Vec<CMat> = Vec::with_capacity(n_layers);
        let mut disp_mats: Vec<CMat> = Vec::with_capacity(n_layers);
        let mut state = self.inputs.clone();
        for layer in 0..=n_layers {
            let diag = snap_diag(self.snap_slice(params, layer));
            for c in 0..self.k {
                for i in 0..d {
                    state[(i, c)] *= diag[i];
                }
            }
            after_snap.push(state.clone());
            if layer < n_layers {
                let dm = self.basis.displacement(self.theta(params, layer));
                state = &dm * &state;
                after_disp.push(state.clone());
                disp_mats.push(dm);
            }
        }
        let mut z = Complex64::new(0.0, 0.0);
        for c in 0..self.k {
            for i in 0..d {
                z += self.outputs[(i, c)].conj() * state[(i, c)];
            }
        }
        let k2 = (self.k * self.k) as f64;
        let fidelity = z.norm_sqr() / k2;

        // Backward pass: `adjoint` is OUT with operations peeled off the
        // left; dz/dp = Tr[adjoint† (∂O/∂p) state_before_O].
        let mut adjoint = self.outputs.clone();
        let zbar = z.conj();
        let scale = -2.0 / k2;
        // For a SNAP with post-state A and adjoint B at the same position:
        // ∂z/∂φ_n = i Σ_c A[n,c]·conj(B[n,c]).
        let snap_grad = |a: &CMat, b: &CMat, grad: &mut [f64], base: usize| {
            for n in 1..d {
                let mut dz = Complex64::new(0.0, 0.0);
                for c in 0..self.k {
                    dz += a[(n, c)] * b[(n, c)].conj();
                }
                let dzdp = Complex64::new(0.0, 1.0) * dz;
                grad[base + n - 1] = scale * (zbar * dzdp).re;
            }
        };

        let theta_base = match self.mode {
            DecompositionMode::General => self.depth,
            DecompositionMode::PiHalfCanonical => 0,
        };
        snap_grad(
            &after_snap[n_layers],
            &adjoint,
            grad,
            theta_base + n_layers * (d - 1),
        );
        for layer in (0..n_layers).rev() {
            // Peel S(φ^{layer+1}) off the left.
            let diag = snap_diag(self.snap_slice(params, layer + 1));
            for c in 0..self.k {
                for i in 0..d {
                    adjoint[(i, c)] *= diag[i].conj();
                }
            }
            // θ gradient: dz/dθ = Tr[adjoint† (-i Jy) after_disp].
            if matches!(self.mode, DecompositionMode::General) {
                let w = &self.jy * &after_disp[layer];
                let mut dz = Complex64::new(0.0, 0.0);
                for c in 0..self.k {
                    for i in 0..d {
                        dz += adjoint[(i, c)].conj() * w[(i, c)];
                    }
                }
                let dzdtheta = Complex64::new(0.0, -1.0) * dz;
                grad[layer] = scale * (zbar * dzdtheta).re;
            }
            // Peel D(θ) off the left.
            adjoint = dagger(&disp_mats[layer]) * adjoint;
            snap_grad(
                &after_snap[layer],
                &adjoint,
                grad,
                theta_base + layer * (d - 1),
            );
        }

        1.0 - fidelity
    }
}

/// Haar-distributed random unitary: QR of a complex Gaussian matrix with the
/// R diagonal phases folded back into Q.
pub fn haar_random_unitary(d: usize, seed: u64) -> Result<CMat> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(haar_random_unitary_from(d, &mut rng))
}

/// Haar sampling from a caller-provided generator.
pub fn haar_random_unitary_from<R: Rng>(d: usize, rng: &mut R) -> CMat {
    use rand_distr::StandardNormal;
    let g = CMat::from_fn(d, d, |_, _| {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        Complex64::new(x, y)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / re(rkk.norm())
        } else {
            re(1.0)
        };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Parameter count of a depth-N program: `N + (N+1)(d-1)` in general mode,
/// `(N+1)(d-1)` with fixed π/2 displacements.
pub fn parameter_count(d: usize, depth: usize, mode: DecompositionMode) -> usize {
    match mode {
        DecompositionMode::General => depth + (depth + 1) * (d - 1),
        DecompositionMode::PiHalfCanonical => (depth + 1) * (d - 1),
    }
}

/// Minimal depth d-1 from counting parameters against the d²-1 of SU(d).
pub fn minimal_depth(d: usize) -> usize {
    d - 1
}

/// Convenience: infidelity of a program against a target unitary.
pub fn program_infidelity(program: &SnapDisplacementProgram, target: &CMat) -> Result<f64> {
    let u = reconstruct(program)?;
    Ok(1.0 - unitary_fidelity(&u, target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{displacement, DisplacementParams};
    use crate::linalg::{identity, max_abs_diff, phase_aligned_distance, unitarity_residual};
    use std::f64::consts::PI;

    fn dim(d: usize) -> SpinDimension {
        SpinDimension::new(d).unwrap()
    }

    #[test]
    fn empty_program_is_identity() {
        let p = SnapDisplacementProgram::identity(4);
        let u = reconstruct(&p).unwrap();
        assert!(max_abs_diff(&u, &identity(4)) < 1e-15);
    }

    #[test]
    fn single_layer_reproduces_displacement() {
        let p = SnapDisplacementProgram {
            d: 5,
            mode: DecompositionMode::General,
            layers: vec![Layer {
                theta: FRAC_PI_2,
                snap: vec![0.0; 5],
            }],
            trailing_snap: vec![0.0; 5],
        };
        let u = reconstruct(&p).unwrap();
        let want = displacement(dim(5), DisplacementParams::new(FRAC_PI_2, 0.0));
        assert!(max_abs_diff(&u, &want) < 1e-12);
    }

    #[test]
    fn rejects_layer_dimension_mismatch() {
        let p = SnapDisplacementProgram {
            d: 5,
            mode: DecompositionMode::General,
            layers: vec![Layer {
                theta: 0.3,
                snap: vec![0.0; 4],
            }],
            trailing_snap: vec![0.0; 5],
        };
        assert!(reconstruct(&p).is_err());
    }

    #[test]
    fn pi_half_canonical_identity_via_jz_conjugation() {
        // e^{iπJz} D(π/2) e^{-iπJz} = D(π/2)†, so two π/2 layers with an
        // interleaved Jz-type SNAP of angle π compose to the identity up to
        // global phase.
        for d in [2usize, 5, 8] {
            let ops = build_angular_momentum(dim(d));
            let half = displacement(dim(d), DisplacementParams::new(FRAC_PI_2, 0.0));
            let rz = crate::linalg::expm_i_hermitian(&ops.jz, -PI); // e^{+iπJz}
            let conjugated = &rz * &half * dagger(&rz);
            assert!(
                phase_aligned_distance(&conjugated, &dagger(&half)) < 1e-11,
                "d={d}"
            );
            // Same statement as a two-layer π/2 program.
            let jz_snap = crate::gates::jz_rotation_phases(dim(d), PI).0;
            let neg_jz_snap: Vec<f64> = jz_snap.iter().map(|p| -p).collect();
            let p = SnapDisplacementProgram {
                d,
                mode: DecompositionMode::PiHalfCanonical,
                layers: vec![
                    Layer {
                        theta: FRAC_PI_2,
                        snap: vec![0.0; d],
                    },
                    Layer {
                        theta: FRAC_PI_2,
                        snap: neg_jz_snap,
                    },
                ],
                trailing_snap: jz_snap,
            };
            let u = reconstruct(&p).unwrap();
            assert!(
                phase_aligned_distance(&u, &identity(d)) < 1e-11,
                "program form, d={d}"
            );
        }
    }

    #[test]
    fn decompose_exact_representative_at_depth_one() {
        let target = displacement(dim(4), DisplacementParams::new(FRAC_PI_2, 0.0));
        let result = decompose(
            &target,
            1,
            DecompositionMode::General,
            7,
            &DecomposeOptions::default(),
        )
        .unwrap();
        assert!(result.infidelity < 1e-10, "infidelity {}", result.infidelity);
    }

    #[test]
    fn decompose_rejects_non_unitary_target() {
        let bad = identity(3).scale(2.0);
        assert!(
            decompose(&bad, 1, DecompositionMode::General, 1, &DecomposeOptions::default())
                .is_err()
        );
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let d = 4;
        let target = haar_random_unitary(d, 99).unwrap();
        let pairs: Vec<(CVec, CVec)> = (0..d)
            .map(|b| {
                (
                    crate::spin::basis_state(d, b),
                    target.column(b).into_owned(),
                )
            })
            .collect();
        let problem = MapProblem::new(dim(d), &pairs, 3, DecompositionMode::General);
        let n = problem.parameter_len();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let mut grad = vec![0.0; n];
        let f0 = problem.infidelity_and_gradient(&x, &mut grad);
        assert!(f0 > 0.0);
        let h = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let mut scratch = vec![0.0; n];
            let fp = problem.infidelity_and_gradient(&xp, &mut scratch);
            let fm = problem.infidelity_and_gradient(&xm, &mut scratch);
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "param {i}: analytic {} vs fd {}",
                grad[i],
                fd
            );
        }
    }

    #[test]
    fn decompose_haar_target_small() {
        // d = 3, N = d: reaches the convergence floor.
        let d = 3;
        let target = haar_random_unitary(d, 1234).unwrap();
        let result = decompose(
            &target,
            d,
            DecompositionMode::General,
            42,
            &DecomposeOptions::default(),
        )
        .unwrap();
        assert!(result.infidelity < 1e-8, "infidelity {}", result.infidelity);
        // Re-evaluation through the public path matches the report.
        let again = program_infidelity(&result.program, &target).unwrap();
        assert!((again - result.infidelity).abs() < 1e-12);
    }

    #[test]
    fn infidelity_non_increasing_with_depth() {
        let d = 3;
        let target = haar_random_unitary(d, 77).unwrap();
        let opts = DecomposeOptions {
            restarts: 8,
            ..Default::default()
        };
        let mut previous = f64::INFINITY;
        for depth in 1..=4 {
            let result = decompose(&target, depth, DecompositionMode::General, 11, &opts).unwrap();
            assert!(
                result.infidelity <= previous + 1e-9,
                "depth {depth}: {} after {previous}",
                result.infidelity
            );
            previous = result.infidelity;
        }
    }

    #[test]
    fn pi_half_mode_with_doubled_depth_matches_general() {
        let d = 3;
        let target = haar_random_unitary(d, 31).unwrap();
        let opts = DecomposeOptions {
            restarts: 12,
            ..Default::default()
        };
        let general = decompose(&target, d, DecompositionMode::General, 5, &opts).unwrap();
        let canonical =
            decompose(&target, 2 * d, DecompositionMode::PiHalfCanonical, 5, &opts).unwrap();
        assert!(general.infidelity < 1e-8);
        assert!(
            canonical.infidelity < 1e-7,
            "π/2-canonical infidelity {}",
            canonical.infidelity
        );
    }

    #[test]
    fn universality_commutator_structure() {
        // i[Jy, Q_n] with Q_n = Σ_{q≤n} |q⟩⟨q| produces the σx-like coupling
        // of the {n, n+1} subspace with magnitude √((n+1)(d-n-1))/2; asserted
        // against the directly computed commutator.
        let d = 6;
        let ops = build_angular_momentum(dim(d));
        for n in 0..d - 1 {
            let mut q = CMat::zeros(d, d);
            for i in 0..=n {
                q[(i, i)] = re(1.0);
            }
            let bracket = crate::spin::commutator(&ops.jy, &q).map(|z| z * crate::linalg::IM);
            let magnitude = 0.5 * (((n + 1) * (d - n - 1)) as f64).sqrt();
            let mut expected = CMat::zeros(d, d);
            expected[(n, n + 1)] = re(-magnitude);
            expected[(n + 1, n)] = re(-magnitude);
            assert!(
                max_abs_diff(&bracket, &expected) < 1e-12,
                "n={n}"
            );
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(parameter_count(4, 3, DecompositionMode::General), 15); // = d²-1
        assert_eq!(parameter_count(2, 1, DecompositionMode::General), 3); // = d²-1
        assert_eq!(parameter_count(4, 3, DecompositionMode::PiHalfCanonical), 12);
        assert_eq!(minimal_depth(8), 7);
        assert_eq!(minimal_depth(2), 1);
    }

    #[test]
    fn haar_unitary_properties() {
        let u = haar_random_unitary(6, 3).unwrap();
        assert!(unitarity_residual(&u) < 1e-12);
        // Fixed seed reproduces the matrix; different seeds differ.
        let v = haar_random_unitary(6, 3).unwrap();
        assert!(max_abs_diff(&u, &v) == 0.0);
        let w = haar_random_unitary(6, 4).unwrap();
        assert!(max_abs_diff(&u, &w) > 1e-3);
        assert!(haar_random_unitary(1, 0).is_err());
    }

    #[test]
    fn haar_eigenphases_are_uniform() {
        // Pooled eigenvalue phases over 2000 samples vs the uniform CDF
        // (Kolmogorov-Smirnov). The marginal phase distribution of a Haar
        // unitary is uniform on the circle.
        let d = 4;
        let samples = 2000;
        let mut phases: Vec<f64> = Vec::with_capacity(d * samples);
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        for _ in 0..samples {
            let u = haar_random_unitary_from(d, &mut rng);
            let (_, t) = u.schur().unpack();
            for i in 0..d {
                if i + 1 < d {
                    assert!(t[(i + 1, i)].norm() < 1e-8, "Schur not triangular");
                }
                phases.push(t[(i, i)].arg());
            }
        }
        phases.sort_by(f64::total_cmp);
        let n = phases.len() as f64;
        let mut ks = 0.0f64;
        for (i, &phi) in phases.iter().enumerate() {
            let f_uniform = (phi + PI) / (2.0 * PI);
            let f_low = i as f64 / n;
            let f_high = (i + 1) as f64 / n;
            ks = ks.max((f_uniform - f_low).abs()).max((f_high - f_uniform).abs());
        }
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn program_json_round_trip() {
        let p = SnapDisplacementProgram {
            d: 3,
            mode: DecompositionMode::PiHalfCanonical,
            layers: vec![Layer {
                theta: FRAC_PI_2,
                snap: vec![0.0, 0.25, -1.5],
            }],
            trailing_snap: vec![0.0, 1.0, 2.0],
        };
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("pi_half_canonical"));
        let back: SnapDisplacementProgram = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }
}
