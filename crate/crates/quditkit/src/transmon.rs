//! Charge-basis transmon model: Hamiltonian diagonalization, derived
//! spectra, confined-level and charge-dispersion estimates, and device
//! parameter fitting.
//!
//! Units: energies and frequencies in GHz, times in ns. The factor 2π enters
//! exactly once, at Hamiltonian assembly in the pulse engine; everything
//! here stays in plain GHz.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{re, CMat};
use crate::{Error, Result};

/// Physical transmon parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    /// Josephson energy E_J in GHz.
    pub ej: f64,
    /// Capacitive energy E_C in GHz.
    pub ec: f64,
    /// Offset gate charge n_g (dimensionless).
    pub ng: f64,
    /// Charge-basis truncation: the basis spans n ∈ [-cutoff, cutoff].
    pub charge_cutoff: usize,
}

impl TransmonSpec {
    pub fn new(ej: f64, ec: f64, ng: f64) -> Self {
        TransmonSpec {
            ej,
            ec,
            ng,
            charge_cutoff: 40,
        }
    }

    /// The measured device of the reference experiment:
    /// E_J = 29.09 GHz, E_C = 0.108 GHz (E_J/E_C ≈ 269).
    pub fn reference_device() -> Self {
        TransmonSpec::new(29.09, 0.108, 0.0)
    }
}

/// Measured transition frequencies f01..f67 of the reference device, GHz.
pub const REFERENCE_TRANSITIONS: [f64; 7] = [4.896, 4.782, 4.664, 4.539, 4.407, 4.267, 4.116];

/// Device description file: Table-style fields with optional measured
/// transitions for fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpecFile {
    pub ej: f64,
    pub ec: f64,
    #[serde(default)]
    pub ng: f64,
    #[serde(default)]
    pub charge_cutoff: Option<usize>,
    #[serde(default)]
    pub f01: Option<f64>,
    #[serde(default)]
    pub f12: Option<f64>,
    #[serde(default)]
    pub f23: Option<f64>,
    #[serde(default)]
    pub f34: Option<f64>,
    #[serde(default)]
    pub f45: Option<f64>,
    #[serde(default)]
    pub f56: Option<f64>,
    #[serde(default)]
    pub f67: Option<f64>,
}

impl DeviceSpecFile {
    pub fn to_spec(&self) -> TransmonSpec {
        let mut spec = TransmonSpec::new(self.ej, self.ec, self.ng);
        if let Some(cutoff) = self.charge_cutoff {
            spec.charge_cutoff = cutoff;
        }
        spec
    }

    /// The contiguous prefix of provided transitions, in ladder order.
    pub fn transitions(&self) -> Vec<f64> {
        [
            self.f01, self.f12, self.f23, self.f34, self.f45, self.f56, self.f67,
        ]
        .iter()
        .map_while(|f| *f)
        .collect()
    }
}

/// Eigensystem of the transmon restricted to the lowest kept levels.
#[derive(Debug, Clone)]
pub struct TransmonEigenSystem {
    /// Eigenenergies in GHz, ascending (absolute, not offset).
    pub energies: Vec<f64>,
    /// Charge operator ⟨i|(n̂ - n_g)|j⟩ in the eigenbasis, with eigenvector
    /// phases fixed so nearest-neighbor elements are real positive.
    pub charge_matrix: CMat,
    pub dim_kept: usize,
}

impl TransmonEigenSystem {
    /// Transition frequency f_{n,n+1} in GHz.
    pub fn transition(&self, n: usize) -> f64 {
        self.energies[n + 1] - self.energies[n]
    }

    /// All transitions f_{n,n+1} for kept levels.
    pub fn transitions(&self) -> Vec<f64> {
        (0..self.dim_kept - 1).map(|n| self.transition(n)).collect()
    }
}

fn charge_hamiltonian(spec: &TransmonSpec, cutoff: usize) -> DMatrix<f64> {
    let size = 2 * cutoff + 1;
    let mut h = DMatrix::<f64>::zeros(size, size);
    for k in 0..size {
        let n = k as f64 - cutoff as f64;
        h[(k, k)] = 4.0 * spec.ec * (n - spec.ng).powi(2);
        if k + 1 < size {
            h[(k, k + 1)] = -spec.ej / 2.0;
            h[(k + 1, k)] = -spec.ej / 2.0;
        }
    }
    h
}

fn sorted_eigen(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let size = h.nrows();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(size, size);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Diagonalizes the charge-basis Hamiltonian
/// `4 E_C (n̂ - n_g)² - E_J cos φ̂` (cos φ̂ as the symmetric hopping with ½ on
/// the off-diagonals) and keeps the lowest `levels` states.
///
/// Fails if `levels` exceeds the confined estimate plus margin or if the
/// cutoff has not converged (highest kept eigenvalue moves by ≥ 1e-9 GHz
/// when the cutoff grows by 5).
pub fn diagonalize(spec: &TransmonSpec, levels: usize) -> Result<TransmonEigenSystem> {
    if levels < 1 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let confined = confined_levels(spec);
    if levels as f64 > confined.ceil() + 4.0 {
        return Err(Error::InvalidArgument(format!(
            "requested {levels} levels but only ~{confined:.1} are confined in the well"
        )));
    }
    let size = 2 * spec.charge_cutoff + 1;
    if levels > size {
        return Err(Error::CutoffTooSmall(format!(
            "charge basis of size {size} cannot hold {levels} levels"
        )));
    }

    let (values, vectors) = sorted_eigen(&charge_hamiltonian(spec, spec.charge_cutoff));
    // Convergence: grow the cutoff by 5 and compare the highest kept level.
    let (values_big, _) = sorted_eigen(&charge_hamiltonian(spec, spec.charge_cutoff + 5));
    let shift = (values[levels - 1] - values_big[levels - 1]).abs();
    if shift >= 1e-9 {
        return Err(Error::CutoffTooSmall(format!(
            "eigenvalue {} shifts by {shift:.3e} GHz when the cutoff grows by 5",
            levels - 1
        )));
    }

    // Charge matrix in the kept eigenbasis; eigenvectors are real, so fix
    // signs to make nearest-neighbor elements positive.
    let mut kept: Vec<DVector<f64>> = (0..levels)
        .map(|k| vectors.column(k).into_owned())
        .collect();
    let charge_of = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for k in 0..size {
            let n = k as f64 - spec.charge_cutoff as f64;
            acc += a[k] * (n - spec.ng) * b[k];
        }
        acc
    };
    for i in 1..levels {
        if charge_of(&kept[i - 1], &kept[i]) < 0.0 {
            kept[i] *= -1.0;
        }
    }
    let mut charge_matrix = CMat::zeros(levels, levels);
    for i in 0..levels {
        for j in 0..levels {
            charge_matrix[(i, j)] = re(charge_of(&kept[i], &kept[j]));
        }
    }

    Ok(TransmonEigenSystem {
        energies: values[..levels].to_vec(),
        charge_matrix,
        dim_kept: levels,
    })
}

/// Rough count of levels confined in the cosine well: √(E_J / 2E_C).
pub fn confined_levels(spec: &TransmonSpec) -> f64 {
    (spec.ej / (2.0 * spec.ec)).sqrt()
}

/// Asymptotic charge dispersion of level n:
/// `ε_n = (-1)ⁿ E_C (2^{4n+5}/n!) √(2/π) (E_J/2E_C)^{n/2+3/4} e^{-√(8E_J/E_C)}`.
pub fn charge_dispersion(spec: &TransmonSpec, n: usize) -> f64 {
    let ratio = spec.ej / (2.0 * spec.ec);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let mut factor = 2f64.powi(4 * n as i32 + 5);
    for k in 1..=n {
        factor /= k as f64;
    }
    sign * spec.ec
        * factor
        * (2.0 / std::f64::consts::PI).sqrt()
        * ratio.powf(n as f64 / 2.0 + 0.75)
        * (-(8.0 * spec.ej / spec.ec).sqrt()).exp()
}

/// Least-squares fit of (E_J, E_C) to a ladder of measured transition
/// frequencies f01, f12, … at n_g = 0.
pub fn fit_to_frequencies(measured: &[f64], initial: (f64, f64)) -> Result<TransmonSpec> {
    if measured.len() < 2 {
        return Err(Error::FitFailure(
            "need at least two transition frequencies".into(),
        ));
    }
    let levels = measured.len() + 1;
    let objective = |ej: f64, ec: f64| -> f64 {
        if ej <= 0.0 || ec <= 0.0 {
            return f64::INFINITY;
        }
        let spec = TransmonSpec::new(ej, ec, 0.0);
        match diagonalize(&spec, levels) {
            Ok(system) => system
                .transitions()
                .iter()
                .zip(measured)
                .map(|(model, target)| (model - target).powi(2))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };
    // Two log-parameters, quasi-Newton with central-difference gradients.
    let result = crate::optim::minimize(
        |x, g| {
            let f0 = objective(x[0].exp(), x[1].exp());
            let h = 1e-6;
            for (i, gi) in g.iter_mut().enumerate() {
                let mut xp = [x[0], x[1]];
                xp[i] += h;
                let mut xm = [x[0], x[1]];
                xm[i] -= h;
                let fp = objective(xp[0].exp(), xp[1].exp());
                let fm = objective(xm[0].exp(), xm[1].exp());
                *gi = (fp - fm) / (2.0 * h);
            }
            f0
        },
        &[initial.0.ln(), initial.1.ln()],
        &crate::optim::Options {
            max_iterations: 200,
            gradient_tol: 1e-12,
            ..Default::default()
        },
    );
    if !result.value.is_finite() {
        return Err(Error::FitFailure("objective diverged".into()));
    }
    Ok(TransmonSpec::new(result.x[0].exp(), result.x[1].exp(), 0.0))
}
