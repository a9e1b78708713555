//! Lab-frame propagator simulation of multi-tone displacement drives with
//! phase, detuning, and DRAG corrections.
//!
//! The Hamiltonian is `H(t) = 2π·diag(E) + 2π·f(t)·n̂` in the transmon
//! eigenbasis (E in GHz, t in ns; the 2π enters exactly here), with the full
//! cosine drive and no rotating-wave approximation. Integration runs in the
//! transmon frame `V(t) = e^{+i2π diag(E - E₀) t} U(t)` — an exact change of
//! variables that removes the fast free evolution — using an adaptive
//! Runge-Kutta-Fehlberg 7(8) scheme. Parameter derivatives for detuning and
//! DRAG optimization co-integrate with the propagator in the same pass, so
//! gradients are exact up to integration tolerance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::gates::{displacement, DisplacementParams, SnapPhases};
use crate::linalg::{re, CMat};
use crate::optim;
use crate::spin::{ladder_element, SpinDimension};
use crate::transmon::TransmonEigenSystem;
use crate::{Error, Result};

use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Flat pulse with cosine-squared ramps on both edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    /// Total duration T in ns.
    pub duration: f64,
    /// Ramp length as a fraction of T per edge (default 1/4).
    pub ramp_fraction: f64,
}

impl PulseEnvelope {
    pub fn new(duration: f64) -> Self {
        PulseEnvelope {
            duration,
            ramp_fraction: 0.25,
        }
    }

    fn ramp(&self) -> f64 {
        self.ramp_fraction * self.duration
    }

    /// Dimensionless shape in [0, 1].
    pub fn value(&self, t: f64) -> f64 {
        let r = self.ramp();
        if t <= 0.0 || t >= self.duration {
            0.0
        } else if t < r {
            0.5 * (1.0 - (PI * t / r).cos())
        } else if t <= self.duration - r {
            1.0
        } else {
            0.5 * (1.0 - (PI * (self.duration - t) / r).cos())
        }
    }

    /// Time derivative of the shape, 1/ns.
    pub fn derivative(&self, t: f64) -> f64 {
        let r = self.ramp();
        if t <= 0.0 || t >= self.duration {
            0.0
        } else if t < r {
            0.5 * PI / r * (PI * t / r).sin()
        } else if t <= self.duration - r {
            0.0
        } else {
            -0.5 * PI / r * (PI * (self.duration - t) / r).sin()
        }
    }

    /// ∫ shape dt over [0, T] = T·(1 - ramp_fraction).
    pub fn area(&self) -> f64 {
        self.duration * (1.0 - self.ramp_fraction)
    }

    /// Segment boundaries where the shape has kinks in its curvature.
    fn segments(&self) -> [f64; 4] {
        let r = self.ramp();
        [0.0, r, self.duration - r, self.duration]
    }
}

/// One drive tone addressing the |n-1⟩ ↔ |n⟩ transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSpec {
    /// Carrier frequency in GHz (resonant transition frequency by default).
    pub frequency: f64,
    /// Carrier phase in rad.
    pub base_phase: f64,
    /// Frequency offset δ in GHz.
    pub detuning: f64,
    /// Dimensionless derivative-quadrature weight.
    pub drag_weight: f64,
    /// Peak drive amplitude ε in GHz (includes the √(n(d-n)) ladder scale
    /// over the charge matrix element).
    pub amplitude: f64,
}

/// The multi-tone displacement drive: d-1 tones for a d-level displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiToneDrive {
    pub d: usize,
    pub tones: Vec<ToneSpec>,
    /// Scale of the DRAG quadrature in ns (1/(2π·E_C) when calibrated).
    pub drag_scale: f64,
}

impl MultiToneDrive {
    /// Copy with per-tone detunings and DRAG weights replaced.
    pub fn with_corrections(&self, detunings: &[f64], drag_weights: &[f64]) -> Result<Self> {
        if detunings.len() != self.tones.len() || drag_weights.len() != self.tones.len() {
            return Err(Error::DimensionMismatch(format!(
                "corrections must carry {} entries",
                self.tones.len()
            )));
        }
        let mut drive = self.clone();
        for (tone, (&det, &drag)) in drive
            .tones
            .iter_mut()
            .zip(detunings.iter().zip(drag_weights))
        {
            tone.detuning = det;
            tone.drag_weight = drag;
        }
        Ok(drive)
    }
}

/// Pre- and post-pulse SNAP phases plus per-tone detunings and DRAG weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSet {
    pub pre_snap: Vec<f64>,
    pub post_snap: Vec<f64>,
    pub detunings: Vec<f64>,
    pub drag_weights: Vec<f64>,
}

impl CorrectionSet {
    pub fn none(d: usize, tones: usize) -> Self {
        CorrectionSet {
            pre_snap: vec![0.0; d],
            post_snap: vec![0.0; d],
            detunings: vec![0.0; tones],
            drag_weights: vec![0.0; tones],
        }
    }
}

/// Builds the resonant multi-tone drive whose RWA limit is `D(θ, 0)`:
/// tone n is resonant with |n-1⟩ ↔ |n⟩, carries phase -π/2, and its peak
/// amplitude is chosen so the integrated envelope area yields the target
/// angle θ with the ladder ratio √(n(d-n)).
pub fn calibrated_drive(
    system: &TransmonEigenSystem,
    d: usize,
    theta: f64,
    envelope: &PulseEnvelope,
) -> Result<MultiToneDrive> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if system.dim_kept < d + 2 {
        return Err(Error::InvalidArgument(format!(
            "simulation needs at least {} levels (d + 2 guards), got {}",
            d + 2,
            system.dim_kept
        )));
    }
    // Peak of the RWA rotation rate Ω (rad/ns) from the pulse area.
    let omega_peak = theta / envelope.area();
    let mut tones = Vec::with_capacity(d - 1);
    for n in 1..d {
        let charge_element = system.charge_matrix[(n - 1, n)].re;
        if charge_element.abs() < 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "vanishing charge element on transition {n}"
            )));
        }
        tones.push(ToneSpec {
            frequency: system.transition(n - 1),
            base_phase: -FRAC_PI_2,
            detuning: 0.0,
            drag_weight: 0.0,
            amplitude: omega_peak * ladder_element(d, n) / (TAU * charge_element),
        });
    }
    // Anharmonicity scale for the DRAG quadrature.
    let anharmonicity = (system.transition(0) - system.transition(1)).abs().max(1e-6);
    Ok(MultiToneDrive {
        d,
        tones,
        drag_scale: 1.0 / (TAU * anharmonicity),
    })
}

/// Which drive parameters the optimizer may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreeParams {
    pub detunings: bool,
    pub drag_weights: bool,
}

impl FreeParams {
    pub fn count(&self, tones: usize) -> usize {
        let mut n = 0;
        if self.detunings {
            n += tones;
        }
        if self.drag_weights {
            n += tones;
        }
        n
    }
}

/// Scalar drive f(t) in GHz and its derivatives with respect to the free
/// parameters.
struct DriveFunction<'a> {
    drive: &'a MultiToneDrive,
    envelope: &'a PulseEnvelope,
    free: FreeParams,
}

impl DriveFunction<'_> {
    fn value(&self, t: f64) -> f64 {
        let env = self.envelope.value(t);
        let denv = self.envelope.derivative(t);
        let mut f = 0.0;
        for tone in &self.drive.tones {
            let phase = TAU * (tone.frequency + tone.detuning) * t + tone.base_phase;
            f += tone.amplitude
                * (env * phase.cos()
                    + tone.drag_weight * self.drive.drag_scale * denv * phase.sin());
        }
        f
    }

    /// Value plus ∂f/∂x for the packed free parameters
    /// [δ₁..δ_k, w₁..w_k as enabled].
    fn value_and_partials(&self, t: f64, partials: &mut [f64]) -> f64 {
        let env = self.envelope.value(t);
        let denv = self.envelope.derivative(t);
        let n_tones = self.drive.tones.len();
        let mut f = 0.0;
        let mut idx = 0;
        let detuning_base = if self.free.detunings {
            idx += n_tones;
            Some(0)
        } else {
            None
        };
        let drag_base = if self.free.drag_weights {
            let b = idx;
            Some(b)
        } else {
            None
        };
        for (k, tone) in self.drive.tones.iter().enumerate() {
            let phase = TAU * (tone.frequency + tone.detuning) * t + tone.base_phase;
            let (sin, cos) = phase.sin_cos();
            let drag_term = tone.drag_weight * self.drive.drag_scale * denv;
            f += tone.amplitude * (env * cos + drag_term * sin);
            if let Some(b) = detuning_base {
                partials[b + k] =
                    tone.amplitude * TAU * t * (-env * sin + drag_term * cos);
            }
            if let Some(b) = drag_base {
                partials[b + k] = tone.amplitude * self.drive.drag_scale * denv * sin;
            }
        }
        f
    }
}

// ---------------------------------------------------------------------
// Runge-Kutta-Fehlberg 7(8) with adaptive step control.
// ---------------------------------------------------------------------

const STAGES: usize = 13;
const C: [f64; STAGES] = [
    0.0,
    2.0 / 27.0,
    1.0 / 9.0,
    1.0 / 6.0,
    5.0 / 12.0,
    0.5,
    5.0 / 6.0,
    1.0 / 6.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0,
    0.0,
    1.0,
];
const A: [[f64; STAGES - 1]; STAGES] = {
    let mut a = [[0.0; STAGES - 1]; STAGES];
    a[1][0] = 2.0 / 27.0;
    a[2][0] = 1.0 / 36.0;
    a[2][1] = 1.0 / 12.0;
    a[3][0] = 1.0 / 24.0;
    a[3][2] = 1.0 / 8.0;
    a[4][0] = 5.0 / 12.0;
    a[4][2] = -25.0 / 16.0;
    a[4][3] = 25.0 / 16.0;
    a[5][0] = 1.0 / 20.0;
    a[5][3] = 0.25;
    a[5][4] = 0.2;
    a[6][0] = -25.0 / 108.0;
    a[6][3] = 125.0 / 108.0;
    a[6][4] = -65.0 / 27.0;
    a[6][5] = 125.0 / 54.0;
    a[7][0] = 31.0 / 300.0;
    a[7][4] = 61.0 / 225.0;
    a[7][5] = -2.0 / 9.0;
    a[7][6] = 13.0 / 900.0;
    a[8][0] = 2.0;
    a[8][3] = -53.0 / 6.0;
    a[8][4] = 704.0 / 45.0;
    a[8][5] = -107.0 / 9.0;
    a[8][6] = 67.0 / 90.0;
    a[8][7] = 3.0;
    a[9][0] = -91.0 / 108.0;
    a[9][3] = 23.0 / 108.0;
    a[9][4] = -976.0 / 135.0;
    a[9][5] = 311.0 / 54.0;
    a[9][6] = -19.0 / 60.0;
    a[9][7] = 17.0 / 6.0;
    a[9][8] = -1.0 / 12.0;
    a[10][0] = 2383.0 / 4100.0;
    a[10][3] = -341.0 / 164.0;
    a[10][4] = 4496.0 / 1025.0;
    a[10][5] = -301.0 / 82.0;
    a[10][6] = 2133.0 / 4100.0;
    a[10][7] = 45.0 / 82.0;
    a[10][8] = 45.0 / 164.0;
    a[10][9] = 18.0 / 41.0;
    a[11][0] = 3.0 / 205.0;
    a[11][5] = -6.0 / 41.0;
    a[11][6] = -3.0 / 205.0;
    a[11][7] = -3.0 / 41.0;
    a[11][8] = 3.0 / 41.0;
    a[11][9] = 6.0 / 41.0;
    a[12][0] = -1777.0 / 4100.0;
    a[12][3] = -341.0 / 164.0;
    a[12][4] = 4496.0 / 1025.0;
    a[12][5] = -289.0 / 82.0;
    a[12][6] = 2193.0 / 4100.0;
    a[12][7] = 51.0 / 82.0;
    a[12][8] = 33.0 / 164.0;
    a[12][9] = 12.0 / 41.0;
    a[12][11] = 1.0;
    a
};
/// 8th-order weights (local extrapolation).
const B8: [f64; STAGES] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    34.0 / 105.0,
    9.0 / 35.0,
    9.0 / 35.0,
    9.0 / 280.0,
    9.0 / 280.0,
    0.0,
    41.0 / 840.0,
    41.0 / 840.0,
];

/// Integrates y' = rhs(t, y) from t0 to t1 with adaptive RKF7(8).
///
/// `error_rate` is the admissible local error per unit time, so the
/// accumulated error over a span T stays near `error_rate · T`.
fn integrate_adaptive<F>(
    rhs: &mut F,
    mut y: CMat,
    t0: f64,
    t1: f64,
    error_rate: f64,
) -> Result<CMat>
where
    F: FnMut(f64, &CMat, &mut CMat),
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(y);
    }
    let (rows, cols) = y.shape();
    let mut k: Vec<CMat> = (0..STAGES).map(|_| CMat::zeros(rows, cols)).collect();
    let mut stage = CMat::zeros(rows, cols);
    let mut t = t0;
    let mut h = (span / 100.0).min(0.02);
    let mut steps = 0usize;
    const MAX_STEPS: usize = 20_000_000;

    while t < t1 - 1e-12 {
        h = h.min(t1 - t);
        if h < 1e-13 {
            return Err(Error::IntegrationFailure(format!(
                "step size underflow at t = {t}"
            )));
        }
        for s in 0..STAGES {
            stage.copy_from(&y);
            for j in 0..s {
                if A[s][j] != 0.0 {
                    let w = re(h * A[s][j]);
                    stage.zip_apply(&k[j], |dst, src| *dst += w * src);
                }
            }
            let ts = t + C[s] * h;
            let (before, after) = k.split_at_mut(s);
            let _ = before;
            rhs(ts, &stage, &mut after[0]);
        }
        // 8th-order increment and the Fehlberg error estimate
        // err = h·41/840·(k₀ + k₁₀ - k₁₁ - k₁₂).
        let mut y_new = y.clone();
        for s in 0..STAGES {
            if B8[s] != 0.0 {
                let w = re(h * B8[s]);
                y_new.zip_apply(&k[s], |dst, src| *dst += w * src);
            }
        }
        let mut err: f64 = 0.0;
        let escale = h * 41.0 / 840.0;
        for idx in 0..rows * cols {
            let e = (k[0][idx] + k[10][idx] - k[11][idx] - k[12][idx]) * re(escale);
            err = err.max(e.norm());
        }
        let ratio = err / (error_rate * h);
        if ratio <= 1.0 {
            t += h;
            y = y_new;
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::IntegrationFailure("step budget exhausted".into()));
            }
        }
        let factor = if ratio > 0.0 {
            (0.9 * ratio.powf(-1.0 / 8.0)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Ok(y)
}

/// Transmon-frame propagation with optional co-integrated parameter
/// derivatives. Returns (V(T), [∂V/∂x]) in the frame rotating with
/// `diag(E - E₀)`.
fn propagate_frame(
    system: &TransmonEigenSystem,
    drive: &MultiToneDrive,
    envelope: &PulseEnvelope,
    free: FreeParams,
    tol: f64,
) -> Result<(CMat, Vec<CMat>)> {
    let n = system.dim_kept;
    if drive.d + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "simulation dimension {n} must be at least d + 2 = {}",
            drive.d + 2
        )));
    }
    let n_params = free.count(drive.tones.len());
    let energies: Vec<f64> = system
        .energies
        .iter()
        .map(|e| e - system.energies[0])
        .collect();
    let charge = system.charge_matrix.clone();
    let function = DriveFunction {
        drive,
        envelope,
        free,
    };

    // State layout: [V | V_x1 | … | V_xP] as one n × n(1+P) matrix.
    let cols = n * (1 + n_params);
    let mut y0 = CMat::zeros(n, cols);
    for i in 0..n {
        y0[(i, i)] = re(1.0);
    }

    let mut partials = vec![0.0; n_params];
    let mut rotated = CMat::zeros(n, cols);
    let mut coupled = CMat::zeros(n, cols);
    let mut rhs = move |t: f64, y: &CMat, out: &mut CMat| {
        let f = if n_params == 0 {
            function.value(t)
        } else {
            function.value_and_partials(t, &mut partials)
        };
        // W = Ñ(t)·Y with Ñ = diag(u)·N·diag(u)*, u_a = e^{+i2πE_a t}.
        for (i, &e) in energies.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -TAU * e * t);
            for c in 0..cols {
                rotated[(i, c)] = phase * y[(i, c)];
            }
        }
        charge.mul_to(&rotated, &mut coupled);
        let minus_i_tau = Complex64::new(0.0, -TAU);
        for (i, &e) in energies.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, TAU * e * t);
            for c in 0..cols {
                coupled[(i, c)] *= phase;
            }
        }
        // RHS_V = -i·2π f·W₀; RHS_{Vx} = -i·2π(g_x W₀ + f W_x).
        for i in 0..n {
            for c in 0..n {
                out[(i, c)] = minus_i_tau * re(f) * coupled[(i, c)];
            }
        }
        for p in 0..n_params {
            let g = partials[p];
            let off = n * (p + 1);
            for i in 0..n {
                for c in 0..n {
                    out[(i, off + c)] = minus_i_tau
                        * (re(g) * coupled[(i, c)] + re(f) * coupled[(i, off + c)]);
                }
            }
        }
    };

    // Integrate segment-wise so envelope kinks align with step boundaries;
    // the error budget is distributed over the whole pulse.
    let mut y = y0;
    let segments = envelope.segments();
    let error_rate = tol / envelope.duration.max(1e-9);
    for w in segments.windows(2) {
        if w[1] > w[0] + 1e-12 {
            y = integrate_adaptive(&mut rhs, y, w[0], w[1], error_rate)?;
        }
    }

    let v = y.view((0, 0), (n, n)).into_owned();
    let gradients = (0..n_params)
        .map(|p| y.view((0, n * (p + 1)), (n, n)).into_owned())
        .collect();
    Ok((v, gradients))
}

/// Default integration tolerance for propagator simulation.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Lab-frame propagator U(T) of the driven transmon, no rotating-wave
/// approximation.
pub fn propagate(
    system: &TransmonEigenSystem,
    drive: &MultiToneDrive,
    envelope: &PulseEnvelope,
    tol: f64,
) -> Result<CMat> {
    let (v, _) = propagate_frame(
        system,
        drive,
        envelope,
        FreeParams {
            detunings: false,
            drag_weights: false,
        },
        tol,
    )?;
    // U(T) = e^{-i2π diag(E-E₀) T}·V(T).
    let n = system.dim_kept;
    let t = envelope.duration;
    let mut u = v;
    for i in 0..n {
        let e = system.energies[i] - system.energies[0];
        let phase = Complex64::from_polar(1.0, -TAU * e * t);
        for c in 0..n {
            u[(i, c)] *= phase;
        }
    }
    Ok(u)
}

/// Transforms a lab-frame propagator into the transmon frame:
/// `Ũ(T) = diag(e^{+i2π(E_n-E₀)T})·U(T)`.
pub fn frame_transform(u_lab: &CMat, system: &TransmonEigenSystem, t: f64) -> CMat {
    let n = system.dim_kept;
    let mut u = u_lab.clone();
    for i in 0..n {
        let e = system.energies[i] - system.energies[0];
        let phase = Complex64::from_polar(1.0, TAU * e * t);
        for c in 0..n {
            u[(i, c)] *= phase;
        }
    }
    u
}

/// Top-left d×d block of a propagator.
pub fn computational_block(u: &CMat, d: usize) -> CMat {
    u.view((0, 0), (d, d)).into_owned()
}

/// Leakage out of the computational block:
/// `1 - Σ_{i,j<d} |U_ij|²/d` (population escaping to guard levels when the
/// block's columns are fed in).
pub fn leakage(u: &CMat, d: usize) -> f64 {
    let mut kept = 0.0;
    for i in 0..d {
        for j in 0..d {
            kept += u[(i, j)].norm_sqr();
        }
    }
    1.0 - kept / d as f64
}

/// Overlap fidelity `(1/d²)|Tr(D(θ,0)† block)|²` of a (possibly leaky)
/// computational block against the ideal displacement.
pub fn displacement_fidelity(block: &CMat, theta: f64) -> f64 {
    let d = block.nrows();
    let target = displacement(
        SpinDimension::new(d).expect("block dimension"),
        DisplacementParams::new(theta, 0.0),
    );
    let tr = (target.adjoint() * block).trace();
    tr.norm_sqr() / (d * d) as f64
}

/// Result of an instantaneous phase-correction optimization.
#[derive(Debug, Clone)]
pub struct PhaseCorrection {
    pub pre: SnapPhases,
    pub post: SnapPhases,
    pub fidelity: f64,
}

/// Finds SNAP phases maximizing `F = |Tr(target†·S(post)·u·S(pre))|²/d²`.
///
/// The fidelity is non-decreasing against the uncorrected value because the
/// zero-phase start is among the candidates.
pub fn optimize_phase_corrections(u_block: &CMat, target: &CMat) -> PhaseCorrection {
    let d = u_block.nrows();
    // z(a, b) = Σ C[n,m] e^{i(a_n + b_m)} with C = conj(target) ⊙ u.
    let c = CMat::from_fn(d, d, |n, m| target[(n, m)].conj() * u_block[(n, m)]);
    let objective = |x: &[f64], grad: &mut [f64]| -> f64 {
        let (a, b) = x.split_at(d);
        let mut z = Complex64::new(0.0, 0.0);
        for n in 0..d {
            for m in 0..d {
                z += c[(n, m)] * Complex64::from_polar(1.0, a[n] + b[m]);
            }
        }
        let scale = -2.0 / (d * d) as f64;
        for n in 0..d {
            let mut dz = Complex64::new(0.0, 0.0);
            for m in 0..d {
                dz += c[(n, m)] * Complex64::from_polar(1.0, a[n] + b[m]);
            }
            grad[n] = scale * (z.conj() * Complex64::new(0.0, 1.0) * dz).re;
        }
        for m in 0..d {
            let mut dz = Complex64::new(0.0, 0.0);
            for n in 0..d {
                dz += c[(n, m)] * Complex64::from_polar(1.0, a[n] + b[m]);
            }
            grad[d + m] = scale * (z.conj() * Complex64::new(0.0, 1.0) * dz).re;
        }
        1.0 - z.norm_sqr() / (d * d) as f64
    };

    // Deterministic multi-start: zero phases, a diagonal-phase heuristic,
    // and two seeded random draws.
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; 2 * d]];
    let mut heuristic = vec![0.0; 2 * d];
    for n in 0..d {
        let mut row = Complex64::new(0.0, 0.0);
        for m in 0..d {
            row += c[(n, m)];
        }
        if row.norm() > 1e-14 {
            heuristic[n] = -row.arg();
        }
    }
    starts.push(heuristic);
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0xD1CE);
        for _ in 0..2 {
            starts.push((0..2 * d).map(|_| rng.gen_range(-PI..PI)).collect());
        }
    }
    let opts = optim::Options {
        max_iterations: 300,
        gradient_tol: 1e-12,
        ..Default::default()
    };
    let mut best: Option<optim::MinimizeResult> = None;
    for x0 in &starts {
        let result = optim::minimize(objective, x0, &opts);
        if best.as_ref().is_none_or(|b| result.value < b.value) {
            best = Some(result);
        }
    }
    let best = best.expect("at least one start");
    let (a, b) = best.x.split_at(d);
    PhaseCorrection {
        pre: SnapPhases(b.to_vec()),
        post: SnapPhases(a.to_vec()),
        fidelity: 1.0 - best.value,
    }
}

/// Options for the gradient-based pulse optimization.
#[derive(Debug, Clone)]
pub struct GoatOptions {
    pub max_iterations: usize,
    /// Integration tolerance during optimization.
    pub optimize_tol: f64,
    /// Integration tolerance for the final reported fidelity.
    pub final_tol: f64,
    pub gradient_tol: f64,
}

impl Default for GoatOptions {
    fn default() -> Self {
        GoatOptions {
            max_iterations: 40,
            optimize_tol: 1e-8,
            final_tol: DEFAULT_TOL,
            gradient_tol: 1e-7,
        }
    }
}

/// Result of a detuning/DRAG optimization.
#[derive(Debug, Clone)]
pub struct GoatResult {
    pub corrections: CorrectionSet,
    pub fidelity: f64,
    pub iterations: usize,
}

/// Raw (phase-correction-free) fidelity and its exact gradient with respect
/// to the packed free parameters, from one co-integrated pass.
pub fn raw_fidelity_and_gradient(
    system: &TransmonEigenSystem,
    drive: &MultiToneDrive,
    envelope: &PulseEnvelope,
    theta: f64,
    free: FreeParams,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let d = drive.d;
    let (v, gradients) = propagate_frame(system, drive, envelope, free, tol)?;
    let target = displacement(
        SpinDimension::new(d)?,
        DisplacementParams::new(theta, 0.0),
    );
    let block = computational_block(&v, d);
    let z = (target.adjoint() * &block).trace();
    let fidelity = z.norm_sqr() / (d * d) as f64;
    let grad = gradients
        .iter()
        .map(|dv| {
            let dz = (target.adjoint() * computational_block(dv, d)).trace();
            2.0 * (z.conj() * dz).re / (d * d) as f64
        })
        .collect();
    Ok((fidelity, grad))
}

/// Gradient-based optimization of detunings and/or DRAG weights, with
/// instantaneous phase corrections re-optimized at every evaluation.
///
/// Gradients come from co-integrated parameter derivatives; at the inner
/// phase optimum the envelope theorem makes the outer gradient exact.
pub fn goat_optimize(
    system: &TransmonEigenSystem,
    drive: &MultiToneDrive,
    envelope: &PulseEnvelope,
    theta: f64,
    free: FreeParams,
    opts: &GoatOptions,
) -> Result<GoatResult> {
    let d = drive.d;
    let n_tones = drive.tones.len();
    let n_params = free.count(n_tones);
    if n_params == 0 {
        return Err(Error::InvalidArgument(
            "no free parameters selected for pulse optimization".into(),
        ));
    }
    let target = displacement(
        SpinDimension::new(d)?,
        DisplacementParams::new(theta, 0.0),
    );

    let unpack = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut detunings = vec![0.0; n_tones];
        let mut drags = vec![0.0; n_tones];
        let mut idx = 0;
        if free.detunings {
            detunings.copy_from_slice(&x[..n_tones]);
            idx = n_tones;
        }
        if free.drag_weights {
            drags.copy_from_slice(&x[idx..idx + n_tones]);
        }
        (detunings, drags)
    };
    // Preserve any corrections already baked into the incoming drive.
    let x0: Vec<f64> = {
        let mut x = Vec::with_capacity(n_params);
        if free.detunings {
            x.extend(drive.tones.iter().map(|t| t.detuning));
        }
        if free.drag_weights {
            x.extend(drive.tones.iter().map(|t| t.drag_weight));
        }
        x
    };

    let integration_failed = std::cell::Cell::new(false);
    let evaluate = |x: &[f64], grad: &mut [f64], tol: f64| -> (f64, PhaseCorrection) {
        let (detunings, drags) = unpack(x);
        let corrected = drive
            .with_corrections(&detunings, &drags)
            .expect("matching tone count");
        match propagate_frame(system, &corrected, envelope, free, tol) {
            Ok((v, gradients)) => {
                let block = computational_block(&v, d);
                let phase = optimize_phase_corrections(&block, &target);
                // z = Tr[T† S(post) U S(pre)]; dz/dx through U only.
                let post = crate::gates::snap(
                    SpinDimension::new(d).expect("valid d"),
                    &phase.post,
                )
                .expect("length checked");
                let pre = crate::gates::snap(
                    SpinDimension::new(d).expect("valid d"),
                    &phase.pre,
                )
                .expect("length checked");
                let z = (target.adjoint() * &post * &block * &pre).trace();
                for (g, dv) in grad.iter_mut().zip(&gradients) {
                    let dz = (target.adjoint() * &post * computational_block(dv, d) * &pre)
                        .trace();
                    *g = -2.0 * (z.conj() * dz).re / (d * d) as f64;
                }
                (1.0 - z.norm_sqr() / (d * d) as f64, phase)
            }
            Err(_) => {
                integration_failed.set(true);
                grad.fill(0.0);
                (f64::INFINITY, PhaseCorrection {
                    pre: SnapPhases::zeros(d),
                    post: SnapPhases::zeros(d),
                    fidelity: 0.0,
                })
            }
        }
    };

    let result = optim::minimize(
        |x, g| evaluate(x, g, opts.optimize_tol).0,
        &x0,
        &optim::Options {
            max_iterations: opts.max_iterations,
            gradient_tol: opts.gradient_tol,
            ..Default::default()
        },
    );
    if integration_failed.get() {
        return Err(Error::IntegrationFailure(
            "propagation diverged during pulse optimization".into(),
        ));
    }

    // Final evaluation at the tight tolerance.
    let mut grad = vec![0.0; n_params];
    let (infidelity, phase) = evaluate(&result.x, &mut grad, opts.final_tol);
    if !infidelity.is_finite() {
        return Err(Error::IntegrationFailure(
            "final propagation diverged".into(),
        ));
    }
    let (detunings, drag_weights) = unpack(&result.x);
    Ok(GoatResult {
        corrections: CorrectionSet {
            pre_snap: phase.pre.0.clone(),
            post_snap: phase.post.0.clone(),
            detunings,
            drag_weights,
        },
        fidelity: 1.0 - infidelity,
        iterations: result.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, unitarity_residual};
    use crate::transmon::{diagonalize, TransmonSpec};

    fn reference_system(levels: usize) -> TransmonEigenSystem {
        diagonalize(&TransmonSpec::reference_device(), levels).unwrap()
    }

    #[test]
    fn envelope_shape_and_area() {
        let env = PulseEnvelope::new(48.0);
        assert_eq!(env.value(0.0), 0.0);
        assert_eq!(env.value(48.0), 0.0);
        assert!((env.value(24.0) - 1.0).abs() < 1e-15);
        assert!((env.value(6.0) - 0.5).abs() < 1e-12); // ramp midpoint
        assert!((env.area() - 36.0).abs() < 1e-12);
        // Derivative agrees with finite differences.
        for &t in &[3.0, 11.9, 20.0, 37.0, 44.0] {
            let fd = (env.value(t + 1e-6) - env.value(t - 1e-6)) / 2e-6;
            assert!((env.derivative(t) - fd).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn integrator_reproduces_scalar_phase_evolution() {
        // y' = iωy on [0, 5]: exact answer e^{iω·5}.
        let omega = 7.3;
        let y0 = CMat::from_element(1, 1, re(1.0));
        let mut rhs = |_: f64, y: &CMat, out: &mut CMat| {
            out[(0, 0)] = Complex64::new(0.0, omega) * y[(0, 0)];
        };
        let y = integrate_adaptive(&mut rhs, y0, 0.0, 5.0, 1e-12).unwrap();
        let exact = Complex64::from_polar(1.0, omega * 5.0);
        assert!((y[(0, 0)] - exact).norm() < 1e-10);
    }

    #[test]
    fn integrator_order_scales_with_tolerance() {
        // Tightening the error rate must improve the result by orders of
        // magnitude.
        let omega = 11.0;
        let run = |rate: f64| {
            let y0 = CMat::from_element(1, 1, re(1.0));
            let mut rhs = |t: f64, y: &CMat, out: &mut CMat| {
                out[(0, 0)] =
                    Complex64::new(0.0, omega * (1.0 + 0.5 * (3.0 * t).sin())) * y[(0, 0)];
            };
            let y = integrate_adaptive(&mut rhs, y0, 0.0, 4.0, rate).unwrap();
            y[(0, 0)]
        };
        let coarse = run(1e-6);
        let fine = run(1e-12);
        let tight = run(1e-13);
        assert!((fine - tight).norm() < 1e-9);
        assert!((coarse - tight).norm() > (fine - tight).norm());
    }

    #[test]
    fn zero_drive_gives_identity_in_frame() {
        let system = reference_system(5);
        let envelope = PulseEnvelope::new(20.0);
        let drive = MultiToneDrive {
            d: 3,
            tones: vec![],
            drag_scale: 0.0,
        };
        let u = propagate(&system, &drive, &envelope, 1e-10).unwrap();
        let framed = frame_transform(&u, &system, envelope.duration);
        assert!(max_abs_diff(&framed, &identity(5)) < 1e-9);
        assert!(leakage(&framed, 3) < 1e-12);
    }

    #[test]
    fn weak_resonant_tone_drives_rabi_oscillation() {
        // Single weak tone at f01: the RWA Rabi rate is 2π·ε·⟨0|n̂|1⟩, so the
        // |1⟩ population is sin²(angle/2) with angle = 2πεc·(envelope area),
        // up to counter-rotating corrections of order (ε/f01)². Linearity:
        // doubling ε doubles the extracted rotation angle.
        let system = reference_system(4);
        let c01 = system.charge_matrix[(0, 1)].re;
        let envelope = PulseEnvelope::new(100.0);
        let run = |eps: f64| -> f64 {
            let drive = MultiToneDrive {
                d: 2,
                tones: vec![ToneSpec {
                    frequency: system.transition(0),
                    base_phase: -FRAC_PI_2,
                    detuning: 0.0,
                    drag_weight: 0.0,
                    amplitude: eps,
                }],
                drag_scale: 0.0,
            };
            let u = propagate(&system, &drive, &envelope, 1e-10).unwrap();
            u[(1, 0)].norm_sqr()
        };
        let mut angles = Vec::new();
        for &eps in &[0.001, 0.002] {
            let angle = TAU * eps * c01 * envelope.area();
            let expected = (angle / 2.0).sin().powi(2);
            let measured = run(eps);
            assert!(
                (measured - expected).abs() < 2e-3,
                "eps={eps}: population {measured} vs RWA {expected}"
            );
            angles.push(2.0 * measured.sqrt().asin());
        }
        let ratio = angles[1] / angles[0];
        assert!((ratio - 2.0).abs() < 4e-3, "angle ratio {ratio}");
    }

    #[test]
    fn calibrated_pi_pulse_transfers_population() {
        // Full multi-tone θ = π drive on d = 3: population ends in |2⟩.
        let system = reference_system(6);
        let envelope = PulseEnvelope::new(60.0);
        let drive = calibrated_drive(&system, 3, PI, &envelope).unwrap();
        let u = propagate(&system, &drive, &envelope, 1e-9).unwrap();
        let p_top = u[(2, 0)].norm_sqr();
        assert!(p_top > 0.98, "population {p_top}");
    }

    #[test]
    fn uncorrected_d3_displacement_is_high_fidelity() {
        // d = 3 at the reference 48 ns duration.
        let system = reference_system(6);
        let envelope = PulseEnvelope::new(48.0);
        let drive = calibrated_drive(&system, 3, FRAC_PI_2, &envelope).unwrap();
        let u = propagate(&system, &drive, &envelope, 1e-10).unwrap();
        let framed = frame_transform(&u, &system, envelope.duration);
        assert!(unitarity_residual(&framed) < 1e-9);
        let f_raw = displacement_fidelity(&computational_block(&framed, 3), FRAC_PI_2);
        assert!(f_raw > 0.99, "uncorrected fidelity {f_raw}");
    }

    #[test]
    fn phase_corrections_recover_snap_dressed_target() {
        let d = 4;
        let dim = SpinDimension::new(d).unwrap();
        let target = displacement(dim, DisplacementParams::new(FRAC_PI_2, 0.0));
        // u already equal to the target: zero phases are optimal.
        let result = optimize_phase_corrections(&target, &target);
        assert!((result.fidelity - 1.0).abs() < 1e-10);
        // u = S(a)·target·S(b): exactly invertible.
        let a = SnapPhases(vec![0.3, -1.2, 0.8, 2.0]);
        let b = SnapPhases(vec![-0.5, 0.9, 1.4, -2.2]);
        let dressed =
            crate::gates::snap(dim, &a).unwrap() * &target * crate::gates::snap(dim, &b).unwrap();
        let result = optimize_phase_corrections(&dressed, &target);
        assert!(
            (result.fidelity - 1.0).abs() < 1e-9,
            "fidelity {}",
            result.fidelity
        );
    }

    #[test]
    fn goat_gradient_matches_finite_differences() {
        // d = 3 with detuning and DRAG parameters at a random point.
        let system = reference_system(6);
        let envelope = PulseEnvelope::new(30.0);
        let base = calibrated_drive(&system, 3, FRAC_PI_2, &envelope).unwrap();
        let free = FreeParams {
            detunings: true,
            drag_weights: true,
        };
        let x = [0.0004, -0.0007, 0.35, -0.2];
        let drive = base.with_corrections(&x[..2], &x[2..]).unwrap();
        let (_, grad) =
            raw_fidelity_and_gradient(&system, &drive, &envelope, FRAC_PI_2, free, 1e-11)
                .unwrap();
        let h = [1e-6, 1e-6, 1e-4, 1e-4];
        for i in 0..4 {
            let mut xp = x;
            xp[i] += h[i];
            let mut xm = x;
            xm[i] -= h[i];
            let dp = base.with_corrections(&xp[..2], &xp[2..]).unwrap();
            let dm = base.with_corrections(&xm[..2], &xm[2..]).unwrap();
            let (fp, _) = raw_fidelity_and_gradient(
                &system, &dp, &envelope, FRAC_PI_2, free, 1e-11,
            )
            .unwrap();
            let (fm, _) = raw_fidelity_and_gradient(
                &system, &dm, &envelope, FRAC_PI_2, free, 1e-11,
            )
            .unwrap();
            let fd = (fp - fm) / (2.0 * h[i]);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-5, "param {i}: goat {} vs fd {fd} (rel {rel})", grad[i]);
        }
    }

    #[test]
    fn goat_improves_over_phase_only() {
        let system = reference_system(6);
        let envelope = PulseEnvelope::new(30.0);
        let drive = calibrated_drive(&system, 3, FRAC_PI_2, &envelope).unwrap();
        let u = propagate(&system, &drive, &envelope, 1e-10).unwrap();
        let framed = frame_transform(&u, &system, envelope.duration);
        let dim = SpinDimension::new(3).unwrap();
        let target = displacement(dim, DisplacementParams::new(FRAC_PI_2, 0.0));
        let phase_only =
            optimize_phase_corrections(&computational_block(&framed, 3), &target).fidelity;
        let result = goat_optimize(
            &system,
            &drive,
            &envelope,
            FRAC_PI_2,
            FreeParams {
                detunings: true,
                drag_weights: false,
            },
            &GoatOptions {
                max_iterations: 15,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            result.fidelity >= phase_only - 1e-9,
            "goat {} vs phase-only {phase_only}",
            result.fidelity
        );
    }

    #[test]
    fn goat_rejects_empty_parameter_list() {
        let system = reference_system(5);
        let envelope = PulseEnvelope::new(30.0);
        let drive = calibrated_drive(&system, 3, FRAC_PI_2, &envelope).unwrap();
        assert!(goat_optimize(
            &system,
            &drive,
            &envelope,
            FRAC_PI_2,
            FreeParams {
                detunings: false,
                drag_weights: false
            },
            &GoatOptions::default(),
        )
        .is_err());
    }

    #[test]
    fn integration_tolerance_convergence() {
        // Halving the tolerance changes the final fidelity below 1e-9.
        let system = reference_system(6);
        let envelope = PulseEnvelope::new(48.0);
        let drive = calibrated_drive(&system, 3, FRAC_PI_2, &envelope).unwrap();
        let fidelity_at = |tol: f64| {
            let u = propagate(&system, &drive, &envelope, tol).unwrap();
            let framed = frame_transform(&u, &system, envelope.duration);
            displacement_fidelity(&computational_block(&framed, 3), FRAC_PI_2)
        };
        let f1 = fidelity_at(1e-10);
        let f2 = fidelity_at(5e-11);
        assert!((f1 - f2).abs() < 1e-9, "{f1} vs {f2}");
    }

    #[test]
    fn drive_requires_guard_levels() {
        let system = reference_system(5);
        let envelope = PulseEnvelope::new(48.0);
        assert!(calibrated_drive(&system, 3, FRAC_PI_2, &envelope).is_ok());
        // d = 4 needs at least d + 2 = 6 levels.
        assert!(calibrated_drive(&system, 4, FRAC_PI_2, &envelope).is_err());
    }
}
