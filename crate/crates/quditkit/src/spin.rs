//! Exact spin-j operators, basis index maps, and Clebsch-Gordan coefficients.
//!
//! The qudit basis is fixed in transmon ordering: basis index `n` runs from 0
//! (ground state) to d-1, and maps onto the spin state |j, m⟩ with m = j - n.
//! Every other module inherits this ordering.
//!
//! Half-integer angular-momentum labels are carried as exact doubled integers
//! (2j, 2m) so that parity and range checks never touch floating point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{re, CMat, IM, ZERO};
use crate::{Error, Result};

/// A half-integer stored as its exact doubled value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt(i64);

impl HalfInt {
    /// From a doubled value: `from_doubled(3)` is 3/2.
    pub const fn from_doubled(twice: i64) -> Self {
        HalfInt(twice)
    }

    /// From an integer value.
    pub const fn from_int(n: i64) -> Self {
        HalfInt(2 * n)
    }

    /// The doubled value `2x`.
    pub const fn doubled(self) -> i64 {
        self.0
    }

    /// Value as a float.
    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// True when this is an integer (not an odd half-integer).
    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Qudit dimension d = 2j + 1 together with the half-integer spin j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinDimension {
    d: usize,
}

impl SpinDimension {
    /// New spin space of dimension `d` (d ≥ 2).
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        Ok(SpinDimension { d })
    }

    /// Dimension d.
    pub const fn d(&self) -> usize {
        self.d
    }

    /// Spin j with d = 2j + 1.
    pub const fn j(&self) -> HalfInt {
        HalfInt::from_doubled(self.d as i64 - 1)
    }

    /// j as a float.
    pub fn j_value(&self) -> f64 {
        (self.d as f64 - 1.0) / 2.0
    }
}

/// The spin-j generators in the transmon-ordered basis.
///
/// `jz` is diagonal with eigenvalues j, j-1, ..., -j so that transmon state
/// |n⟩ corresponds to spin state |j, j-n⟩.
#[derive(Debug, Clone)]
pub struct AngularMomentumSet {
    pub dim: SpinDimension,
    pub jx: CMat,
    pub jy: CMat,
    pub jz: CMat,
    pub jplus: CMat,
    pub jminus: CMat,
}

/// Ladder matrix element ⟨n-1|J₊|n⟩ = √(n(d-n)).
#[inline]
pub fn ladder_element(d: usize, n: usize) -> f64 {
    ((n as f64) * ((d - n) as f64)).sqrt()
}

/// Builds the spin-j generators for dimension `dim`.
///
/// Matrix elements are ⟨n-1|J₊|n⟩ = √(n(d-n)) and
/// ⟨n+1|J₋|n⟩ = √((n+1)(d-n-1)); all other entries vanish.
pub fn build_angular_momentum(dim: SpinDimension) -> AngularMomentumSet {
    let d = dim.d();
    let j = dim.j_value();
    let mut jplus = CMat::zeros(d, d);
    let mut jminus = CMat::zeros(d, d);
    for n in 1..d {
        jplus[(n - 1, n)] = re(ladder_element(d, n));
    }
    for n in 0..d - 1 {
        jminus[(n + 1, n)] = re(ladder_element(d, n + 1));
    }
    let jx = (&jplus + &jminus).scale(0.5);
    let jy = (&jplus - &jminus).map(|z| z * Complex64::new(0.0, -0.5));
    let mut jz = CMat::zeros(d, d);
    for n in 0..d {
        jz[(n, n)] = re(j - n as f64);
    }
    AngularMomentumSet {
        dim,
        jx,
        jy,
        jz,
        jplus,
        jminus,
    }
}

/// Maps a spin state |j, m⟩ to its transmon index n = j - m.
pub fn spin_to_transmon_index(j: HalfInt, m: HalfInt) -> Result<usize> {
    if j.doubled() < 0 {
        return Err(Error::InvalidHalfInteger(format!("negative spin j = {j}")));
    }
    if (j.doubled() - m.doubled()) % 2 != 0 {
        return Err(Error::InvalidHalfInteger(format!(
            "m = {m} does not match the parity of j = {j}"
        )));
    }
    if m.doubled().abs() > j.doubled() {
        return Err(Error::IndexOutOfRange(format!("|m| = |{m}| exceeds j = {j}")));
    }
    Ok(((j.doubled() - m.doubled()) / 2) as usize)
}

/// Maps a transmon index n (0 ≤ n ≤ d-1) to the spin labels (j, m = j - n).
pub fn transmon_to_spin_index(d: usize, n: usize) -> Result<(HalfInt, HalfInt)> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n >= d {
        return Err(Error::IndexOutOfRange(format!(
            "transmon index {n} outside 0..{}",
            d - 1
        )));
    }
    let j = HalfInt::from_doubled(d as i64 - 1);
    let m = HalfInt::from_doubled(j.doubled() - 2 * n as i64);
    Ok((j, m))
}

// Natural logs of factorials 0!..n!, built once per call chain; exact enough
// for the j ≲ 20 guarded below.
fn ln_factorials(max: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(max + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

const MAX_DOUBLED_J: i64 = 80; // j ≤ 20 per the overflow guard

fn check_jm(label: &str, j: HalfInt, m: HalfInt) -> Result<()> {
    if j.doubled() < 0 {
        return Err(Error::InvalidHalfInteger(format!(
            "{label}: negative spin j = {j}"
        )));
    }
    if j.doubled() > MAX_DOUBLED_J {
        return Err(Error::InvalidHalfInteger(format!(
            "{label}: j = {j} exceeds the supported range (j ≤ 20)"
        )));
    }
    if (j.doubled() - m.doubled()) % 2 != 0 {
        return Err(Error::InvalidHalfInteger(format!(
            "{label}: m = {m} does not match the parity of j = {j}"
        )));
    }
    if m.doubled().abs() > j.doubled() {
        return Err(Error::InvalidHalfInteger(format!(
            "{label}: |m| = |{m}| exceeds j = {j}"
        )));
    }
    Ok(())
}

/// Clebsch-Gordan coefficient ⟨j₁ m₁; j₂ m₂ | J M⟩ in the Condon-Shortley
/// convention, evaluated by the Racah closed-form sum with log-factorial
/// accumulation.
///
/// Returns 0 when M ≠ m₁ + m₂ or when J violates the triangle rule; rejects
/// malformed half-integer pairs.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    jj: HalfInt,
    mm: HalfInt,
) -> Result<f64> {
    check_jm("j1/m1", j1, m1)?;
    check_jm("j2/m2", j2, m2)?;
    check_jm("J/M", jj, mm)?;

    if m1.doubled() + m2.doubled() != mm.doubled() {
        return Ok(0.0);
    }
    // Triangle rule and integer coupling: J in |j1-j2| ..= j1+j2 stepping 1.
    let dj1 = j1.doubled();
    let dj2 = j2.doubled();
    let dj = jj.doubled();
    if dj < (dj1 - dj2).abs() || dj > dj1 + dj2 || (dj1 + dj2 - dj) % 2 != 0 {
        return Ok(0.0);
    }

    // All of the following are exact non-negative integers.
    let dm1 = m1.doubled();
    let dm2 = m2.doubled();
    let dm = mm.doubled();
    // All doubled combinations below are even; t4/t5 may be negative.
    let half = |x: i64| -> i64 {
        debug_assert!(x % 2 == 0);
        x / 2
    };
    let a = half(dj1 + dj2 - dj); // j1 + j2 - J
    let b = half(dj1 - dj2 + dj); // j1 - j2 + J
    let c = half(-dj1 + dj2 + dj); // -j1 + j2 + J
    let j_sum_plus1 = half(dj1 + dj2 + dj) + 1;

    let lf = ln_factorials((j_sum_plus1 as usize).max(1) + 1);
    let lnf = |x: i64| -> f64 { lf[x as usize] };

    // Prefactor √((2J+1) Δ(j1 j2 J) ∏ (j±m)!)
    let ln_delta = lnf(a) + lnf(b) + lnf(c) - lnf(j_sum_plus1);
    let ln_norm = ((dj + 1) as f64).ln()
        + ln_delta
        + lnf(half(dj1 + dm1))
        + lnf(half(dj1 - dm1))
        + lnf(half(dj2 + dm2))
        + lnf(half(dj2 - dm2))
        + lnf(half(dj + dm))
        + lnf(half(dj - dm));

    // Racah sum over k with all factorial arguments non-negative.
    let t1 = half(dj1 + dj2 - dj); // j1 + j2 - J - k ≥ 0
    let t2 = half(dj1 - dm1); // j1 - m1 - k ≥ 0
    let t3 = half(dj2 + dm2); // j2 + m2 - k ≥ 0
    let t4 = half(dj - dj2 + dm1); // J - j2 + m1 + k ≥ 0
    let t5 = half(dj - dj1 - dm2); // J - j1 - m2 + k ≥ 0
    let k_min = 0.max(-t4).max(-t5);
    let k_max = t1.min(t2).min(t3);

    let mut sum = 0.0f64;
    for k in k_min..=k_max {
        let ln_term = lnf(k)
            + lnf(t1 - k)
            + lnf(t2 - k)
            + lnf(t3 - k)
            + lnf(t4 + k)
            + lnf(t5 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (0.5 * ln_norm - ln_term).exp();
    }
    Ok(sum)
}

/// State vector |n⟩ in dimension d.
pub fn basis_state(d: usize, n: usize) -> crate::linalg::CVec {
    let mut v = crate::linalg::CVec::zeros(d);
    v[n] = re(1.0);
    v
}

/// Commutator [a, b].
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

#[allow(dead_code)]
fn unused_marker() -> Complex64 {
    ZERO + IM * 0.0
}
