//! Polynomial Hamiltonians on weighted Fourier coordinates.
//!
//! Every Hamiltonian here is a symmetric form
//! `Σ_{n₁+…+n_d=0} c(n₁,…,n_d) q(n₁)…q(n_d)` over active modes, with
//! gradient `∂F/∂q(-n)` and the bracket
//! `{A,B} = Σ_n σ(n) ∂A/∂q(n) ∂B/∂q(-n)`.
//!
//! The generators F₁ and F₂ solve the homological equations under that
//! bracket:
//!
//! ```text
//! {Λ₂, F₁} + H₃ = 0
//! {Λ₂, F₂} + ½{H₃, F₁} = ½{H₃, F₁}^res = -(3/2) i Σ_n |q(n)|⁴
//! ```
//!
//! Since `{Λ₂, M} = -i (n₁³+…+n_d³) M` for a monomial `M`, this gives
//! `𝓕₁ = σ(n₁n₂n₃) / (3 sqrt|n₁n₂n₃|)` and
//! `𝓕₂ = -(3/2) sqrt|n₁n₂/(n₃n₄)| σ(n₃n₄) / (n₁³+n₂³+n₃³+n₄³)` off the
//! resonant set. [`f1_apply`] and [`f2_apply`] keep the literal multilinear
//! maps with the opposite overall sign and the reflected index; the relation
//! `∂F/∂q(-n) = -f(q,…)(-n)` is pinned in the tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::spectral::SpectralSequence;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
pub fn sigma(n: i64) -> f64 {
    match n.signum() {
        1 => 1.0,
        -1 => -1.0,
        _ => 0.0,
    }
}

#[inline]
fn sqrt_abs(x: f64) -> f64 {
    x.abs().sqrt()
}

fn check_tuple(t: &[i64]) -> Result<()> {
    if t.contains(&0) {
        return invalid_input(format!("zero index in {t:?}"));
    }
    if t.iter().sum::<i64>() != 0 {
        return invalid_input(format!("indices {t:?} do not sum to zero"));
    }
    Ok(())
}

#[inline]
fn cube_sum(t: &[i64]) -> i64 {
    t.iter().map(|&n| n * n * n).sum()
}

#[inline]
fn f1_kernel(a: i64, b: i64, c: i64) -> f64 {
    let p = (a * b * c) as f64;
    sigma(a * b * c) / (3.0 * sqrt_abs(p))
}

/// F₁ coefficient on a zero-sum triple of nonzero modes.
pub fn f1_coeff(n1: i64, n2: i64, n3: i64) -> Result<f64> {
    check_tuple(&[n1, n2, n3])?;
    Ok(f1_kernel(n1, n2, n3))
}

/// One ordered pairing `(a,b | c,d)` of the F₂ numerator.
#[inline]
fn pairing(a: i64, b: i64, c: i64, d: i64) -> f64 {
    sqrt_abs((a * b) as f64 / (c * d) as f64) * sigma(c * d)
}

/// F₂ coefficient in the unsymmetrized form (pairing `(n₁,n₂ | n₃,n₄)`);
/// exactly zero on resonant quadruples.
pub fn f2_coeff(n1: i64, n2: i64, n3: i64, n4: i64) -> Result<f64> {
    check_tuple(&[n1, n2, n3, n4])?;
    let cs = cube_sum(&[n1, n2, n3, n4]);
    if cs == 0 {
        return Ok(0.0);
    }
    Ok(-1.5 * pairing(n1, n2, n3, n4) / cs as f64)
}

/// Average of [`f2_coeff`] over all orderings; the coefficient of the
/// symmetric quartic form.
#[inline]
fn f2_symmetric(a: i64, b: i64, c: i64, d: i64) -> f64 {
    let cs = a * a * a + b * b * b + c * c * c + d * d * d;
    if cs == 0 {
        return 0.0;
    }
    let numer = pairing(a, b, c, d)
        + pairing(c, d, a, b)
        + pairing(a, c, b, d)
        + pairing(b, d, a, c)
        + pairing(a, d, b, c)
        + pairing(b, c, a, d);
    -0.25 * numer / cs as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonanceWitness {
    pub tuple: Vec<i64>,
    pub cube_sum: i64,
    /// `3n₁n₂n₃` for triples, `3(n₁+n₂)(n₁+n₃)(n₁+n₄)` for quadruples; equal to
    /// `cube_sum` in both cases.
    pub factored: i64,
    /// Quadruples only: `3(n₁+n₂)(n₁+n₃)(n₂+n₃)`, which matches `cube_sum` in
    /// absolute value but not always in sign.
    pub symmetric_factored: Option<i64>,
    pub resonant: bool,
}

pub fn resonance_witness(tuple: &[i64]) -> Result<ResonanceWitness> {
    if tuple.len() != 3 && tuple.len() != 4 {
        return invalid_input(format!("tuple length {} not in {{3, 4}}", tuple.len()));
    }
    check_tuple(tuple)?;
    let cs = cube_sum(tuple);
    let (factored, symmetric_factored) = match *tuple {
        [a, b, c] => (3 * a * b * c, None),
        [a, b, c, d] => (3 * (a + b) * (a + c) * (a + d), Some(3 * (a + b) * (a + c) * (b + c))),
        _ => unreachable!(),
    };
    Ok(ResonanceWitness {
        tuple: tuple.to_vec(),
        cube_sum: cs,
        factored,
        symmetric_factored,
        resonant: cs == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HamiltonianKind {
    Lambda2,
    H3,
    F1,
    F2,
    QuarticResonant,
}

impl HamiltonianKind {
    pub const ALL: [HamiltonianKind; 5] = [
        HamiltonianKind::Lambda2,
        HamiltonianKind::H3,
        HamiltonianKind::F1,
        HamiltonianKind::F2,
        HamiltonianKind::QuarticResonant,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
}

impl HamiltonianSpec {
    pub const LAMBDA2: Self = Self::new(HamiltonianKind::Lambda2);
    pub const H3: Self = Self::new(HamiltonianKind::H3);
    pub const F1: Self = Self::new(HamiltonianKind::F1);
    pub const F2: Self = Self::new(HamiltonianKind::F2);
    pub const QUARTIC_RESONANT: Self = Self::new(HamiltonianKind::QuarticResonant);

    pub const fn new(kind: HamiltonianKind) -> Self {
        Self { kind }
    }

    pub fn degree(&self) -> usize {
        match self.kind {
            HamiltonianKind::Lambda2 => 2,
            HamiltonianKind::H3 | HamiltonianKind::F1 => 3,
            HamiltonianKind::F2 | HamiltonianKind::QuarticResonant => 4,
        }
    }

    /// Symmetric coefficient `c(n₁,…,n_d)`. Zero for tuples of the wrong
    /// length, with a zero index, or with nonzero sum.
    pub fn coefficient(&self, t: &[i64]) -> Complex64 {
        if t.len() != self.degree() || check_tuple(t).is_err() {
            return ZERO;
        }
        match (self.kind, t) {
            (HamiltonianKind::Lambda2, &[a, _]) => I * 0.5 * (a.unsigned_abs() as f64).powi(3),
            (HamiltonianKind::H3, &[a, b, c]) => I * sqrt_abs((a * b * c) as f64),
            (HamiltonianKind::F1, &[a, b, c]) => Complex64::new(f1_kernel(a, b, c), 0.0),
            (HamiltonianKind::F2, &[a, b, c, d]) => Complex64::new(f2_symmetric(a, b, c, d), 0.0),
            (HamiltonianKind::QuarticResonant, &[a, b, c, d]) => {
                // Σ_n q(n)²q(-n)² spread evenly over the 6 orderings of (n,n,-n,-n).
                let mut s = [a, b, c, d];
                s.sort_unstable();
                if s[0] == s[1] && s[2] == s[3] && s[0] == -s[2] {
                    I * 0.25
                } else {
                    ZERO
                }
            }
            _ => unreachable!(),
        }
    }
}

/// A scalar function of `q` with a gradient `n ↦ ∂F/∂q(-n)`.
pub trait Functional: Sync {
    fn value(&self, q: &SpectralSequence) -> Complex64;

    fn gradient(&self, q: &SpectralSequence) -> SpectralSequence {
        fd_gradient(self, q)
    }
}

impl Functional for HamiltonianSpec {
    fn value(&self, q: &SpectralSequence) -> Complex64 {
        eval_hamiltonian(self, q)
    }

    fn gradient(&self, q: &SpectralSequence) -> SpectralSequence {
        gradient(self, q)
    }
}

/// Relative step for central differences.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference gradient `(F(q + h e_{-n}) - F(q - h e_{-n})) / 2h`
/// with `h = FD_STEP · max|q|`.
pub fn fd_gradient<F: Functional + ?Sized>(f: &F, q: &SpectralSequence) -> SpectralSequence {
    let scale = q.max_abs();
    let h = FD_STEP * if scale > 0.0 { scale } else { 1.0 };
    let lattice = q.lattice();
    let mut base = q.clone();
    // Clears the real-type flag once; perturbations break the symmetry.
    let first = lattice.mode(0);
    base.set(first, q.get(first)).expect("mode on lattice");
    SpectralSequence::from_fn(lattice, |n| {
        let m = -n;
        let orig = base.get(m);
        let mut plus = base.clone();
        plus.set(m, orig + h).expect("mode on lattice");
        let mut minus = base.clone();
        minus.set(m, orig - h).expect("mode on lattice");
        (f.value(&plus) - f.value(&minus)) / (2.0 * h)
    })
}

fn cubic_sum(q: &SpectralSequence, kernel: impl Fn(i64, i64, i64) -> f64) -> Complex64 {
    let support = q.support();
    let lattice = q.lattice();
    let mut acc = ZERO;
    for &(a, qa) in &support {
        for &(b, qb) in &support {
            let c = -(a + b);
            if !lattice.contains(c) {
                continue;
            }
            let qc = q.get(c);
            if qc != ZERO {
                acc += qa * qb * qc * kernel(a, b, c);
            }
        }
    }
    acc
}

fn cubic_gradient(q: &SpectralSequence, kernel: impl Fn(i64, i64, i64) -> f64) -> SpectralSequence {
    let support = q.support();
    let lattice = q.lattice();
    let mut out = vec![ZERO; lattice.len()];
    for &(a, qa) in &support {
        for &(b, qb) in &support {
            let n = a + b;
            if let Some(i) = lattice.slot(n) {
                out[i] += qa * qb * (3.0 * kernel(a, b, -n));
            }
        }
    }
    SpectralSequence::from_values(lattice, out, false).expect("finite gradient")
}

fn quartic_sum(q: &SpectralSequence, kernel: impl Fn(i64, i64, i64, i64) -> f64) -> Complex64 {
    let support = q.support();
    let lattice = q.lattice();
    let mut acc = ZERO;
    for &(a, qa) in &support {
        for &(b, qb) in &support {
            let qab = qa * qb;
            for &(c, qc) in &support {
                let d = -(a + b + c);
                if !lattice.contains(d) {
                    continue;
                }
                let qd = q.get(d);
                if qd != ZERO {
                    let k = kernel(a, b, c, d);
                    if k != 0.0 {
                        acc += qab * qc * qd * k;
                    }
                }
            }
        }
    }
    acc
}

fn quartic_gradient(q: &SpectralSequence, kernel: impl Fn(i64, i64, i64, i64) -> f64) -> SpectralSequence {
    let support = q.support();
    let lattice = q.lattice();
    let mut out = vec![ZERO; lattice.len()];
    for &(a, qa) in &support {
        for &(b, qb) in &support {
            let qab = qa * qb;
            for &(c, qc) in &support {
                let n = a + b + c;
                if let Some(i) = lattice.slot(n) {
                    let k = kernel(a, b, c, -n);
                    if k != 0.0 {
                        out[i] += qab * qc * (4.0 * k);
                    }
                }
            }
        }
    }
    SpectralSequence::from_values(lattice, out, false).expect("finite gradient")
}

fn h3_kernel(a: i64, b: i64, c: i64) -> f64 {
    sqrt_abs((a * b * c) as f64)
}

/// Value of the Hamiltonian at `q`; purely imaginary for real-type `q`.
///
/// Sums run over zero-sum tuples of active modes. F₂ skips resonant tuples
/// by the exact integer test on the cube sum.
pub fn eval_hamiltonian(spec: &HamiltonianSpec, q: &SpectralSequence) -> Complex64 {
    match spec.kind {
        HamiltonianKind::Lambda2 => {
            let s: Complex64 = q
                .modes()
                .map(|(n, v)| v * q.get(-n) * (n.unsigned_abs() as f64).powi(3))
                .sum();
            I * 0.5 * s
        }
        HamiltonianKind::H3 => I * cubic_sum(q, h3_kernel),
        HamiltonianKind::F1 => cubic_sum(q, f1_kernel),
        HamiltonianKind::F2 => quartic_sum(q, f2_symmetric),
        HamiltonianKind::QuarticResonant => {
            let s: Complex64 = q.modes().map(|(n, v)| (v * q.get(-n)).powi(2)).sum();
            I * 1.5 * s
        }
    }
}

/// `n ↦ ∂F/∂q(-n)`, i.e. `d · Σ_{n₁+…+n_{d-1}=n} c(n₁,…,n_{d-1},-n) q(n₁)…q(n_{d-1})`.
pub fn gradient(spec: &HamiltonianSpec, q: &SpectralSequence) -> SpectralSequence {
    match spec.kind {
        HamiltonianKind::Lambda2 => q.map(|n, v| I * (n.unsigned_abs() as f64).powi(3) * v),
        HamiltonianKind::H3 => {
            let g = cubic_gradient(q, h3_kernel);
            g.map(|_, v| I * v)
        }
        HamiltonianKind::F1 => cubic_gradient(q, f1_kernel),
        HamiltonianKind::F2 => quartic_gradient(q, f2_symmetric),
        HamiltonianKind::QuarticResonant => q.map(|n, v| I * 6.0 * v * v * q.get(-n)),
    }
}

/// `{A,B}(q) = Σ_n σ(n) ∂A/∂q(n) ∂B/∂q(-n)`.
pub fn poisson_bracket(a: &dyn Functional, b: &dyn Functional, q: &SpectralSequence) -> Complex64 {
    let ga = a.gradient(q);
    let gb = b.gradient(q);
    gb.modes().map(|(n, gbn)| sigma(n) * ga.get(-n) * gbn).sum()
}

/// The functional `q ↦ {A,B}(q)`; its gradient is taken by central differences.
pub struct Bracket<'a> {
    pub left: &'a dyn Functional,
    pub right: &'a dyn Functional,
}

impl<'a> Bracket<'a> {
    pub fn new(left: &'a dyn Functional, right: &'a dyn Functional) -> Self {
        Self { left, right }
    }
}

impl Functional for Bracket<'_> {
    fn value(&self, q: &SpectralSequence) -> Complex64 {
        poisson_bracket(self.left, self.right, q)
    }
}

/// `f₁(q₁,q₂)(n) = -Σ_{n₁+n₂+n=0} σ(n₁n₂n)/sqrt|n₁n₂n| q₁(n₁)q₂(n₂)`.
pub fn f1_apply(q1: &SpectralSequence, q2: &SpectralSequence) -> SpectralSequence {
    let lattice = q1.lattice();
    assert_eq!(lattice, q2.lattice(), "lattice mismatch");
    let s2 = q2.support();
    let mut out = vec![ZERO; lattice.len()];
    for (a, qa) in q1.support() {
        for &(b, qb) in &s2 {
            let n = -(a + b);
            if let Some(i) = lattice.slot(n) {
                out[i] -= qa * qb * (3.0 * f1_kernel(a, b, n));
            }
        }
    }
    SpectralSequence::from_values(lattice, out, false).expect("finite")
}

/// `f₂(q₁,q₂,q₃)(n) = 3 Σ_{n+n₁+n₂+n₃=0} K(n;n₁,n₂,n₃) q₁(n₁)q₂(n₂)q₃(n₃)`
/// with `K = [sqrt|nn₁/(n₂n₃)| σ(n₂n₃) + sqrt|n₁n₂/(n₃n)| σ(n₃n)] / (n³+n₁³+n₂³+n₃³)`,
/// resonant tuples skipped.
pub fn f2_apply(q1: &SpectralSequence, q2: &SpectralSequence, q3: &SpectralSequence) -> SpectralSequence {
    let lattice = q1.lattice();
    assert!(lattice == q2.lattice() && lattice == q3.lattice(), "lattice mismatch");
    let (s2, s3) = (q2.support(), q3.support());
    let mut out = vec![ZERO; lattice.len()];
    for (a, qa) in q1.support() {
        for &(b, qb) in &s2 {
            for &(c, qc) in &s3 {
                let n = -(a + b + c);
                let Some(i) = lattice.slot(n) else { continue };
                let cs = cube_sum(&[n, a, b, c]);
                if cs == 0 {
                    continue;
                }
                let k = pairing(n, a, b, c) + pairing(a, b, c, n);
                out[i] += qa * qb * qc * (3.0 * k / cs as f64);
            }
        }
    }
    SpectralSequence::from_values(lattice, out, false).expect("finite")
}
