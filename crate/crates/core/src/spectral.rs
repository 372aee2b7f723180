//! Mode lattice, weighted Fourier coordinates and the free Airy flow.
//!
//! A real function `v` on the 2π-periodic circle with zero mean is stored
//! through the weighted coefficients
//!
//! ```text
//! u(n) = v̂(n) / sqrt(|n|),   v̂(n) = (1/2π) ∫ v(x) e^{-inx} dx,
//! ```
//!
//! on the truncated lattice `n ∈ [-N, N] \ {0}`. Real functions give
//! sequences with `u(-n) = conj(u(n))`; those carry `real_type = true`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};

/// Relative tolerance for the reality symmetry `u(-n) = conj(u(n))`.
pub const REALITY_TOL: f64 = 1e-13;

/// Relative tolerance for the zero-mean invariant of grid samples.
pub const MEAN_TOL: f64 = 1e-12;

/// Truncation radius `n` (active modes `[-n, n] \ {0}`) and grid size `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LatticeFields")]
pub struct ModeLattice {
    n: usize,
    m: usize,
}

#[derive(Deserialize)]
struct LatticeFields {
    n: usize,
    #[serde(default)]
    m: Option<usize>,
}

impl TryFrom<LatticeFields> for ModeLattice {
    type Error = Error;

    fn try_from(f: LatticeFields) -> Result<Self> {
        match f.m {
            Some(m) => ModeLattice::new(f.n, m),
            None => ModeLattice::with_radius(f.n),
        }
    }
}

impl ModeLattice {
    /// Requires `n >= 1` and `m >= 3n + 1` so that quadratic products are
    /// alias-free after truncation back to the lattice.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return invalid_input("lattice radius must be at least 1");
        }
        if m < 3 * n + 1 {
            return invalid_input(format!("grid size {m} below 3N+1 = {}", 3 * n + 1));
        }
        Ok(Self { n, m })
    }

    /// Smallest alias-free grid, `m = 3n + 1`.
    pub fn with_radius(n: usize) -> Result<Self> {
        Self::new(n, 3 * n + 1)
    }

    pub fn radius(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    /// Number of stored modes, `2n`.
    pub fn len(&self) -> usize {
        2 * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: i64) -> bool {
        k != 0 && k.unsigned_abs() as usize <= self.n
    }

    /// Storage slot of mode `k`; `None` for `k = 0` or `|k| > n`.
    #[inline]
    pub fn slot(&self, k: i64) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let n = self.n as i64;
        Some(if k < 0 { (k + n) as usize } else { (k + n - 1) as usize })
    }

    /// Mode stored at slot `i`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n {
            i - n
        } else {
            i - n + 1
        }
    }

    /// All active modes in storage order (`-n, …, -1, 1, …, n`).
    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len()).map(|i| self.mode(i))
    }

    /// Grid points `x_j = -π + 2πj/m`.
    pub fn grid_points(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| -PI + 2.0 * PI * j as f64 / self.m as f64)
            .collect()
    }
}

/// Complex sequence on the active modes of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSequence {
    lattice: ModeLattice,
    values: Vec<Complex64>,
    real_type: bool,
}

impl SpectralSequence {
    pub fn zeros(lattice: ModeLattice) -> Self {
        Self {
            lattice,
            values: vec![Complex64::new(0.0, 0.0); lattice.len()],
            real_type: true,
        }
    }

    /// General (not necessarily real-type) sequence from a mode function.
    pub fn from_fn(lattice: ModeLattice, f: impl FnMut(i64) -> Complex64) -> Self {
        let values = lattice.modes().map(f).collect();
        Self {
            lattice,
            values,
            real_type: false,
        }
    }

    /// Real-type sequence from its positive modes; negative modes are
    /// filled with conjugates.
    pub fn real_from_positive(lattice: ModeLattice, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let mut out = Self::zeros(lattice);
        for k in 1..=lattice.radius() as i64 {
            out.set_pair(k, f(k));
        }
        out
    }

    /// Builds from values in storage order. With `real_type`, the reality
    /// symmetry is checked to [`REALITY_TOL`] relative and then enforced.
    pub fn from_values(lattice: ModeLattice, values: Vec<Complex64>, real_type: bool) -> Result<Self> {
        if values.len() != lattice.len() {
            return invalid_input(format!(
                "expected {} values for lattice radius {}, got {}",
                lattice.len(),
                lattice.radius(),
                values.len()
            ));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return invalid_input("non-finite coefficient");
        }
        let mut out = Self {
            lattice,
            values,
            real_type: false,
        };
        if real_type {
            if !out.is_reality_symmetric(REALITY_TOL) {
                return invalid_input("values violate u(-n) = conj(u(n))");
            }
            out.symmetrize();
        }
        Ok(out)
    }

    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn real_type(&self) -> bool {
        self.real_type
    }

    /// Coefficient at mode `k`; zero off the lattice and at `k = 0`.
    #[inline]
    pub fn get(&self, k: i64) -> Complex64 {
        match self.lattice.slot(k) {
            Some(i) => self.values[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Sets a single coefficient. Clears the real-type flag.
    pub fn set(&mut self, k: i64, v: Complex64) -> Result<()> {
        let Some(i) = self.lattice.slot(k) else {
            return invalid_input(format!("mode {k} not on lattice"));
        };
        self.values[i] = v;
        self.real_type = false;
        Ok(())
    }

    /// Sets `u(k) = v` and `u(-k) = conj(v)`, keeping the real-type flag.
    pub fn set_pair(&mut self, k: i64, v: Complex64) {
        if let (Some(i), Some(j)) = (self.lattice.slot(k), self.lattice.slot(-k)) {
            self.values[i] = v;
            self.values[j] = v.conj();
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.lattice.mode(i), *v))
    }

    /// Nonzero entries, in storage order.
    pub fn support(&self) -> Vec<(i64, Complex64)> {
        self.modes().filter(|(_, v)| *v != Complex64::new(0.0, 0.0)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_reality_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs();
        let n = self.lattice.radius() as i64;
        (1..=n).all(|k| (self.get(-k) - self.get(k).conj()).norm() <= rel_tol * scale)
    }

    /// Replaces `u(-n)` by `conj(u(n))` and marks the sequence real-type.
    pub fn symmetrize(&mut self) {
        let n = self.lattice.radius() as i64;
        for k in 1..=n {
            let v = self.get(k);
            self.set_pair(k, v);
        }
        self.real_type = true;
    }

    /// Marks the sequence real-type if it satisfies the symmetry to `rel_tol`,
    /// enforcing it exactly.
    pub fn promote_real(mut self, rel_tol: f64) -> Result<Self> {
        if !self.is_reality_symmetric(rel_tol) {
            return invalid_input("sequence is not real-type");
        }
        self.symmetrize();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Self {
        Self {
            lattice: self.lattice,
            values: self.modes().map(|(k, v)| f(k, v)).collect(),
            real_type: false,
        }
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(self.lattice, other.lattice, "lattice mismatch");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same(other);
        Self {
            lattice: self.lattice,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            real_type: self.real_type && other.real_type,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_same(other);
        Self {
            lattice: self.lattice,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            real_type: self.real_type && other.real_type,
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.check_same(other);
        Self {
            lattice: self.lattice,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + y * a)
                .collect(),
            real_type: self.real_type && other.real_type,
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            lattice: self.lattice,
            values: self.values.iter().map(|v| v * a).collect(),
            real_type: self.real_type,
        }
    }

    pub fn norm(&self, spec: NormSpec) -> f64 {
        norm(self, spec)
    }

    /// Same coefficients on a larger (or equal) lattice.
    pub fn embed(&self, lattice: ModeLattice) -> Result<Self> {
        if lattice.radius() < self.lattice.radius() {
            return invalid_input("target lattice is smaller");
        }
        let mut out = Self::zeros(lattice);
        for (k, v) in self.modes() {
            let i = lattice.slot(k).expect("mode fits");
            out.values[i] = v;
        }
        out.real_type = self.real_type;
        Ok(out)
    }
}

/// Real samples of `v` at `x_j = -π + 2πj/M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    lattice: ModeLattice,
    samples: Vec<f64>,
}

impl GridFunction {
    /// Rejects a wrong sample count, non-finite samples, or a mean beyond
    /// [`MEAN_TOL`] relative to `max |v|`.
    pub fn new(lattice: ModeLattice, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != lattice.grid_size() {
            return invalid_input(format!(
                "expected {} samples, got {}",
                lattice.grid_size(),
                samples.len()
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return invalid_input("non-finite sample");
        }
        let mean = mean(&samples);
        let scale = samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if mean.abs() > MEAN_TOL * scale {
            return invalid_input(format!("nonzero mean {mean:e} (zero momentum required)"));
        }
        Ok(Self { lattice, samples })
    }

    /// Samples `f` on the grid and removes the mean.
    pub fn from_fn_zero_mean(lattice: ModeLattice, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut samples: Vec<f64> = lattice.grid_points().into_iter().map(f).collect();
        let m = mean(&samples);
        samples.iter_mut().for_each(|v| *v -= m);
        Self::new(lattice, samples)
    }

    pub fn lattice(&self) -> ModeLattice {
        self.lattice
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Trapezoid `L²` norm over one period (exact for band-limited data).
    pub fn l2_norm(&self) -> f64 {
        let h = 2.0 * PI / self.samples.len() as f64;
        (h * self.samples.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Trapezoid integral of `f(v)` over one period.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = 2.0 * PI / self.samples.len() as f64;
        h * self.samples.iter().map(|&v| f(v)).sum::<f64>()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    One,
    Two,
    Infinity,
}

/// Weighted `ℓ^p_s` norm: `(Σ |k|^{ps} |u(k)|^p)^{1/p}`, or `max |k|^s |u(k)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub p: Exponent,
    pub s: f64,
}

impl NormSpec {
    pub fn l1(s: f64) -> Self {
        Self { p: Exponent::One, s }
    }

    pub fn l2(s: f64) -> Self {
        Self { p: Exponent::Two, s }
    }

    pub fn linf(s: f64) -> Self {
        Self {
            p: Exponent::Infinity,
            s,
        }
    }
}

pub fn norm(u: &SpectralSequence, spec: NormSpec) -> f64 {
    let weighted = u.modes().map(|(k, v)| (k.unsigned_abs() as f64).powf(spec.s) * v.norm());
    match spec.p {
        Exponent::One => weighted.sum(),
        Exponent::Two => weighted.map(|w| w * w).sum::<f64>().sqrt(),
        Exponent::Infinity => weighted.fold(0.0, f64::max),
    }
}

/// `e^{-2πi k/m}` for `k = 0..m`.
fn twiddles(m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / m as f64))
        .collect()
}

/// Plain Fourier coefficients `v̂(k)`, `k = 1..=N`, by direct summation.
pub(crate) fn fourier_positive(lattice: ModeLattice, samples: &[f64]) -> Vec<Complex64> {
    let m = lattice.grid_size();
    let w = twiddles(m);
    (1..=lattice.radius())
        .map(|k| {
            // x_j = -π + 2πj/m contributes e^{ikπ} = (-1)^k.
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &v) in samples.iter().enumerate() {
                acc += w[(k * j) % m] * v;
            }
            acc * (sign / m as f64)
        })
        .collect()
}

/// Real synthesis `Σ_{k≠0} c(k) e^{ikx_j}` from positive coefficients
/// `c(1..=N)` of a conjugate-symmetric spectrum.
pub(crate) fn synthesize_real(lattice: ModeLattice, positive: &[Complex64]) -> Vec<f64> {
    let m = lattice.grid_size();
    let w = twiddles(m);
    (0..m)
        .map(|j| {
            let mut acc = 0.0;
            for (idx, c) in positive.iter().enumerate() {
                let k = idx + 1;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                // e^{+2πikj/m} = conj of the forward twiddle.
                acc += 2.0 * sign * (c * w[(k * j) % m].conj()).re;
            }
            acc
        })
        .collect()
}

/// `u(n) = v̂(n)/sqrt(|n|)`.
pub fn weighted_from_physical(v: &GridFunction) -> SpectralSequence {
    let lattice = v.lattice();
    let vhat = fourier_positive(lattice, v.samples());
    SpectralSequence::real_from_positive(lattice, |k| vhat[(k - 1) as usize] / (k as f64).sqrt())
}

/// `v(x) = Σ sqrt(|n|) e^{inx} u(n)`; requires a real-type sequence.
pub fn physical_from_weighted(u: &SpectralSequence) -> Result<GridFunction> {
    if !u.real_type() {
        return invalid_input("physical synthesis needs a real-type sequence");
    }
    let lattice = u.lattice();
    let positive: Vec<Complex64> = (1..=lattice.radius() as i64)
        .map(|k| u.get(k) * (k as f64).sqrt())
        .collect();
    let samples = synthesize_real(lattice, &positive);
    GridFunction::new(lattice, samples)
}

/// Free Airy flow: multiplies mode `n` by `e^{in³t}`.
pub fn linear_phase(u: &SpectralSequence, t: f64) -> SpectralSequence {
    let mut out = u.map(|k, v| v * Complex64::from_polar(1.0, (k as f64).powi(3) * t));
    out.real_type = u.real_type;
    if out.real_type {
        out.symmetrize();
    }
    out
}
