//! KdV `v_t = 6 v v_x - v_xxx` in weighted coordinates,
//! `u̇(n) = i n³ u(n) + N(u)(n)`, integrated with integrating-factor RK4.
//!
//! The state is carried on the smallest arithmetic progression `g, 2g, …`
//! of positive modes that contains the initial support, where `g` is the gcd
//! of that support. The nonlinearity never leaves `gℤ`, so this is exact, and
//! for single-carrier data it shrinks the work by a factor `g²`.

use std::f64::consts::PI;

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::spectral::{
    fourier_positive, physical_from_weighted, synthesize_real, GridFunction, ModeLattice, NormSpec, SpectralSequence,
};

/// Ceiling on `dt · 3√N · ‖u₀‖_{ℓ¹_{1/2}}`.
pub const STABILITY_BUDGET: f64 = 0.5;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(alias = "T")]
    pub t_final: f64,
    pub lattice: ModeLattice,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// When set, the step is further capped at `phase_step / Ω_max`, where
    /// `Ω_max` is the largest three-wave phase velocity on the active modes.
    #[serde(default)]
    pub phase_step: Option<f64>,
}

fn default_record_every() -> usize {
    1
}

impl SolverConfig {
    pub fn new(dt: f64, t_final: f64, lattice: ModeLattice) -> Self {
        Self {
            dt,
            t_final,
            lattice,
            record_every: 1,
            phase_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid_config(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return invalid_config(format!("t_final must be nonnegative, got {}", self.t_final));
        }
        if self.record_every == 0 {
            return invalid_config("record_every must be >= 1");
        }
        if let Some(p) = self.phase_step {
            if !(p > 0.0 && p.is_finite()) {
                return invalid_config(format!("phase_step must be positive, got {p}"));
            }
        }
        Ok(())
    }
}

/// `dt · 3√N · ‖u‖_{ℓ¹_{1/2}}`, the explicit-stage stability number.
pub fn stability_number(u: &SpectralSequence, dt: f64) -> f64 {
    dt * 3.0 * (u.lattice().radius() as f64).sqrt() * u.norm(NormSpec::l1(0.5))
}

/// `N(u)(n) = 3iσ(n)√|n| Σ_{n₁+n₂=n} √|n₁n₂| u(n₁)u(n₂)`, by direct
/// truncated convolution over the support of `u`.
pub fn nonlinear_term(u: &SpectralSequence) -> SpectralSequence {
    let lattice = u.lattice();
    let radius = lattice.radius() as i64;
    let support: Vec<(i64, Complex64)> = u
        .support()
        .into_iter()
        .map(|(k, v)| (k, v * (k.unsigned_abs() as f64).sqrt()))
        .collect();
    let mut acc = vec![ZERO; lattice.len()];
    for &(a, wa) in &support {
        for &(b, wb) in &support {
            let n = a + b;
            if n != 0 && n.abs() <= radius {
                acc[lattice.slot(n).unwrap()] += wa * wb;
            }
        }
    }
    let mut out = SpectralSequence::zeros(lattice);
    for (i, s) in acc.into_iter().enumerate() {
        let n = lattice.mode(i);
        let sign = if n > 0 { 1.0 } else { -1.0 };
        let v = Complex64::new(0.0, 3.0 * sign * (n.unsigned_abs() as f64).sqrt()) * s;
        out.set(n, v).expect("mode on lattice");
    }
    if u.real_type() {
        out.promote_real(1e-12).expect("convolution of a real-type sequence is real-type")
    } else {
        out
    }
}

/// The same term computed from `6 v v_x` on the physical grid. Exact when
/// `M ≥ 3N + 1`, which every lattice guarantees.
pub fn nonlinear_term_physical(u: &SpectralSequence) -> Result<SpectralSequence> {
    let lattice = u.lattice();
    let v = physical_from_weighted(u)?;
    let dv: Vec<Complex64> = (1..=lattice.radius() as i64)
        .map(|k| u.get(k) * Complex64::new(0.0, k as f64 * (k as f64).sqrt()))
        .collect();
    let vx = synthesize_real(lattice, &dv);
    let prod: Vec<f64> = v.samples().iter().zip(&vx).map(|(a, b)| 6.0 * a * b).collect();
    let hat = fourier_positive(lattice, &prod);
    Ok(SpectralSequence::real_from_positive(lattice, |k| {
        hat[(k - 1) as usize] / (k as f64).sqrt()
    }))
}

/// Momentum, kinetic energy and Hamiltonian of `v`:
/// `P = ∫v`, `K = ∫v²`, `H = ∫(½v_x² + v³)`, by exact mode-space quadrature.
pub fn diagnostics_of(u: &SpectralSequence) -> (f64, f64, f64) {
    let k = 2.0 * PI * u.norm(NormSpec::l2(0.5)).powi(2);
    let pos: Vec<(i64, Complex64)> = u.support().into_iter().filter(|(n, _)| *n > 0).collect();
    let quad: f64 = pos.iter().map(|(n, v)| (*n as f64).powi(3) * v.norm_sqr()).sum();
    // Zero-sum triples (a, b, -(a+b)) and their mirrors: 6 Re Σ √(abn) u(a)u(b)ū(n).
    let radius = u.lattice().radius() as i64;
    let mut cubic = 0.0;
    for &(a, ua) in &pos {
        for &(b, ub) in &pos {
            let n = a + b;
            if n <= radius {
                let un = u.get(n);
                if un != ZERO {
                    cubic += ((a * b * n) as f64).sqrt() * (ua * ub * un.conj()).re;
                }
            }
        }
    }
    let h = 2.0 * PI * (quad + 6.0 * cubic);
    (0.0, k, h)
}

/// `H = ∫(½v_x² + v³)` by trapezoid quadrature on the grid.
pub fn hamiltonian_quadrature(u: &SpectralSequence) -> Result<f64> {
    let lattice = u.lattice();
    let v = physical_from_weighted(u)?;
    let dv: Vec<Complex64> = (1..=lattice.radius() as i64)
        .map(|k| u.get(k) * Complex64::new(0.0, k as f64 * (k as f64).sqrt()))
        .collect();
    let vx = synthesize_real(lattice, &dv);
    let h = 2.0 * PI / lattice.grid_size() as f64;
    Ok(h * v.samples().iter().zip(&vx).map(|(a, b)| 0.5 * b * b + a * a * a).sum::<f64>())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub k: Vec<f64>,
    pub h: Vec<f64>,
    /// `‖u(t)‖_{ℓ²_{3/2}}`.
    pub h1_weighted: Vec<f64>,
}

impl Diagnostics {
    fn push(&mut self, t: f64, u: &SpectralSequence) {
        let (p, k, h) = diagnostics_of(u);
        self.times.push(t);
        self.p.push(p);
        self.k.push(k);
        self.h.push(h);
        self.h1_weighted.push(u.norm(NormSpec::l2(1.5)));
    }

    /// Largest `|X(t) - X(0)| / |X(0)|` over the record.
    pub fn relative_drift(series: &[f64]) -> f64 {
        let Some(&first) = series.first() else {
            return 0.0;
        };
        let scale = first.abs().max(f64::MIN_POSITIVE);
        series.iter().map(|x| (x - first).abs() / scale).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: SpectralSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
    /// Step actually taken.
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory always holds the initial state")
    }
}

/// Active sets at least this long use the FFT product instead of the direct sum.
const FFT_THRESHOLD: usize = 48;

/// Dealiased pseudospectral product on `L > 3K` points.
struct FftProduct {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftProduct {
    fn new(k: usize) -> Self {
        let len = (3 * k + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// `(W * W)(n)` for `n = 1..=K`, where `W` is the Hermitian extension of `w`.
    fn self_convolve(&self, w: &[Complex64], buf: &mut Vec<Complex64>, out: &mut [Complex64]) {
        buf.clear();
        buf.resize(self.len, ZERO);
        for (j, &v) in w.iter().enumerate() {
            buf[j + 1] = v;
            buf[self.len - j - 1] = v.conj();
        }
        self.inverse.process(buf);
        for v in buf.iter_mut() {
            *v = Complex64::new(v.re * v.re, 0.0);
        }
        self.forward.process(buf);
        let scale = 1.0 / self.len as f64;
        for (j, o) in out.iter_mut().enumerate() {
            *o = buf[j + 1] * scale;
        }
    }
}

/// Positive modes `g, 2g, …, Kg` with per-mode data for the stepper.
struct ActiveModes {
    lattice: ModeLattice,
    g: usize,
    /// `√(mode)` per slot.
    sqrt_mode: Vec<f64>,
    cube: Vec<f64>,
    fft: Option<FftProduct>,
}

impl ActiveModes {
    fn of(u: &SpectralSequence) -> Self {
        let lattice = u.lattice();
        let g = u
            .support()
            .iter()
            .filter(|(n, _)| *n > 0)
            .fold(0usize, |g, (n, _)| gcd(g, *n as usize));
        let g = g.max(1);
        let count = lattice.radius() / g;
        let modes = (1..=count).map(|i| (i * g) as f64);
        Self {
            lattice,
            g,
            sqrt_mode: modes.clone().map(f64::sqrt).collect(),
            cube: modes.map(|n| n * n * n).collect(),
            fft: (count >= FFT_THRESHOLD).then(|| FftProduct::new(count)),
        }
    }

    fn len(&self) -> usize {
        self.sqrt_mode.len()
    }

    /// Largest `|n³ - a³ - b³| = 3nab` over triads `a + b = n` in the set.
    fn max_phase_velocity(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let top = (self.len() * self.g) as f64;
        // 3·L·a·b with a + b = L is largest at a = b = L/2.
        0.75 * top * top * top
    }

    fn gather(&self, u: &SpectralSequence) -> Vec<Complex64> {
        (1..=self.len()).map(|i| u.get((i * self.g) as i64)).collect()
    }

    fn scatter(&self, state: &[Complex64]) -> SpectralSequence {
        let mut u = SpectralSequence::zeros(self.lattice);
        for (i, &v) in state.iter().enumerate() {
            u.set_pair(((i + 1) * self.g) as i64, v);
        }
        u
    }

    /// `N(u)` on the active set; `w` and `buf` are scratch.
    fn rhs(&self, u: &[Complex64], out: &mut [Complex64], w: &mut [Complex64], buf: &mut Vec<Complex64>) {
        let k = self.len();
        for i in 0..k {
            w[i] = u[i] * self.sqrt_mode[i];
        }
        if let Some(fft) = &self.fft {
            fft.self_convolve(w, buf, out);
            for (o, r) in out.iter_mut().zip(&self.sqrt_mode) {
                *o *= Complex64::new(0.0, 3.0 * r);
            }
            return;
        }
        for i in 0..k {
            // Slot i holds mode (i+1)g; a + b = n means slot pairs summing to i - 1.
            let mut sum = ZERO;
            if i >= 1 {
                let (mut a, mut b) = (0usize, i - 1);
                while a < b {
                    sum += 2.0 * w[a] * w[b];
                    a += 1;
                    b -= 1;
                }
                if a == b {
                    sum += w[a] * w[a];
                }
            }
            let mut cross = ZERO;
            for m in 0..k.saturating_sub(i + 1) {
                cross += w[i + 1 + m] * w[m].conj();
            }
            sum += 2.0 * cross;
            out[i] = Complex64::new(0.0, 3.0 * self.sqrt_mode[i]) * sum;
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integrating-factor RK4 on the active set with a fixed (possibly negative) step.
struct Stepper<'a> {
    modes: &'a ActiveModes,
    full: Vec<Complex64>,
    half: Vec<Complex64>,
    h: f64,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
    scratch: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(modes: &'a ActiveModes, h: f64) -> Self {
        let n = modes.len();
        let phase = |s: f64| -> Vec<Complex64> {
            modes.cube.iter().map(|c| Complex64::from_polar(1.0, c * s)).collect()
        };
        Self {
            modes,
            full: phase(h),
            half: phase(0.5 * h),
            h,
            k: std::array::from_fn(|_| vec![ZERO; n]),
            stage: vec![ZERO; n],
            scratch: vec![ZERO; n],
            buf: Vec::new(),
        }
    }

    fn step(&mut self, u: &mut [Complex64]) {
        let h = self.h;
        let n = u.len();
        let [k1, k2, k3, k4] = &mut self.k;
        self.modes.rhs(u, k1, &mut self.scratch, &mut self.buf);
        for i in 0..n {
            self.stage[i] = self.half[i] * (u[i] + 0.5 * h * k1[i]);
        }
        self.modes.rhs(&self.stage, k2, &mut self.scratch, &mut self.buf);
        for i in 0..n {
            self.stage[i] = self.half[i] * u[i] + 0.5 * h * k2[i];
        }
        self.modes.rhs(&self.stage, k3, &mut self.scratch, &mut self.buf);
        for i in 0..n {
            self.stage[i] = self.full[i] * u[i] + h * self.half[i] * k3[i];
        }
        self.modes.rhs(&self.stage, k4, &mut self.scratch, &mut self.buf);
        for i in 0..n {
            u[i] = self.full[i] * u[i]
                + (h / 6.0) * (self.full[i] * k1[i] + 2.0 * self.half[i] * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

fn effective_step(cfg: &SolverConfig, modes: &ActiveModes) -> f64 {
    match cfg.phase_step {
        Some(p) if modes.max_phase_velocity() > 0.0 => cfg.dt.min(p / modes.max_phase_velocity()),
        _ => cfg.dt,
    }
}

fn check_initial(u0: &SpectralSequence, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if !u0.real_type() {
        return invalid_input("evolve needs a real-type initial state");
    }
    if u0.lattice() != cfg.lattice {
        return invalid_config("initial state and solver config use different lattices");
    }
    Ok(())
}

/// Largest three-wave phase velocity `3nab` (`a + b = n`) on the modes the
/// dynamics of `u` can reach.
pub fn max_phase_velocity(u: &SpectralSequence) -> f64 {
    ActiveModes::of(u).max_phase_velocity()
}

/// Step size and step count [`evolve`] will use for `u0` under `cfg`.
pub fn step_plan(u0: &SpectralSequence, cfg: &SolverConfig) -> Result<(f64, usize)> {
    check_initial(u0, cfg)?;
    Ok(plan(cfg, &ActiveModes::of(u0)))
}

fn plan(cfg: &SolverConfig, modes: &ActiveModes) -> (f64, usize) {
    let dt_max = effective_step(cfg, modes);
    if cfg.t_final == 0.0 {
        return (0.0, 0);
    }
    let steps = (cfg.t_final / dt_max).ceil().max(1.0) as usize;
    (cfg.t_final / steps as f64, steps)
}

/// Integrates from `u0` to `t_final`, recording every `record_every` steps
/// and at the final time.
pub fn evolve(u0: &SpectralSequence, cfg: &SolverConfig) -> Result<Trajectory> {
    check_initial(u0, cfg)?;
    let modes = ActiveModes::of(u0);
    let budget = stability_number(u0, effective_step(cfg, &modes));
    if budget > STABILITY_BUDGET {
        return invalid_config(format!(
            "stability number {budget:.3} exceeds {STABILITY_BUDGET}; reduce dt"
        ));
    }
    let (h, steps) = plan(cfg, &modes);

    let mut state = modes.gather(u0);
    let mut traj = Trajectory {
        snapshots: vec![Snapshot { t: 0.0, u: u0.clone() }],
        diagnostics: Diagnostics::default(),
        dt: h,
        steps,
    };
    traj.diagnostics.push(0.0, u0);
    let mut stepper = Stepper::new(&modes, h);
    let mut last_good = state.clone();
    for step in 1..=steps {
        last_good.copy_from_slice(&state);
        stepper.step(&mut state);
        let t = h * step as f64;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverDivergence {
                t: t - h,
                last_good: Box::new(modes.scatter(&last_good)),
            });
        }
        if step % cfg.record_every == 0 || step == steps {
            let u = modes.scatter(&state);
            traj.diagnostics.push(t, &u);
            traj.snapshots.push(Snapshot { t, u });
        }
    }
    Ok(traj)
}

/// State at signed time `t` (no recording). Negative `t` runs the same
/// scheme backwards.
pub fn propagate(u0: &SpectralSequence, t: f64, cfg: &SolverConfig) -> Result<SpectralSequence> {
    check_initial(u0, cfg)?;
    if !t.is_finite() {
        return invalid_input("non-finite propagation time");
    }
    let modes = ActiveModes::of(u0);
    let dt_max = effective_step(cfg, &modes);
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let steps = (t.abs() / dt_max).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut state = modes.gather(u0);
    let mut stepper = Stepper::new(&modes, h);
    for step in 1..=steps {
        let before = state.clone();
        stepper.step(&mut state);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverDivergence {
                t: h * (step - 1) as f64,
                last_good: Box::new(modes.scatter(&before)),
            });
        }
    }
    Ok(modes.scatter(&state))
}

/// Samples of the wrapped soliton `-2κ² sech²(κ(x - 4κ²t - x0))`. The
/// profile has mean `-2κ/π`, so it is returned as raw samples rather than a
/// [`GridFunction`].
pub fn soliton_reference(kappa: f64, t: f64, x0: f64, lattice: ModeLattice) -> Result<Vec<f64>> {
    wrapped_soliton(kappa, x0 + 4.0 * kappa * kappa * t, lattice)
}

/// The zero-momentum soliton solution: the wrapped profile moving at
/// `4κ² + 6c₀` minus its mean `c₀ = -2κ/π`.
pub fn soliton_zero_mean(kappa: f64, t: f64, x0: f64, lattice: ModeLattice) -> Result<GridFunction> {
    let c0 = -2.0 * kappa / PI;
    let mut samples = wrapped_soliton(kappa, x0 + (4.0 * kappa * kappa + 6.0 * c0) * t, lattice)?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.iter_mut().for_each(|v| *v -= mean);
    GridFunction::new(lattice, samples)
}

fn wrapped_soliton(kappa: f64, center: f64, lattice: ModeLattice) -> Result<Vec<f64>> {
    if !(kappa >= 3.0 && kappa.is_finite()) {
        return invalid_input(format!("kappa {kappa} below 3; periodization error too large"));
    }
    if !center.is_finite() {
        return invalid_input("non-finite soliton position");
    }
    let amp = 2.0 * kappa * kappa;
    Ok(lattice
        .grid_points()
        .into_iter()
        .map(|x| {
            let d = (x - center).rem_euclid(2.0 * PI);
            let d = if d >= PI { d - 2.0 * PI } else { d };
            (-2..=2)
                .map(|j| {
                    let s = 1.0 / (kappa * (d + 2.0 * PI * j as f64)).cosh();
                    -amp * s * s
                })
                .sum()
        })
        .collect())
}
