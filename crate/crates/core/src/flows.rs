//! Time-τ Hamiltonian flows and the near-identity change of variables
//! `u = Φ¹_{F₁} ∘ Φ¹_{F₂}(q)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::membership;
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::hamiltonians::{gradient, sigma, Bracket, Functional, HamiltonianKind, HamiltonianSpec};
use crate::spectral::{linear_phase, NormSpec, SpectralSequence};

/// A flow aborts once `‖w‖_{ℓ²}` exceeds this multiple of `‖q‖_{ℓ²}`.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Reality drift tolerated per substep before the flow is declared broken.
const FLOW_REALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Fixed RK4 steps on `τ ∈ [0, 1]`.
    pub substeps: usize,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    4
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            substeps: 32,
            order: 4,
        }
    }
}

impl FlowConfig {
    pub fn with_substeps(substeps: usize) -> Self {
        Self {
            substeps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps < 8 {
            return invalid_config(format!("flow substeps {} < 8", self.substeps));
        }
        if self.order != 4 {
            return invalid_config(format!("flow order {} unsupported (only 4)", self.order));
        }
        Ok(())
    }
}

fn vector_field(spec: &HamiltonianSpec, w: &SpectralSequence) -> SpectralSequence {
    gradient(spec, w).map(|n, g| g * sigma(n))
}

/// Integrates `dw(n)/dτ = σ(n) ∂F/∂w(-n)` from `w(0) = q` to `τ = tau`.
///
/// The number of RK4 steps is `substeps · max(1, ⌈|tau|⌉)`. Λ₂ generates the
/// linear phase and is applied exactly.
pub fn flow(spec: &HamiltonianSpec, q: &SpectralSequence, tau: f64, cfg: &FlowConfig) -> Result<SpectralSequence> {
    cfg.validate()?;
    if !tau.is_finite() {
        return invalid_input("non-finite flow time");
    }
    if spec.kind == HamiltonianKind::Lambda2 {
        return Ok(linear_phase(q, tau));
    }
    if tau == 0.0 {
        return Ok(q.clone());
    }
    let real = q.real_type();
    let initial_norm = q.norm(NormSpec::l2(0.0));
    let steps = cfg.substeps * (tau.abs().ceil() as usize).max(1);
    let h = tau / steps as f64;
    let mut w = q.clone();
    for step in 0..steps {
        let k1 = vector_field(spec, &w);
        let k2 = vector_field(spec, &w.axpy(0.5 * h, &k1));
        let k3 = vector_field(spec, &w.axpy(0.5 * h, &k2));
        let k4 = vector_field(spec, &w.axpy(h, &k3));
        let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).add(&k4);
        w = w.axpy(h / 6.0, &incr);

        let norm = w.norm(NormSpec::l2(0.0));
        let at = h * (step + 1) as f64;
        if !norm.is_finite() || norm > DIVERGENCE_FACTOR * initial_norm {
            return Err(Error::FlowDivergence {
                tau: at,
                initial_norm,
                norm,
            });
        }
        if real {
            w = w
                .promote_real(FLOW_REALITY_TOL)
                .map_err(|_| Error::InvalidInput(format!("flow lost reality at tau = {at}")))?;
        }
    }
    Ok(w)
}

/// `u(q) = Φ¹_{F₁}(Φ¹_{F₂}(q))`.
pub fn u_of_q(q: &SpectralSequence, cfg: &FlowConfig) -> Result<SpectralSequence> {
    let w = flow(&HamiltonianSpec::F2, q, 1.0, cfg)?;
    flow(&HamiltonianSpec::F1, &w, 1.0, cfg)
}

/// `q(u) = Φ⁻¹_{F₂}(Φ⁻¹_{F₁}(u))`, by negative-time integration.
pub fn q_of_u(u: &SpectralSequence, cfg: &FlowConfig) -> Result<SpectralSequence> {
    let w = flow(&HamiltonianSpec::F1, u, -1.0, cfg)?;
    flow(&HamiltonianSpec::F2, &w, -1.0, cfg)
}

/// Weights at which near-identity deviations are reported.
pub const REPORT_WEIGHTS: [f64; 4] = [0.0, 0.5, 1.0, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedDeviation {
    pub s: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub epsilon: f64,
    pub deviations: Vec<WeightedDeviation>,
    /// `u(q) ∈ X_ε^{2ρ}`.
    pub membership_after: bool,
}

impl TransformReport {
    pub fn deviation(&self, s: f64) -> Option<f64> {
        self.deviations.iter().find(|d| d.s == s).map(|d| d.deviation)
    }
}

/// `‖u(q) - q‖_{ℓ²_s}` for `s ∈ {0, ½, 1, 3/2}` and membership of `u(q)` in
/// `X_ε^{2ρ}`. Rejects `q ∉ X_ε^ρ`.
pub fn near_identity_report(q: &SpectralSequence, epsilon: f64, rho: f64, cfg: &FlowConfig) -> Result<TransformReport> {
    if !membership(q, epsilon, rho)?.in_class {
        return invalid_input(format!("data outside X_eps^rho (eps = {epsilon}, rho = {rho})"));
    }
    let u = u_of_q(q, cfg)?;
    let diff = u.sub(q);
    let deviations = REPORT_WEIGHTS
        .iter()
        .map(|&s| WeightedDeviation {
            s,
            deviation: diff.norm(NormSpec::l2(s)),
        })
        .collect();
    Ok(TransformReport {
        epsilon,
        deviations,
        membership_after: membership(&u, epsilon, 2.0 * rho)?.in_class,
    })
}

/// Maximum nesting depth of brackets for [`taylor_check`].
pub const MAX_TAYLOR_ORDER: usize = 3;

/// `|H(Φ¹_F(q)) - Σ_{j≤k} g_F^j H(q) / j!|` with `g_F H = {H, F}`; nested
/// brackets beyond the first use central-difference gradients.
pub fn taylor_check(
    h: &HamiltonianSpec,
    f: &HamiltonianSpec,
    q: &SpectralSequence,
    k: usize,
    cfg: &FlowConfig,
) -> Result<f64> {
    if k > MAX_TAYLOR_ORDER {
        return invalid_input(format!("taylor order {k} exceeds {MAX_TAYLOR_ORDER}"));
    }
    let moved = h.value(&flow(f, q, 1.0, cfg)?);
    let g1 = Bracket::new(h, f);
    let g2 = Bracket::new(&g1, f);
    let g3 = Bracket::new(&g2, f);
    let terms: [&dyn Functional; 4] = [h, &g1, &g2, &g3];
    let mut series = Complex64::new(0.0, 0.0);
    let mut factorial = 1.0;
    for (j, term) in terms.iter().enumerate().take(k + 1) {
        if j > 0 {
            factorial *= j as f64;
        }
        series += term.value(q) / factorial;
    }
    Ok((moved - series).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_data, DataFamily, DataSpec};
    use crate::hamiltonians::eval_hamiltonian;
    use crate::spectral::ModeLattice;
    use rand::{Rng, SeedableRng};

    fn single_pair(eps: f64, n: usize) -> SpectralSequence {
        let spec = DataSpec::new(DataFamily::SinglePair, eps, 1.0, ModeLattice::with_radius(n).unwrap());
        make_data(&spec).unwrap()
    }

    fn random_small(n: usize, upto: i64, amp: f64, seed: u64) -> SpectralSequence {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SpectralSequence::real_from_positive(ModeLattice::with_radius(n).unwrap(), |k| {
            if k <= upto {
                Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn zero_time_is_identity() {
        let q = single_pair(0.1, 40);
        let cfg = FlowConfig::default();
        assert_eq!(flow(&HamiltonianSpec::F1, &q, 0.0, &cfg).unwrap(), q);
    }

    #[test]
    fn rejects_short_configs() {
        let q = single_pair(0.1, 40);
        assert!(flow(&HamiltonianSpec::F1, &q, 1.0, &FlowConfig::with_substeps(4)).is_err());
    }

    #[test]
    fn flows_are_reversible() {
        let q = single_pair(0.1, 40);
        let cfg = FlowConfig::default();
        for spec in [HamiltonianSpec::F1, HamiltonianSpec::F2] {
            let w = flow(&spec, &q, 1.0, &cfg).unwrap();
            assert!(w.real_type());
            let back = flow(&spec, &w, -1.0, &cfg).unwrap();
            let err = back.sub(&q).norm(NormSpec::l2(0.0));
            assert!(err <= 1e-9 * q.norm(NormSpec::l2(0.0)), "{spec:?}: {err:e}");
        }
    }

    #[test]
    fn flows_conserve_their_generator() {
        let q = single_pair(0.1, 40);
        let cfg = FlowConfig::default();
        for spec in [HamiltonianSpec::F1, HamiltonianSpec::F2] {
            let f0 = eval_hamiltonian(&spec, &q);
            // F₁ vanishes on a single pair, so fall back to the natural size ‖q‖^d.
            let scale = f0.norm().max(q.norm(NormSpec::l2(0.0)).powi(spec.degree() as i32));
            for tau in [0.25, 0.5, 1.0] {
                let w = flow(&spec, &q, tau, &cfg).unwrap();
                let drift = (eval_hamiltonian(&spec, &w) - f0).norm();
                assert!(drift <= 1e-10 * scale, "{spec:?} tau={tau}: {drift:e}");
            }
        }
    }

    #[test]
    fn step_halving_converges_at_fourth_order() {
        // Large enough amplitude that truncation error dominates rounding.
        let q = random_small(12, 6, 0.3, 7);
        let reference = flow(&HamiltonianSpec::F1, &q, 1.0, &FlowConfig::with_substeps(512)).unwrap();
        let err = |s| {
            flow(&HamiltonianSpec::F1, &q, 1.0, &FlowConfig::with_substeps(s))
                .unwrap()
                .sub(&reference)
                .norm(NormSpec::l2(0.0))
        };
        let ratio = err(8) / err(16);
        let order = ratio.log2();
        assert!((order - 4.0).abs() <= 0.3, "order {order}");
    }

    #[test]
    fn transform_round_trips() {
        let cfg = FlowConfig::default();
        let z = SpectralSequence::zeros(ModeLattice::with_radius(8).unwrap());
        assert_eq!(u_of_q(&z, &cfg).unwrap().max_abs(), 0.0);
        assert_eq!(q_of_u(&z, &cfg).unwrap().max_abs(), 0.0);
        let q = single_pair(0.05, 80);
        let back = q_of_u(&u_of_q(&q, &cfg).unwrap(), &cfg).unwrap();
        assert!(back.sub(&q).norm(NormSpec::l2(0.0)) <= 1e-8);
        let u = single_pair(0.05, 80);
        let there = u_of_q(&q_of_u(&u, &cfg).unwrap(), &cfg).unwrap();
        assert!(there.sub(&u).norm(NormSpec::l2(0.0)) <= 1e-8);
    }

    #[test]
    fn divergence_guard_trips_far_from_identity() {
        let q = random_small(6, 6, 100.0, 1);
        let err = flow(&HamiltonianSpec::F1, &q, 1.0, &FlowConfig::default()).unwrap_err();
        assert!(matches!(err, Error::FlowDivergence { .. }), "{err}");
    }

    #[test]
    fn report_on_single_pair() {
        let cfg = FlowConfig::default();
        let q = single_pair(0.05, 80);
        let r = near_identity_report(&q, 0.05, 1.0, &cfg).unwrap();
        assert!(r.membership_after);
        assert_eq!(r.deviations.len(), 4);
        let z = SpectralSequence::zeros(q.lattice());
        let r = near_identity_report(&z, 0.05, 1.0, &cfg).unwrap();
        assert!(r.deviations.iter().all(|d| d.deviation == 0.0));
        let big = q.scale(3.0);
        assert!(near_identity_report(&big, 0.05, 1.0, &cfg).is_err());
    }

    #[test]
    fn taylor_residual_scales_with_first_omitted_degree() {
        // Degree-6 terms still contaminate the k = 2 residual at moderate
        // amplitude, so scale down until the leading degree dominates.
        let cfg = FlowConfig::with_substeps(64);
        let q = random_small(4, 2, 0.01, 21);
        for (k, expected) in [(2, 5.0), (3, 6.0)] {
            let pts: Vec<(f64, f64)> = [1.0, 0.5, 0.25]
                .iter()
                .map(|&l| {
                    let r = taylor_check(&HamiltonianSpec::LAMBDA2, &HamiltonianSpec::F1, &q.scale(l), k, &cfg).unwrap();
                    (l, r)
                })
                .collect();
            let fit = crate::experiments::slope_fit(&pts).unwrap();
            assert!((fit.slope - expected).abs() <= 0.2, "k = {k}: slope {}", fit.slope);
        }
    }

    #[test]
    fn taylor_terminates_for_commuting_pair() {
        let cfg = FlowConfig::default();
        let q = random_small(6, 3, 0.3, 2);
        let r = taylor_check(&HamiltonianSpec::QUARTIC_RESONANT, &HamiltonianSpec::LAMBDA2, &q, 1, &cfg).unwrap();
        let scale = eval_hamiltonian(&HamiltonianSpec::QUARTIC_RESONANT, &q).norm();
        assert!(r <= 1e-12 * scale, "{r:e}");
        let z = SpectralSequence::zeros(q.lattice());
        assert_eq!(taylor_check(&HamiltonianSpec::LAMBDA2, &HamiltonianSpec::F1, &z, 2, &cfg).unwrap(), 0.0);
        assert!(taylor_check(&HamiltonianSpec::LAMBDA2, &HamiltonianSpec::F1, &q, 4, &cfg).is_err());
    }
}
