use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::hamiltonians::{
    eval_hamiltonian, fd_gradient, gradient, poisson_bracket, resonance_witness, HamiltonianSpec,
};
use crate::spectral::{ModeLattice, NormSpec, SpectralSequence};

pub const IDENTITY_I_TOL: f64 = 1e-11;
pub const IDENTITY_II_TOL: f64 = 1e-10;
pub const GRADIENT_TOL: f64 = 1e-6;
/// Index bound of the exhaustive factorization checks.
pub const FACTOR_BOUND: i64 = 64;
/// Bracket checks are O(N³); larger lattices are refused.
pub const MAX_IDENTITY_N: usize = 16;

/// Real-type state with uniform random coefficients on modes `1..=upto`.
pub fn random_state(lattice: ModeLattice, upto: usize, rng: &mut impl Rng) -> SpectralSequence {
    SpectralSequence::real_from_positive(lattice, |k| {
        if k as usize <= upto {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorizationCheck {
    pub checked: u64,
    pub failures: u64,
}

/// Every zero-sum nonzero triple with `|nᵢ| ≤ bound` satisfies
/// `Σnᵢ³ = 3n₁n₂n₃` and is non-resonant.
pub fn check_triples(bound: i64) -> FactorizationCheck {
    let mut out = FactorizationCheck { checked: 0, failures: 0 };
    for a in -bound..=bound {
        for b in -bound..=bound {
            let c = -(a + b);
            if a == 0 || b == 0 || c == 0 || c.abs() > bound {
                continue;
            }
            let w = resonance_witness(&[a, b, c]).expect("valid triple");
            out.checked += 1;
            if w.cube_sum != w.factored || w.resonant {
                out.failures += 1;
            }
        }
    }
    out
}

/// Every zero-sum nonzero quadruple with `|nᵢ| ≤ bound` satisfies
/// `|Σnᵢ³| = 3|n₁+n₂||n₁+n₃||n₂+n₃|` and the signed identity, and is resonant
/// exactly when it splits into two cancelling pairs.
pub fn check_quadruples(bound: i64) -> FactorizationCheck {
    let mut out = FactorizationCheck { checked: 0, failures: 0 };
    for a in -bound..=bound {
        for b in -bound..=bound {
            for c in -bound..=bound {
                let d = -(a + b + c);
                if a == 0 || b == 0 || c == 0 || d == 0 || d.abs() > bound {
                    continue;
                }
                let w = resonance_witness(&[a, b, c, d]).expect("valid quadruple");
                out.checked += 1;
                let sym = w.symmetric_factored.expect("quadruple");
                let paired = a + b == 0 || a + c == 0 || b + c == 0;
                if w.cube_sum.abs() != sym.abs() || w.cube_sum != w.factored || w.resonant != paired {
                    out.failures += 1;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRow {
    pub kind: String,
    pub points: usize,
    /// Largest `‖∇ - ∇_fd‖ / ‖∇‖` over the points.
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub triples: FactorizationCheck,
    pub quadruples: FactorizationCheck,
    /// `max |{Λ₂,F₁} + H₃| / |H₃|`.
    pub identity_i_max: f64,
    /// `max |{Λ₂,F₂} + ½{H₃,F₁} + (3/2)iΣ|q|⁴| / max(|{Λ₂,F₂}|, |{H₃,F₁}|)`.
    pub identity_ii_max: f64,
    pub gradients: Vec<GradientRow>,
    pub passed: bool,
}

/// Residual of the first homological identity, relative to `|H₃(q)|`.
pub fn identity_i_residual(q: &SpectralSequence) -> f64 {
    let h3 = eval_hamiltonian(&HamiltonianSpec::H3, q);
    let r = poisson_bracket(&HamiltonianSpec::LAMBDA2, &HamiltonianSpec::F1, q) + h3;
    r.norm() / h3.norm()
}

/// Residual of the second homological identity, relative to the larger bracket.
pub fn identity_ii_residual(q: &SpectralSequence) -> f64 {
    let lf2 = poisson_bracket(&HamiltonianSpec::LAMBDA2, &HamiltonianSpec::F2, q);
    let hf1 = poisson_bracket(&HamiltonianSpec::H3, &HamiltonianSpec::F1, q);
    let res = eval_hamiltonian(&HamiltonianSpec::QUARTIC_RESONANT, q);
    (lf2 + hf1 * 0.5 + res).norm() / lf2.norm().max(hf1.norm())
}

/// Largest relative analytic-vs-central-difference gradient error of `spec`
/// over `points` random states.
pub fn gradient_check(spec: &HamiltonianSpec, lattice: ModeLattice, points: usize, rng: &mut impl Rng) -> f64 {
    (0..points)
        .map(|_| {
            let q = random_state(lattice, lattice.radius(), rng);
            let g = gradient(spec, &q);
            let fd = fd_gradient(spec, &q);
            g.sub(&fd).norm(NormSpec::l2(0.0)) / g.norm(NormSpec::l2(0.0))
        })
        .fold(0.0, f64::max)
}

/// Runs the identity suite on `trials` random states of radius `n`; states
/// are supported on `|k| ≤ n/2` so every quadratic interaction stays on the
/// lattice.
pub fn check_identities(n: usize, trials: usize, seed: u64) -> Result<IdentityReport> {
    if !(2..=MAX_IDENTITY_N).contains(&n) {
        return invalid_config(format!("identity checks need 2 <= n <= {MAX_IDENTITY_N}, got {n}"));
    }
    if trials == 0 {
        return invalid_config("trials must be >= 1");
    }
    let lattice = ModeLattice::with_radius(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut i_max, mut ii_max) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let q = random_state(lattice, n / 2, &mut rng);
        i_max = i_max.max(identity_i_residual(&q));
        ii_max = ii_max.max(identity_ii_residual(&q));
    }
    let grad_lattice = ModeLattice::with_radius(n.min(6))?;
    let gradients: Vec<GradientRow> = [
        HamiltonianSpec::LAMBDA2,
        HamiltonianSpec::H3,
        HamiltonianSpec::F1,
        HamiltonianSpec::F2,
        HamiltonianSpec::QUARTIC_RESONANT,
    ]
    .iter()
    .map(|spec| GradientRow {
        kind: format!("{:?}", spec.kind),
        points: 20,
        max_relative_error: gradient_check(spec, grad_lattice, 20, &mut rng),
    })
    .collect();
    let triples = check_triples(FACTOR_BOUND);
    let quadruples = check_quadruples(FACTOR_BOUND);
    let passed = triples.failures == 0
        && quadruples.failures == 0
        && i_max <= IDENTITY_I_TOL
        && ii_max <= IDENTITY_II_TOL
        && gradients.iter().all(|g| g.max_relative_error <= GRADIENT_TOL);
    Ok(IdentityReport {
        n,
        trials,
        seed,
        triples,
        quadruples,
        identity_i_max: i_max,
        identity_ii_max: ii_max,
        gradients,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_factorization_counts() {
        // Zero-sum nonzero triples with |nᵢ| ≤ 2: (1,1,-2) and (-1,-1,2), 3 orderings each.
        assert_eq!(check_triples(2), FactorizationCheck { checked: 6, failures: 0 });
        assert_eq!(check_quadruples(3).failures, 0);
    }

    #[test]
    fn suite_passes_on_small_lattice() {
        let r = check_identities(6, 5, 1).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(check_identities(17, 1, 1).is_err());
    }
}
