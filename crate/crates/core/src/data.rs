//! Initial data in the high-frequency class
//! `X_ε^ρ = { u real-type : ‖u‖_{ℓ²} ≤ ρ√ε, ‖u‖_{ℓ²_{3/2}} ≤ ρ/ε }`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Result};
use crate::spectral::{ModeLattice, NormSpec, SpectralSequence};

/// Slack on the class bounds so that exactly saturating data count as members.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

pub const MAX_EPSILON: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFamily {
    /// Modes `±N₀` only; saturates both class bounds.
    SinglePair,
    /// Band `[N₀, N₀(1+bandwidth)]` with fixed phases.
    DeterministicBand,
    /// Band with seeded random amplitudes and phases.
    RandomBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub family: DataFamily,
    pub epsilon: f64,
    pub rho: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: usize,
    #[serde(default)]
    pub seed: u64,
    pub lattice: ModeLattice,
}

fn default_bandwidth() -> usize {
    1
}

impl DataSpec {
    pub fn new(family: DataFamily, epsilon: f64, rho: f64, lattice: ModeLattice) -> Self {
        Self {
            family,
            epsilon,
            rho,
            bandwidth: 1,
            seed: 0,
            lattice,
        }
    }

    /// Carrier frequency `N₀ = round(1/ε)`.
    pub fn carrier(&self) -> usize {
        (1.0 / self.epsilon).round() as usize
    }

    /// `1/N₀`, the value of ε the generated data actually realize.
    pub fn effective_epsilon(&self) -> f64 {
        1.0 / self.carrier() as f64
    }

    /// Highest populated mode.
    pub fn top_mode(&self) -> usize {
        match self.family {
            DataFamily::SinglePair => self.carrier(),
            _ => self.carrier() * (1 + self.bandwidth),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= MAX_EPSILON) {
            return invalid_config(format!("epsilon {} outside (0, {MAX_EPSILON}]", self.epsilon));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return invalid_config(format!("rho {} must be positive", self.rho));
        }
        if self.family != DataFamily::SinglePair && self.bandwidth == 0 {
            return invalid_config("band families need bandwidth >= 1");
        }
        if 2 * self.top_mode() > self.lattice.radius() {
            return invalid_config(format!(
                "support up to mode {} needs lattice radius >= {}, have {}",
                self.top_mode(),
                2 * self.top_mode(),
                self.lattice.radius()
            ));
        }
        Ok(())
    }
}

/// Deterministic phase for mode `k` (golden-ratio rotation).
fn fixed_phase(k: usize) -> f64 {
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    2.0 * PI * (k as f64 * golden).fract()
}

pub fn make_data(spec: &DataSpec) -> Result<SpectralSequence> {
    spec.validate()?;
    let eps = spec.effective_epsilon();
    let n0 = spec.carrier();
    let lattice = spec.lattice;
    let mut u = SpectralSequence::zeros(lattice);
    match spec.family {
        DataFamily::SinglePair => {
            u.set_pair(n0 as i64, Complex64::new(spec.rho * eps.sqrt() / 2f64.sqrt(), 0.0));
            return Ok(u);
        }
        DataFamily::DeterministicBand => {
            for k in n0..=spec.top_mode() {
                let amp = (n0 as f64 / k as f64).powf(1.5);
                u.set_pair(k as i64, Complex64::from_polar(amp, fixed_phase(k)));
            }
        }
        DataFamily::RandomBand => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for k in n0..=spec.top_mode() {
                let amp = rng.gen_range(0.5..1.0) * (n0 as f64 / k as f64).powf(1.5);
                let phase = rng.gen_range(0.0..2.0 * PI);
                u.set_pair(k as i64, Complex64::from_polar(amp, phase));
            }
        }
    }
    // Saturate whichever bound binds; for band data that is ℓ²_{3/2}.
    let l2 = u.norm(NormSpec::l2(0.0));
    let l2_32 = u.norm(NormSpec::l2(1.5));
    let factor = (spec.rho * eps.sqrt() / l2).min(spec.rho / eps / l2_32);
    Ok(u.scale(factor))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub in_class: bool,
    /// `‖u‖_{ℓ²} / (ρ√ε)`.
    pub l2_ratio: f64,
    /// `‖u‖_{ℓ²_{3/2}} / (ρ/ε)`.
    pub l2_32_ratio: f64,
}

pub fn membership(u: &SpectralSequence, epsilon: f64, rho: f64) -> Result<MembershipReport> {
    if !u.real_type() {
        return invalid_input("membership requires a real-type sequence");
    }
    if !(epsilon > 0.0 && rho > 0.0) {
        return invalid_input("epsilon and rho must be positive");
    }
    let l2_ratio = u.norm(NormSpec::l2(0.0)) / (rho * epsilon.sqrt());
    let l2_32_ratio = u.norm(NormSpec::l2(1.5)) / (rho / epsilon);
    Ok(MembershipReport {
        in_class: l2_ratio <= 1.0 + MEMBERSHIP_SLACK && l2_32_ratio <= 1.0 + MEMBERSHIP_SLACK,
        l2_ratio,
        l2_32_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(n: usize) -> ModeLattice {
        ModeLattice::with_radius(n).unwrap()
    }

    #[test]
    fn single_pair_saturates_both_bounds() {
        let spec = DataSpec::new(DataFamily::SinglePair, 0.01, 1.0, lat(200));
        let u = make_data(&spec).unwrap();
        assert_eq!(u.support().len(), 2);
        assert!((u.get(100).norm() - 0.1 / 2f64.sqrt()).abs() < 1e-16);
        assert!((u.norm(NormSpec::l2(0.0)) - 0.1).abs() < 1e-15);
        assert!((u.norm(NormSpec::l2(1.5)) - 100.0).abs() < 1e-12);
        let m = membership(&u, 0.01, 1.0).unwrap();
        assert!(m.in_class);
        assert!((m.l2_ratio - 1.0).abs() < 1e-14 && (m.l2_32_ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = DataSpec::new(DataFamily::RandomBand, 0.1, 1.0, lat(256));
        spec.bandwidth = 8;
        spec.seed = 42;
        let a = serde_json::to_vec(&make_data(&spec).unwrap()).unwrap();
        let b = serde_json::to_vec(&make_data(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
        spec.seed = 43;
        assert_ne!(a, serde_json::to_vec(&make_data(&spec).unwrap()).unwrap());
    }

    #[test]
    fn random_band_members_for_many_seeds() {
        let mut spec = DataSpec::new(DataFamily::RandomBand, 0.1, 1.0, lat(256));
        spec.bandwidth = 8;
        for seed in 0..100 {
            spec.seed = seed;
            let u = make_data(&spec).unwrap();
            assert!(u.real_type());
            let m = membership(&u, 0.1, 1.0).unwrap();
            assert!(m.in_class, "seed {seed}: {m:?}");
            assert!(m.l2_32_ratio >= 0.9);
        }
    }

    #[test]
    fn deterministic_band_saturates_energy_bound() {
        let mut spec = DataSpec::new(DataFamily::DeterministicBand, 0.1, 2.0, lat(64));
        spec.bandwidth = 1;
        let u = make_data(&spec).unwrap();
        let m = membership(&u, 0.1, 2.0).unwrap();
        assert!(m.in_class);
        assert!((m.l2_32_ratio - 1.0).abs() < 1e-12);
        assert_eq!(u.support().len(), 2 * 11);
    }

    #[test]
    fn membership_examples() {
        let l = lat(4);
        let z = SpectralSequence::zeros(l);
        let m = membership(&z, 0.01, 1.0).unwrap();
        assert!(m.in_class && m.l2_ratio == 0.0 && m.l2_32_ratio == 0.0);
        let u = SpectralSequence::real_from_positive(l, |k| Complex64::new(if k == 1 { 1.0 } else { 0.0 }, 0.0));
        let m = membership(&u, 0.01, 1.0).unwrap();
        assert!(!m.in_class);
        assert!((m.l2_ratio - 2f64.sqrt() / 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_lattice_and_bad_epsilon() {
        let spec = DataSpec::new(DataFamily::SinglePair, 0.01, 1.0, lat(150));
        assert!(make_data(&spec).is_err());
        let spec = DataSpec::new(DataFamily::SinglePair, 0.3, 1.0, lat(150));
        assert!(make_data(&spec).is_err());
    }
}
