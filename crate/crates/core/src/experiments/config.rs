use serde::{Deserialize, Serialize};

use crate::data::{DataFamily, DataSpec, MAX_EPSILON};
use crate::error::{invalid_config, Result};
use crate::flows::FlowConfig;
use crate::solver::SolverConfig;
use crate::spectral::ModeLattice;

/// Shape of the initial data; ε, ρ and the lattice are filled in per grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataTemplate {
    pub family: DataFamily,
    #[serde(default = "one")]
    pub bandwidth: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn default_haircut() -> f64 {
    0.05
}

fn default_monitor_samples() -> usize {
    8
}

fn default_difference_phase() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Strictly decreasing, at least 4 points spanning a factor of 2 or more.
    pub epsilon_grid: Vec<f64>,
    pub rho: f64,
    /// Measurements are taken at `t = ε^{-β}`.
    #[serde(default)]
    pub horizon_exponent: Option<f64>,
    pub s_values: Vec<f64>,
    pub data: DataTemplate,
    pub solver: SolverConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    /// If set, each grid point runs on the lattice of radius
    /// `min(solver.lattice.N, harmonics · N₀)` instead of `solver.lattice`.
    #[serde(default)]
    pub harmonics: Option<usize>,
    /// Exponent haircut standing in for the "−" in `ε^{γ−}`.
    #[serde(default = "default_haircut")]
    pub haircut: f64,
    /// Pinned constant of the uniform bound `X ≤ C ε^{γ - haircut}`.
    #[serde(default)]
    pub constant: Option<f64>,
    /// Lower bound on the fitted log-log slope, checked per `s`.
    #[serde(default)]
    pub min_slope: Option<f64>,
    /// Number of interior records per trajectory (theorem scan).
    #[serde(default = "default_monitor_samples")]
    pub monitor_samples: usize,
    /// Central-difference step as a fraction of `1/Ω_max` (error scan).
    #[serde(default = "default_difference_phase")]
    pub difference_phase: f64,
    /// Worker threads; `None` uses the rayon default.
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanKind {
    Theorem,
    Transform,
    Error,
}

impl ScanKind {
    pub fn name(self) -> &'static str {
        match self {
            ScanKind::Theorem => "theorem",
            ScanKind::Transform => "transform",
            ScanKind::Error => "error",
        }
    }

    fn allowed_s(self) -> &'static [f64] {
        match self {
            ScanKind::Transform => &[0.0, 0.5, 1.0, 1.5],
            ScanKind::Theorem | ScanKind::Error => &[0.0, 0.5],
        }
    }
}

impl ScanConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self, kind: ScanKind) -> Result<()> {
        let g = &self.epsilon_grid;
        if g.len() < 4 {
            return invalid_config(format!("epsilon_grid needs >= 4 points, got {}", g.len()));
        }
        if g.iter().any(|e| !(*e > 0.0 && *e <= MAX_EPSILON)) {
            return invalid_config(format!("epsilon_grid entries must lie in (0, {MAX_EPSILON}]"));
        }
        if g.windows(2).any(|w| w[1] >= w[0]) {
            return invalid_config("epsilon_grid must be strictly decreasing");
        }
        if g[0] / g[g.len() - 1] < 2.0 {
            return invalid_config("epsilon_grid must span at least one octave");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return invalid_config(format!("rho must be positive, got {}", self.rho));
        }
        if kind == ScanKind::Theorem {
            match self.horizon_exponent {
                Some(b) if b > 0.0 && b < 0.5 => {}
                other => return invalid_config(format!("horizon_exponent must lie in (0, 0.5), got {other:?}")),
            }
        }
        if self.s_values.is_empty() {
            return invalid_config("s_values is empty");
        }
        if let Some(s) = self.s_values.iter().find(|s| !kind.allowed_s().contains(s)) {
            return invalid_config(format!(
                "s = {s} not allowed for the {} scan (allowed {:?})",
                kind.name(),
                kind.allowed_s()
            ));
        }
        if !(self.haircut >= 0.0 && self.haircut.is_finite()) {
            return invalid_config("haircut must be nonnegative");
        }
        if let Some(c) = self.constant {
            if !(c > 0.0 && c.is_finite()) {
                return invalid_config("constant must be positive");
            }
        }
        if self.harmonics == Some(0) {
            return invalid_config("harmonics must be >= 1");
        }
        if self.monitor_samples == 0 {
            return invalid_config("monitor_samples must be >= 1");
        }
        if !(self.difference_phase > 0.0 && self.difference_phase <= 1.0) {
            return invalid_config("difference_phase must lie in (0, 1]");
        }
        if self.threads == Some(0) {
            return invalid_config("threads must be >= 1");
        }
        self.solver.validate()?;
        self.flow.validate()?;
        for (i, &eps) in g.iter().enumerate() {
            self.data_spec(i, eps)?.validate()?;
        }
        Ok(())
    }

    /// Lattice used at grid point `eps`.
    pub fn lattice_for(&self, eps: f64) -> Result<ModeLattice> {
        let base = self.solver.lattice;
        match self.harmonics {
            None => Ok(base),
            Some(k) => {
                let n0 = (1.0 / eps).round() as usize;
                let radius = (k * n0).min(base.radius());
                if radius == base.radius() {
                    Ok(base)
                } else {
                    ModeLattice::with_radius(radius)
                }
            }
        }
    }

    /// Data recipe for grid point `index`; the seed is offset by the index.
    pub fn data_spec(&self, index: usize, eps: f64) -> Result<DataSpec> {
        Ok(DataSpec {
            family: self.data.family,
            epsilon: eps,
            rho: self.rho,
            bandwidth: self.data.bandwidth,
            seed: self.data.seed.wrapping_add(index as u64),
            lattice: self.lattice_for(eps)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> &'static str {
        r#"{
            "epsilon_grid": [0.04, 0.02, 0.01, 0.005],
            "rho": 1.0,
            "horizon_exponent": 0.25,
            "s_values": [0.5],
            "data": {"family": "single_pair"},
            "solver": {"dt": 1e-3, "T": 1.0, "lattice": {"n": 512}, "phase_step": 0.5},
            "harmonics": 2
        }"#
    }

    #[test]
    fn parses_and_validates() {
        let cfg = ScanConfig::from_json(sample()).unwrap();
        cfg.validate(ScanKind::Theorem).unwrap();
        assert_eq!(cfg.haircut, 0.05);
        assert_eq!(cfg.flow, FlowConfig::default());
        assert_eq!(cfg.lattice_for(0.005).unwrap().radius(), 400);
        assert_eq!(cfg.lattice_for(0.04).unwrap().grid_size(), 151);
        assert!(cfg.validate(ScanKind::Transform).is_ok());
    }

    #[test]
    fn rejects_bad_grids_and_fields() {
        let mut cfg = ScanConfig::from_json(sample()).unwrap();
        cfg.epsilon_grid = vec![0.04, 0.03, 0.035, 0.02];
        assert!(cfg.validate(ScanKind::Theorem).is_err());
        cfg.epsilon_grid = vec![0.04, 0.035, 0.03, 0.025];
        assert!(cfg.validate(ScanKind::Theorem).is_err());
        let mut cfg = ScanConfig::from_json(sample()).unwrap();
        cfg.s_values = vec![1.0];
        assert!(cfg.validate(ScanKind::Theorem).is_err());
        assert!(cfg.validate(ScanKind::Transform).is_ok());
        assert!(ScanConfig::from_json(&sample().replace("\"rho\"", "\"rhoo\"")).is_err());
    }
}
