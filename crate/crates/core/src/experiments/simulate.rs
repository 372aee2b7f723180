use serde::{Deserialize, Serialize};

use super::scans::format_float;
use crate::data::{make_data, DataFamily, DataSpec};
use crate::error::{Error, Result};
use crate::solver::{evolve, soliton_zero_mean, Diagnostics, SolverConfig};
use crate::spectral::{weighted_from_physical, SpectralSequence};

/// Initial condition of a single run. The lattice always comes from the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Data {
        family: DataFamily,
        epsilon: f64,
        rho: f64,
        #[serde(default = "one")]
        bandwidth: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Zero-mean soliton of parameter `kappa` centred at `x0`.
    Soliton {
        kappa: f64,
        #[serde(default)]
        x0: f64,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub initial: InitialData,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub dt: f64,
    pub steps: usize,
    pub diagnostics: Diagnostics,
    pub k_drift: f64,
    pub h_drift: f64,
}

impl SimulateConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn initial_state(&self) -> Result<SpectralSequence> {
        let lattice = self.solver.lattice;
        match self.initial {
            InitialData::Data {
                family,
                epsilon,
                rho,
                bandwidth,
                seed,
            } => {
                let spec = DataSpec {
                    family,
                    epsilon,
                    rho,
                    bandwidth,
                    seed,
                    lattice,
                };
                spec.validate().map_err(as_config)?;
                make_data(&spec)
            }
            InitialData::Soliton { kappa, x0 } => soliton_zero_mean(kappa, 0.0, x0, lattice)
                .map(|v| weighted_from_physical(&v))
                .map_err(as_config),
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => Error::InvalidConfig(msg),
        other => other,
    }
}

pub fn simulate(cfg: &SimulateConfig) -> Result<SimulationReport> {
    cfg.solver.validate()?;
    let u0 = cfg.initial_state()?;
    let traj = evolve(&u0, &cfg.solver)?;
    let d = traj.diagnostics;
    Ok(SimulationReport {
        dt: traj.dt,
        steps: traj.steps,
        k_drift: Diagnostics::relative_drift(&d.k),
        h_drift: Diagnostics::relative_drift(&d.h),
        diagnostics: d,
    })
}

impl SimulationReport {
    /// `t,p,k,h,h1_weighted`, one line per recorded step.
    pub fn to_csv(&self) -> String {
        let d = &self.diagnostics;
        let mut out = String::from("t,p,k,h,h1_weighted\n");
        for i in 0..d.times.len() {
            let cells = [d.times[i], d.p[i], d.k[i], d.h[i], d.h1_weighted[i]].map(format_float);
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_run_from_json() {
        let cfg = SimulateConfig::from_json(
            r#"{"initial": {"kind": "data", "family": "deterministic_band", "epsilon": 0.1, "rho": 1.0},
                "solver": {"dt": 1e-4, "T": 0.01, "lattice": {"n": 64}, "record_every": 50}}"#,
        )
        .unwrap();
        let r = simulate(&cfg).unwrap();
        assert_eq!(r.steps, 100);
        assert_eq!(r.diagnostics.times.len(), 3);
        assert!(r.k_drift < 1e-3, "{}", r.k_drift);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn bad_initial_data_is_a_config_error() {
        let cfg = SimulateConfig::from_json(
            r#"{"initial": {"kind": "soliton", "kappa": 1.0},
                "solver": {"dt": 1e-4, "T": 0.01, "lattice": {"n": 32}}}"#,
        )
        .unwrap();
        assert!(matches!(simulate(&cfg), Err(Error::InvalidConfig(_))));
        assert!(SimulateConfig::from_json(r#"{"initial": {"kind": "wave"}}"#).is_err());
    }
}
