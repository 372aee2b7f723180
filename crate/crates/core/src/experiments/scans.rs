use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ScanConfig, ScanKind};
use super::fit::{slope_fit, SlopeFit};
use crate::data::make_data;
use crate::error::{Error, Result};
use crate::flows::{q_of_u, u_of_q};
use crate::solver::{evolve, max_phase_velocity, propagate, step_plan, SolverConfig};
use crate::spectral::{linear_phase, physical_from_weighted, NormSpec, SpectralSequence};

/// Ceiling on `‖u(t)‖_{ℓ²_{3/2}} / (ρ/ε)` along a trajectory.
pub const MONITOR_LIMIT: f64 = 2.0;
/// Accepted window for the measured central-difference order.
pub const CONSISTENCY_ORDER: (f64, f64) = (1.7, 2.3);

/// One CSV line: `epsilon,t,s,deviation,bracket_t,v_deviation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub epsilon: f64,
    pub t: f64,
    pub s: f64,
    pub deviation: f64,
    /// `⟨t⟩ = √(1 + t²)`.
    pub bracket_t: f64,
    /// Physical-space `L²` norm of the same object.
    pub v_deviation: f64,
}

/// Per grid point measurements that do not fit the row schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub epsilon: f64,
    pub lattice_n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Largest `‖u(t)‖_{ℓ²_{3/2}} / (ρ/ε)` over the records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership_after: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difference_step: Option<f64>,
    /// `log₂(‖E_Δt − E_{Δt/2}‖ / ‖E_{Δt/2} − E_{Δt/4}‖)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub epsilon: f64,
    pub divergence: bool,
    pub message: String,
}

/// Uniform-constant test `X(ε) ≤ C ε^{γ - haircut}` plus a log-log fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub s: f64,
    pub exponent: f64,
    pub haircut: f64,
    /// `max_ε X(ε) / ε^{γ - haircut}`, the smallest admissible constant.
    pub max_ratio: f64,
    pub constant: Option<f64>,
    pub fit: Option<SlopeFit>,
    pub min_slope: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub kind: String,
    pub rows: Vec<ScanRow>,
    pub points: Vec<PointSummary>,
    pub fits: Vec<FitSummary>,
    pub failures: Vec<PointFailure>,
    pub passed: bool,
}

impl ScanReport {
    pub fn has_divergence(&self) -> bool {
        self.failures.iter().any(|f| f.divergence)
    }

    pub fn fit(&self, s: f64) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.s == s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,t,s,deviation,bracket_t,v_deviation\n");
        for r in &self.rows {
            let cells = [r.epsilon, r.t, r.s, r.deviation, r.bracket_t, r.v_deviation].map(format_float);
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Shortest round-trip decimal; scientific outside `[1e-4, 1e16)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct PointResult {
    rows: Vec<ScanRow>,
    summary: PointSummary,
    /// Quantity fitted per `s`, in the order of `s_values`.
    measures: Vec<f64>,
}

fn v_norm(u: &SpectralSequence) -> Result<f64> {
    Ok(physical_from_weighted(u)?.l2_norm())
}

fn bracket(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

fn theorem_point(cfg: &ScanConfig, index: usize, eps: f64) -> Result<PointResult> {
    let spec = cfg.data_spec(index, eps)?;
    let u0 = make_data(&spec)?;
    let eps = spec.effective_epsilon();
    let beta = cfg.horizon_exponent.expect("validated");
    let horizon = eps.powf(-beta);
    let mut solver = SolverConfig {
        t_final: horizon,
        lattice: spec.lattice,
        record_every: 1,
        ..cfg.solver
    };
    let (_, steps) = step_plan(&u0, &solver)?;
    solver.record_every = steps.div_ceil(cfg.monitor_samples).max(1);
    let traj = evolve(&u0, &solver)?;

    let mut rows = Vec::new();
    for snap in &traj.snapshots {
        let diff = snap.u.sub(&linear_phase(&u0, snap.t));
        let v_dev = v_norm(&diff)?;
        for &s in &cfg.s_values {
            rows.push(ScanRow {
                epsilon: eps,
                t: snap.t,
                s,
                deviation: diff.norm(NormSpec::l2(s)),
                bracket_t: bracket(snap.t),
                v_deviation: v_dev,
            });
        }
    }
    let last = traj.last();
    let diff = last.u.sub(&linear_phase(&u0, last.t));
    let measures = cfg
        .s_values
        .iter()
        .map(|&s| diff.norm(NormSpec::l2(s)) / bracket(last.t))
        .collect();
    let bound = cfg.rho / eps;
    let d = &traj.diagnostics;
    Ok(PointResult {
        rows,
        measures,
        summary: PointSummary {
            epsilon: eps,
            lattice_n: spec.lattice.radius(),
            horizon: Some(horizon),
            steps: Some(traj.steps),
            dt: Some(traj.dt),
            monitor_max: Some(d.h1_weighted.iter().map(|h| h / bound).fold(0.0, f64::max)),
            k_drift: Some(crate::solver::Diagnostics::relative_drift(&d.k)),
            h_drift: Some(crate::solver::Diagnostics::relative_drift(&d.h)),
            ..Default::default()
        },
    })
}

fn transform_point(cfg: &ScanConfig, index: usize, eps: f64) -> Result<PointResult> {
    let spec = cfg.data_spec(index, eps)?;
    let q = make_data(&spec)?;
    let eps = spec.effective_epsilon();
    let report = crate::flows::near_identity_report(&q, eps, cfg.rho, &cfg.flow)?;
    let diff = u_of_q(&q, &cfg.flow)?.sub(&q);
    let v_dev = v_norm(&diff)?;
    let measures: Vec<f64> = cfg
        .s_values
        .iter()
        .map(|&s| report.deviation(s).expect("report covers every allowed weight"))
        .collect();
    let rows = cfg
        .s_values
        .iter()
        .zip(&measures)
        .map(|(&s, &deviation)| ScanRow {
            epsilon: eps,
            t: 0.0,
            s,
            deviation,
            bracket_t: 1.0,
            v_deviation: v_dev,
        })
        .collect();
    Ok(PointResult {
        rows,
        measures,
        summary: PointSummary {
            epsilon: eps,
            lattice_n: spec.lattice.radius(),
            membership_after: Some(report.membership_after),
            ..Default::default()
        },
    })
}

/// Integrator steps per difference step; keeps the integrator error well
/// below the O(h²) truncation error being measured.
const DIFFERENCE_SUBSTEPS: f64 = 8.0;

/// `E(q₀)` by central differences of the interaction-picture variable
/// `p(t) = e^{-in³t} q(t)`, `q(t) = q(u(t))`, `u(0) = u(q₀)`.
pub fn error_field(
    u0: &SpectralSequence,
    step: f64,
    solver: &SolverConfig,
    flow: &crate::flows::FlowConfig,
) -> Result<SpectralSequence> {
    let plus = q_of_u(&propagate(u0, step, solver)?, flow)?;
    let minus = q_of_u(&propagate(u0, -step, solver)?, flow)?;
    Ok(linear_phase(&plus, -step)
        .sub(&linear_phase(&minus, step))
        .scale(0.5 / step))
}

fn error_point(cfg: &ScanConfig, index: usize, eps: f64) -> Result<PointResult> {
    let spec = cfg.data_spec(index, eps)?;
    let q0 = make_data(&spec)?;
    let eps = spec.effective_epsilon();
    let u0 = u_of_q(&q0, &cfg.flow)?;
    let omega = max_phase_velocity(&u0).max(1.0);
    let step = cfg.difference_phase / omega;
    let solver = SolverConfig {
        dt: cfg.solver.dt.min(step / DIFFERENCE_SUBSTEPS),
        t_final: 0.0,
        lattice: spec.lattice,
        record_every: 1,
        ..cfg.solver
    };
    let e1 = error_field(&u0, step, &solver, &cfg.flow)?;
    let e2 = error_field(&u0, 0.5 * step, &solver, &cfg.flow)?;
    let e4 = error_field(&u0, 0.25 * step, &solver, &cfg.flow)?;
    let coarse = e1.sub(&e2).norm(NormSpec::l2(0.0));
    let fine = e2.sub(&e4).norm(NormSpec::l2(0.0));
    let v_dev = v_norm(&e1)?;
    let measures: Vec<f64> = cfg.s_values.iter().map(|&s| e1.norm(NormSpec::l2(s))).collect();
    let rows = cfg
        .s_values
        .iter()
        .zip(&measures)
        .map(|(&s, &deviation)| ScanRow {
            epsilon: eps,
            t: 0.0,
            s,
            deviation,
            bracket_t: 1.0,
            v_deviation: v_dev,
        })
        .collect();
    Ok(PointResult {
        rows,
        measures,
        summary: PointSummary {
            epsilon: eps,
            lattice_n: spec.lattice.radius(),
            difference_step: Some(step),
            consistency_order: Some((coarse / fine).log2()),
            ..Default::default()
        },
    })
}

fn run_scan(cfg: &ScanConfig, kind: ScanKind) -> Result<ScanReport> {
    cfg.validate(kind)?;
    let point = |(i, &eps): (usize, &f64)| -> Result<PointResult> {
        match kind {
            ScanKind::Theorem => theorem_point(cfg, i, eps),
            ScanKind::Transform => transform_point(cfg, i, eps),
            ScanKind::Error => error_point(cfg, i, eps),
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<PointResult>> =
        pool.install(|| cfg.epsilon_grid.par_iter().enumerate().map(point).collect());

    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    let mut measured: Vec<(f64, Vec<f64>)> = Vec::new();
    for (res, &eps) in results.into_iter().zip(&cfg.epsilon_grid) {
        match res {
            Ok(p) => {
                rows.extend(p.rows);
                measured.push((p.summary.epsilon, p.measures));
                points.push(p.summary);
            }
            Err(e @ Error::InvalidConfig(_)) => return Err(e),
            Err(e) => failures.push(PointFailure {
                epsilon: eps,
                divergence: matches!(e, Error::SolverDivergence { .. } | Error::FlowDivergence { .. }),
                message: e.to_string(),
            }),
        }
    }
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.s.total_cmp(&b.s))
            .then(a.t.total_cmp(&b.t))
    });
    points.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));

    let fits: Vec<FitSummary> = cfg
        .s_values
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let pts: Vec<(f64, f64)> = measured.iter().map(|(e, m)| (*e, m[j])).collect();
            uniform_bound(&pts, s, 1.0 - s, cfg)
        })
        .collect();

    let points_ok = points.iter().all(|p| {
        p.monitor_max.is_none_or(|m| m <= MONITOR_LIMIT)
            && p.membership_after.is_none_or(|m| m)
            && p
                .consistency_order
                .is_none_or(|o| o >= CONSISTENCY_ORDER.0 && o <= CONSISTENCY_ORDER.1)
    });
    let passed = failures.is_empty() && points_ok && fits.iter().all(|f| f.passed);
    Ok(ScanReport {
        kind: kind.name().to_string(),
        rows,
        points,
        fits,
        failures,
        passed,
    })
}

/// Checks `X(ε) ≤ C ε^{γ - haircut}` over `points` and fits the log-log slope.
pub fn uniform_bound(points: &[(f64, f64)], s: f64, exponent: f64, cfg: &ScanConfig) -> FitSummary {
    let power = exponent - cfg.haircut;
    let max_ratio = points.iter().map(|&(e, x)| x / e.powf(power)).fold(0.0, f64::max);
    let fit = slope_fit(points).ok();
    let constant_ok = cfg.constant.is_none_or(|c| max_ratio <= c);
    let slope_ok = match (cfg.min_slope, &fit) {
        (None, _) => true,
        (Some(m), Some(f)) => f.slope >= m,
        (Some(_), None) => false,
    };
    FitSummary {
        s,
        exponent,
        haircut: cfg.haircut,
        max_ratio,
        constant: cfg.constant,
        fit,
        min_slope: cfg.min_slope,
        passed: constant_ok && slope_ok && points.len() >= 2,
    }
}

/// Deviation from the Airy flow, `D_s(t) = ‖u(t) - e^{in³t}u(0)‖_{ℓ²_s}`, at
/// `t = ε^{-β}` and at interior records.
pub fn scan_linear_proximity(cfg: &ScanConfig) -> Result<ScanReport> {
    run_scan(cfg, ScanKind::Theorem)
}

/// `‖u(q) - q‖_{ℓ²_s}` over the grid, with membership of `u(q)` in `X_ε^{2ρ}`.
pub fn scan_near_identity(cfg: &ScanConfig) -> Result<ScanReport> {
    run_scan(cfg, ScanKind::Transform)
}

/// `‖E(q)‖_{ℓ²_s}` over the grid, with the central-difference order.
pub fn scan_error_term(cfg: &ScanConfig) -> Result<ScanReport> {
    run_scan(cfg, ScanKind::Error)
}

/// `√(2π)`, the factor between `‖v‖_{L²}` and `‖u‖_{ℓ²_{1/2}}`.
pub fn parseval_factor() -> f64 {
    (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataFamily;
    use crate::experiments::config::DataTemplate;
    use crate::flows::FlowConfig;
    use crate::spectral::ModeLattice;

    fn config(grid: &[f64]) -> ScanConfig {
        ScanConfig {
            epsilon_grid: grid.to_vec(),
            rho: 1.0,
            horizon_exponent: Some(0.25),
            s_values: vec![0.0, 0.5],
            data: DataTemplate {
                family: DataFamily::SinglePair,
                bandwidth: 1,
                seed: 0,
            },
            solver: SolverConfig {
                dt: 1e-3,
                t_final: 1.0,
                lattice: ModeLattice::with_radius(64).unwrap(),
                record_every: 1,
                phase_step: Some(0.5),
            },
            flow: FlowConfig::default(),
            harmonics: Some(2),
            haircut: 0.05,
            constant: None,
            min_slope: None,
            monitor_samples: 4,
            difference_phase: 0.1,
            threads: Some(1),
        }
    }

    #[test]
    fn theorem_scan_rows_and_bridge() {
        let r = scan_linear_proximity(&config(&[0.25, 0.2, 0.125, 0.1])).unwrap();
        assert!(r.failures.is_empty());
        assert!(r.rows.iter().filter(|row| row.t == 0.0).all(|row| row.deviation == 0.0));
        for row in r.rows.iter().filter(|row| row.s == 0.5) {
            assert!((row.v_deviation - parseval_factor() * row.deviation).abs() <= 1e-12 * row.v_deviation.max(1e-300));
        }
        assert_eq!(r.points.len(), 4);
        assert!(r.points.iter().all(|p| p.monitor_max.unwrap() <= MONITOR_LIMIT));
        let csv = r.to_csv();
        assert!(csv.starts_with("epsilon,t,s,deviation,bracket_t,v_deviation\n"));
        assert!(!csv.contains('\r'));
        let back: ScanReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn scaled_down_data_approach_linear_flow() {
        let mut cfg = config(&[0.25, 0.2, 0.125, 0.1]);
        let big = scan_linear_proximity(&cfg).unwrap();
        cfg.rho = 1e-3;
        let small = scan_linear_proximity(&cfg).unwrap();
        let last = |r: &ScanReport| r.rows.iter().filter(|x| x.s == 0.5).map(|x| x.deviation).fold(0.0, f64::max);
        assert!(last(&small) <= 1e-4 * last(&big));
    }

    #[test]
    fn transform_and_error_scans_run() {
        let mut cfg = config(&[0.2, 0.1, 0.05, 0.025]);
        cfg.solver.lattice = ModeLattice::with_radius(80).unwrap();
        let t = scan_near_identity(&cfg).unwrap();
        assert!(t.points.iter().all(|p| p.membership_after == Some(true)));
        assert_eq!(t.rows.len(), 8);
        let e = scan_error_term(&cfg).unwrap();
        assert!(e.failures.is_empty());
        for p in &e.points {
            let o = p.consistency_order.unwrap();
            assert!((CONSISTENCY_ORDER.0..=CONSISTENCY_ORDER.1).contains(&o), "{o}");
        }
    }

    #[test]
    fn uniform_bound_checks_constant_and_slope() {
        let mut cfg = config(&[0.1, 0.05, 0.025, 0.0125]);
        let pts: Vec<(f64, f64)> = cfg.epsilon_grid.iter().map(|&e| (e, 0.5 * e)).collect();
        let f = uniform_bound(&pts, 0.0, 1.0, &cfg);
        assert!(f.passed);
        assert!((f.fit.unwrap().slope - 1.0).abs() < 1e-12);
        assert!((f.max_ratio - 0.5 * 0.1f64.powf(0.05)).abs() < 1e-12);
        cfg.constant = Some(0.1);
        assert!(!uniform_bound(&pts, 0.0, 1.0, &cfg).passed);
        cfg.constant = None;
        cfg.min_slope = Some(1.5);
        assert!(!uniform_bound(&pts, 0.0, 1.0, &cfg).passed);
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.04, 1.0, 0.0, 3.7e-12, 123456.5, 1e20, -2.5e-7] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.005), "0.005");
    }
}
