//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any of them fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kdv_core::data::{make_data, DataFamily, DataSpec};
use kdv_core::experiments::{
    check_identities, parseval_factor, scan_error_term, scan_linear_proximity, scan_near_identity, DataTemplate,
    ScanConfig, ScanReport, CONSISTENCY_ORDER, GRADIENT_TOL, IDENTITY_II_TOL, IDENTITY_I_TOL, MONITOR_LIMIT,
};
use kdv_core::flows::FlowConfig;
use kdv_core::solver::{evolve, soliton_zero_mean, Diagnostics, SolverConfig};
use kdv_core::spectral::{weighted_from_physical, ModeLattice, NormSpec, SpectralSequence};

/// Constants of the uniform bounds, fixed before the scans are run.
const TRANSFORM_C: f64 = 0.1;
const ERROR_C: f64 = 2.0;
const THEOREM_C: f64 = 1.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join("/")
}

fn lattice(n: usize) -> ModeLattice {
    ModeLattice::with_radius(n).unwrap()
}

fn rel_l2(a: &SpectralSequence, b: &SpectralSequence) -> f64 {
    a.sub(b).norm(NormSpec::l2(0.0)) / b.norm(NormSpec::l2(0.0))
}

fn identities() -> Outcome {
    let r = check_identities(8, 50, 1).unwrap();
    let passed = r.triples.failures == 0
        && r.quadruples.failures == 0
        && r.identity_i_max <= IDENTITY_I_TOL
        && r.identity_ii_max <= IDENTITY_II_TOL;
    outcome(
        passed,
        format!(
            "triples {}/{} exact, quadruples {}/{} exact, I {:.2e}, II {:.2e}",
            r.triples.checked - r.triples.failures,
            r.triples.checked,
            r.quadruples.checked - r.quadruples.failures,
            r.quadruples.checked,
            r.identity_i_max,
            r.identity_ii_max
        ),
    )
}

fn gradients() -> Outcome {
    let r = check_identities(8, 1, 2).unwrap();
    let passed = r
        .gradients
        .iter()
        .all(|g| g.points == 20 && g.max_relative_error <= GRADIENT_TOL);
    let detail = r
        .gradients
        .iter()
        .map(|g| format!("{} {:.1e}", g.kind, g.max_relative_error))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(passed, detail)
}

fn band_data(n: usize) -> SpectralSequence {
    make_data(&DataSpec::new(DataFamily::DeterministicBand, 0.1, 1.0, lattice(n))).unwrap()
}

fn final_state(u0: &SpectralSequence, dt: f64, t: f64) -> SpectralSequence {
    let mut cfg = SolverConfig::new(dt, t, u0.lattice());
    cfg.record_every = usize::MAX;
    evolve(u0, &cfg).unwrap().last().u.clone()
}

fn solver() -> Outcome {
    let l = lattice(256);
    let u0 = weighted_from_physical(&soliton_zero_mean(4.0, 0.0, 0.0, l).unwrap());
    let exact = weighted_from_physical(&soliton_zero_mean(4.0, 0.05, 0.0, l).unwrap());
    let soliton_err = final_state(&u0, 2e-5, 0.05).sub(&exact).norm(NormSpec::l2(0.5)) / exact.norm(NormSpec::l2(0.5));

    let u0 = band_data(256);
    let reference = final_state(&u0, 1.25e-6, 0.1);
    let coarse = rel_l2(&final_state(&u0, 2e-5, 0.1), &reference);
    let fine = rel_l2(&final_state(&u0, 1e-5, 0.1), &reference);
    let ratio = coarse / fine;

    let mut cfg = SolverConfig::new(4e-6, 1.0, l);
    cfg.record_every = 25_000;
    let d = evolve(&u0, &cfg).unwrap().diagnostics;
    let (k, h) = (Diagnostics::relative_drift(&d.k), Diagnostics::relative_drift(&d.h));
    let p = d.p.iter().fold(0.0f64, |m, p| m.max(p.abs()));

    let passed = soliton_err <= 1e-3 && (12.0..=20.0).contains(&ratio) && k <= 1e-8 && h <= 1e-8 && p <= 1e-12;
    outcome(
        passed,
        format!("soliton {soliton_err:.2e}, convergence ratio {ratio:.2}, K drift {k:.2e}, H drift {h:.2e}, |P| {p:.1e}"),
    )
}

fn scan_config(grid: &[f64], s_values: &[f64], lattice_n: usize) -> ScanConfig {
    ScanConfig {
        epsilon_grid: grid.to_vec(),
        rho: 1.0,
        horizon_exponent: None,
        s_values: s_values.to_vec(),
        data: DataTemplate {
            family: DataFamily::SinglePair,
            bandwidth: 1,
            seed: 0,
        },
        solver: SolverConfig::new(1e-3, 1.0, lattice(lattice_n)),
        flow: FlowConfig::default(),
        harmonics: Some(2),
        haircut: 0.05,
        constant: None,
        min_slope: None,
        monitor_samples: 8,
        difference_phase: 0.1,
        threads: Some(1),
    }
}

/// Largest `X / ε^p` for weight `s` over the rows of `report`.
fn max_ratio(report: &ScanReport, s: f64, p: f64) -> f64 {
    report
        .rows
        .iter()
        .filter(|r| r.s == s)
        .map(|r| r.deviation / r.epsilon.powf(p))
        .fold(0.0, f64::max)
}

const SMALL_GRID: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

fn transform() -> Outcome {
    let mut cfg = scan_config(&SMALL_GRID, &[0.0, 0.5, 1.0], 160);
    cfg.constant = Some(TRANSFORM_C);
    let r = scan_near_identity(&cfg).unwrap();
    let members = r.points.iter().all(|p| p.membership_after == Some(true));
    let ratios: Vec<f64> = [0.0, 0.5, 1.0].iter().map(|&s| max_ratio(&r, s, 1.0 - s - 0.05)).collect();
    let passed = r.passed && members && r.failures.is_empty() && ratios.iter().all(|&c| c <= TRANSFORM_C);
    outcome(
        passed,
        format!("max ratios {} vs C = {TRANSFORM_C}, membership after transform {members}", sci(&ratios)),
    )
}

fn error_term() -> Outcome {
    let cfg = scan_config(&SMALL_GRID, &[0.0, 0.5], 160);
    let r = scan_error_term(&cfg).unwrap();
    let ratios = [max_ratio(&r, 0.0, 0.9), max_ratio(&r, 0.5, 0.45)];
    let orders: Vec<f64> = r.points.iter().map(|p| p.consistency_order.unwrap()).collect();
    let consistent = orders
        .iter()
        .all(|o| (CONSISTENCY_ORDER.0..=CONSISTENCY_ORDER.1).contains(o));
    let passed = r.failures.is_empty() && consistent && ratios.iter().all(|&c| c <= ERROR_C);
    outcome(
        passed,
        format!("max ratios {} vs C = {ERROR_C}, consistency orders {orders:.3?}", sci(&ratios)),
    )
}

fn theorem_config(threads: usize) -> ScanConfig {
    let mut cfg = scan_config(&[0.04, 0.02, 0.01, 0.005], &[0.0, 0.5], 512);
    cfg.horizon_exponent = Some(0.25);
    cfg.solver.phase_step = Some(0.5);
    cfg.min_slope = Some(0.4);
    cfg.threads = Some(threads);
    cfg
}

fn theorem(report: &ScanReport) -> Outcome {
    let ratio = report
        .rows
        .iter()
        .filter(|r| r.s == 0.5 && r.t > 0.0)
        .map(|r| r.deviation / r.bracket_t / r.epsilon.powf(0.45))
        .fold(0.0, f64::max);
    let slope = report.fit(0.5).and_then(|f| f.fit.as_ref()).map_or(f64::NAN, |f| f.slope);
    let bridge = report
        .rows
        .iter()
        .filter(|r| r.s == 0.5)
        .map(|r| (r.v_deviation - parseval_factor() * r.deviation).abs() / r.v_deviation.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let monitor = report.points.iter().map(|p| p.monitor_max.unwrap()).fold(0.0, f64::max);
    let passed = report.failures.is_empty()
        && ratio <= THEOREM_C
        && slope >= 0.4
        && bridge <= 1e-12
        && monitor <= MONITOR_LIMIT;
    outcome(
        passed,
        format!(
            "max ratio {ratio:.3e} vs C = {THEOREM_C}, slope {slope:.3}, bridge {bridge:.1e}, monitor {monitor:.4} of {MONITOR_LIMIT}"
        ),
    )
}

fn reproducibility(first: &ScanReport) -> Outcome {
    let second = scan_linear_proximity(&theorem_config(4)).unwrap();
    let (a, b) = (first.to_csv(), second.to_csv());
    outcome(a == b, format!("{} CSV bytes, threads 1 vs 4 identical: {}", a.len(), a == b))
}

fn report(index: usize, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let passed = out.passed && elapsed <= budget;
    println!(
        "criterion {index} ({name}): {} [{:.1}s of {}s] {}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs(),
        out.detail
    );
    passed
}

fn main() -> ExitCode {
    let mins = |m: u64| Duration::from_secs(60 * m);
    let mut ok = true;
    ok &= report(1, "identities", Duration::from_secs(30), identities);
    ok &= report(2, "gradients", Duration::from_secs(60), gradients);
    ok &= report(3, "solver", mins(5), solver);
    ok &= report(4, "near-identity scaling", mins(5), transform);
    ok &= report(5, "error-term scaling", mins(15), error_term);
    let mut theorem_run = None;
    ok &= report(6, "linear proximity", mins(30), || {
        let r = scan_linear_proximity(&theorem_config(1)).unwrap();
        let out = theorem(&r);
        theorem_run = Some(r);
        out
    });
    let first = theorem_run.expect("theorem scan ran");
    ok &= report(7, "reproducibility", mins(30), || reproducibility(&first));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
