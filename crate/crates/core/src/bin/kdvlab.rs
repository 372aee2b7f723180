use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kdv_core::experiments::{
    check_identities, fit_csv_columns, scan_error_term, scan_linear_proximity, scan_near_identity, simulate,
    ScanConfig, ScanReport, SimulateConfig,
};
use kdv_core::Error;

#[derive(Parser)]
#[command(name = "kdvlab", version, about = "Normal-form and near-linear scaling experiments for periodic KdV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Homological identities, integer factorizations and gradient checks.
    CheckIdentities {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Integrate one initial condition and print its conserved quantities.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Distance of the flow from the linear flow at t = ε^{-β}.
    ScanTheorem(ScanArgs),
    /// Size of the near-identity transformation.
    ScanTransform(ScanArgs),
    /// Size of the error term in the transformed equation.
    ScanError(ScanArgs),
    /// Log-log slope of one CSV column against another.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x_col: String,
        #[arg(long)]
        y_col: String,
    },
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Overrides `threads` from the config.
    #[arg(long)]
    threads: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RESIDUAL: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::SolverDivergence { .. } | Error::FlowDivergence { .. } => EXIT_DIVERGENCE,
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
    }
}

fn read_config(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_scan(args: &ScanArgs, scan: fn(&ScanConfig) -> kdv_core::Result<ScanReport>) -> Result<u8, Error> {
    let mut cfg = ScanConfig::from_json(&read_config(&args.config)?)?;
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let report = scan(&cfg)?;
    emit(&report.to_csv(), args.output.as_deref())?;
    if let Some(p) = &args.json {
        fs::write(p, report.to_json())?;
    }
    for fit in &report.fits {
        let slope = fit.fit.as_ref().map_or(f64::NAN, |f| f.slope);
        eprintln!(
            "s={} slope={slope:.3} max_ratio={:.4e} passed={}",
            fit.s, fit.max_ratio, fit.passed
        );
    }
    for f in &report.failures {
        eprintln!("epsilon={} failed: {}", f.epsilon, f.message);
    }
    Ok(if report.has_divergence() {
        EXIT_DIVERGENCE
    } else if report.passed {
        0
    } else {
        EXIT_RESIDUAL
    })
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::CheckIdentities { n, trials, seed } => {
            let report = check_identities(n, trials, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed { 0 } else { EXIT_RESIDUAL })
        }
        Command::Simulate { config, output } => {
            let cfg = SimulateConfig::from_json(&read_config(&config)?)?;
            let report = simulate(&cfg)?;
            emit(&report.to_csv(), output.as_deref())?;
            eprintln!(
                "steps={} dt={:e} k_drift={:e} h_drift={:e}",
                report.steps, report.dt, report.k_drift, report.h_drift
            );
            Ok(0)
        }
        Command::ScanTheorem(args) => run_scan(&args, scan_linear_proximity),
        Command::ScanTransform(args) => run_scan(&args, scan_near_identity),
        Command::ScanError(args) => run_scan(&args, scan_error_term),
        Command::Fit { input, x_col, y_col } => {
            let file = fs::File::open(&input)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", input.display())))?;
            let fit = fit_csv_columns(file, &x_col, &y_col)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
