//! Scans over ε, identity checks, fits and report emission.

mod config;
mod fit;
mod identities;
mod scans;
mod simulate;

pub use config::{DataTemplate, ScanConfig, ScanKind};
pub use fit::{fit_csv_columns, slope_fit, SlopeFit};
pub use identities::{
    check_identities, check_quadruples, check_triples, gradient_check, identity_i_residual, identity_ii_residual,
    random_state, FactorizationCheck, GradientRow, IdentityReport, FACTOR_BOUND, GRADIENT_TOL, IDENTITY_II_TOL,
    IDENTITY_I_TOL, MAX_IDENTITY_N,
};
pub use scans::{
    error_field, format_float, parseval_factor, scan_error_term, scan_linear_proximity, scan_near_identity,
    uniform_bound, FitSummary, PointFailure, PointSummary, ScanReport, ScanRow, CONSISTENCY_ORDER, MONITOR_LIMIT,
};
pub use simulate::{simulate, InitialData, SimulateConfig, SimulationReport};
