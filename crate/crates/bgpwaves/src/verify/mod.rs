//! Independent oracles and the property suites used by tests and the CLI
//! `verify` command. Each structural statement the solvers rely on becomes a
//! named report with the measured margin and the worst grid location.

mod checks;
mod oracle;

pub use checks::{check_bgp, check_wave};
pub use oracle::oracle_bvp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("Newton iteration diverged (final residual {residual:e})")]
    NewtonDiverged { residual: f64 },
    #[error("no collocation solution at height {theta}; best achieved {best}")]
    HeightUnreachable { theta: f64, best: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// One verified property: its margin, the bound it was held against, and the
/// grid point where it came closest to failing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    /// Worst grid node (NaN when the check is scalar).
    pub location: f64,
}

impl CheckReport {
    pub fn scalar(name: &str, passed: bool, measured: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            passed,
            measured,
            bound,
            location: f64::NAN,
        }
    }

    pub fn located(name: &str, passed: bool, measured: f64, bound: f64, location: f64) -> Self {
        Self {
            name: name.to_string(),
            passed,
            measured,
            bound,
            location,
        }
    }
}
