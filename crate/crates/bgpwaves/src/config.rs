//! Numerical configuration shared by the wave and balanced-growth-path solvers.

use serde::{Deserialize, Serialize};

/// Domain truncation, grid density, tolerances, damping, iteration caps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Half-width of the truncated domain; the master grid spans [−n, n].
    pub n: f64,
    /// Node count of the master grid.
    pub n_core: usize,
    /// Grid grading ratio (1 = uniform).
    pub stretch: f64,
    /// Fixed-point stop: sup|σ_{k+1} − σ_k|.
    pub fp_tol: f64,
    /// Relative tolerance on the criticality identity I = c²/4.
    pub crit_tol: f64,
    /// Tolerance on the speed normalization G(c) = 1/2.
    pub g_tol: f64,
    /// Error-control tolerance of the shooting integrator.
    pub ode_atol: f64,
    /// Cap on fixed-point iterations (all stages combined).
    pub max_iter: usize,
    /// Initial damping weight of the Picard update.
    pub damping: f64,
    /// Tolerance on hitting a requested wave height w(0) = θ.
    pub value_tol: f64,
    /// Required flatness Ā − A(xL) of the kernel at the left end.
    pub tail_tol: f64,
    /// Height at which a forward trajectory counts as decayed.
    pub right_floor: f64,
    /// Gate on normalized equation residuals.
    pub residual_tol: f64,
    /// Node count of tail-fit windows.
    pub fit_window: usize,
    /// Relative width at which parameter bisections stop.
    pub bisect_rel: f64,
    /// Points in the c′-grid of the lower speed envelope.
    pub c_grid_points: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            n: 20.0,
            n_core: 801,
            stretch: 1.0,
            fp_tol: 2e-4,
            crit_tol: 1e-3,
            g_tol: 1e-4,
            ode_atol: 1e-10,
            max_iter: 200,
            damping: 0.5,
            value_tol: 1e-9,
            tail_tol: 1e-7,
            right_floor: 1e-8,
            residual_tol: 1e-3,
            fit_window: 25,
            bisect_rel: 1e-13,
            c_grid_points: 8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let ok: Result<NumericsConfig, _> = serde_json::from_str(r#"{"n": 12.0, "fp_tol": 1e-3}"#);
        assert!(ok.is_ok());
        let bad: Result<NumericsConfig, _> = serde_json::from_str(r#"{"n": 12.0, "typo_key": 1}"#);
        assert!(bad.is_err());
    }
}
