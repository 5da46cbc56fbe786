//! Balanced growth paths of the knowledge-diffusion mean-field game.
//!
//! A BGP couples a traveling wave w of the nonlocal KPP equation with the
//! value slope z and the policy σ through
//!
//! ```text
//! κ² w″ + c w′ + w ∫_{-∞}^x α(σ)(−w′) = 0,
//! −κ² z″ + (c − 2κ²) z′ + (ρ − κ²) z + α(σ) w z = 1 − σ,
//! σ(x) = argmax_s { (1−s)e^x + α(s) ∫_x^∞ z e^y w dy },
//! ```
//!
//! solved by damped fixed-point iteration on σ. The critical branch selects
//! the speed through the lower-envelope normalization G(c) = 1/2 and pins the
//! wave by I = c²/4; the supercritical branch takes the speed as given and
//! pins the wave by a two-point normalization w(x₀) = ℓ₀.

mod bgp;
mod policy;
mod speed;
mod zsolve;

pub use bgp::{bgp_critical, bgp_supercritical, reconstruct_bgp, BgpDiagnostics, Reconstruction};
pub use policy::policy_from_value;
pub use speed::{select_speed, speed_normalization};
pub use zsolve::{solve_z, solve_z_with_bc};

use crate::alpha::{AlphaError, LearningTech};
use crate::grid::GridError;
use crate::kpp::{Kernel, KppError, WaveSolution};
use crate::profile::{Profile, ProfileError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MfgError {
    #[error("infeasible parameters: {0}")]
    Feasibility(String),
    #[error("fixed point did not converge within {iterations} iterations (last residual {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("speed normalization not bracketed: G({c_lo}) = {g_lo}, G({c_hi}) = {g_hi}")]
    Bracket {
        c_lo: f64,
        g_lo: f64,
        c_hi: f64,
        g_hi: f64,
    },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Kpp(#[from] KppError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Structural model parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Diffusion coefficient κ > 0.
    pub kappa: f64,
    /// Discount rate ρ.
    pub rho: f64,
    pub tech: LearningTech,
}

impl ModelParams {
    pub fn new(kappa: f64, rho: f64, tech: LearningTech) -> Result<Self, MfgError> {
        if !(kappa > 0.0) {
            return Err(MfgError::Feasibility(format!("kappa must be positive, got {kappa}")));
        }
        if !rho.is_finite() {
            return Err(MfgError::Feasibility(format!("rho must be finite, got {rho}")));
        }
        Ok(Self { kappa, rho, tech })
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa * self.kappa
    }

    /// Plateau of the value slope, 1/(ρ − κ²).
    pub fn z_plateau(&self) -> f64 {
        1.0 / (self.rho - self.kappa_sq())
    }

    /// Upper end of the critical speed window, 2κ√α(1).
    pub fn critical_speed_cap(&self) -> f64 {
        2.0 * self.kappa * self.tech.alpha1().sqrt()
    }
}

/// Which regularization the truncated policy integral uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChiCutoff {
    /// χ_n(y) = min{1, e^{−2(y−n)}}: damps the integrand beyond the domain.
    ExpCutoff,
    /// Adds 1/n to the integral and truncates it at n.
    Additive,
}

/// Domain half-width and cutoff choice of the truncated system.
#[derive(Debug, Clone, Copy)]
pub struct TruncationScheme {
    pub n: f64,
    pub chi: ChiCutoff,
}

impl TruncationScheme {
    pub fn new(n: f64, chi: ChiCutoff) -> Result<Self, MfgError> {
        if !(n >= 4.0) {
            return Err(MfgError::Feasibility(format!("truncation n must be >= 4, got {n}")));
        }
        Ok(Self { n, chi })
    }
}

/// The policy σ with its induced kernel A = α∘σ and saturation threshold.
#[derive(Debug, Clone)]
pub struct PolicySolution {
    /// Values in (0,1], nonincreasing, ≡ 1 left of `x0`.
    pub sigma: Profile,
    /// A = α∘σ on the same grid.
    pub kernel: Kernel,
    /// Largest grid node where the saturation inequality still holds.
    pub x0: f64,
}

/// A balanced growth path: growth rate, wave, value slope, policy and the
/// reconstructed value-function data.
#[derive(Debug, Clone)]
pub struct BgpSolution {
    /// Growth rate (physical units).
    pub c: f64,
    /// Wave of the diffusion-normalized problem (speed and I divided by κ²;
    /// the profile itself is shared with the physical problem).
    pub wave: WaveSolution,
    pub z: Profile,
    pub policy: PolicySolution,
    /// K = α(1)/(ρ−c)·∫ e^y z w dy.
    pub k_const: f64,
    /// ν(r) = ∫_{−∞}^r z e^y dy + K.
    pub nu: Profile,
    /// Pareto tail index 2κ²/c of the productivity distribution.
    pub tail_inequality: f64,
    pub diagnostics: BgpDiagnostics,
}

/// Feasibility classification of a growth rate against the theorem windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// c ≤ 2κ².
    SlowGrowthInfeasible,
    /// c ≥ α(1) + κ².
    FastGrowthInfeasible,
    /// c ≥ ρ.
    DiscountInfeasible,
    /// 2κ² < c < 2κ√α(1) (and c < ρ).
    CriticalWindow,
    /// 2κ√α(1) ≤ c < α(1) + κ² (and c < ρ).
    SupercriticalWindow,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::SlowGrowthInfeasible => "SlowGrowthInfeasible",
            Classification::FastGrowthInfeasible => "FastGrowthInfeasible",
            Classification::DiscountInfeasible => "DiscountInfeasible",
            Classification::CriticalWindow => "CriticalWindow",
            Classification::SupercriticalWindow => "SupercriticalWindow",
        };
        write!(f, "{s}")
    }
}

/// Classify a growth rate c against the necessary windows
/// 2κ² < c < α(1) + κ² and c < ρ. Speed-window violations take precedence
/// over the discount bound.
pub fn feasibility(params: &ModelParams, c: f64) -> Classification {
    let k2 = params.kappa_sq();
    let a1 = params.tech.alpha1();
    if c <= 2.0 * k2 {
        return Classification::SlowGrowthInfeasible;
    }
    if c >= a1 + k2 {
        return Classification::FastGrowthInfeasible;
    }
    if c >= params.rho {
        return Classification::DiscountInfeasible;
    }
    if c < params.critical_speed_cap() {
        Classification::CriticalWindow
    } else {
        Classification::SupercriticalWindow
    }
}
