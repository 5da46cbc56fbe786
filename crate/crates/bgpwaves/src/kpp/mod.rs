//! Traveling waves of the forced-speed nonlocal KPP equation
//!
//! ```text
//! w'' + c w' + w ∫_{-∞}^x A(y)(−w'(y)) dy = 0,    w(−∞)=1, w(+∞)=0, w' < 0,
//! ```
//!
//! for a bounded nonincreasing kernel A with Ā = A(−∞) ≥ A(+∞) = ulA ≥ 0.
//! Waves exist exactly for c > 2√ulA; for 2√ulA < c < 2√Ā the family is the
//! ordered foliation above the unique critical wave, which satisfies
//! I(w) = ∫A(−w′) = c²/4 and decays like x·e^{−cx/2}.
//!
//! The diffusion coefficient is normalized to 1 here; callers with κ ≠ 1
//! rescale c and A by 1/κ².

mod diag;
mod family;
mod shoot;

pub use diag::{decay_diagnostics, residual, DecayReport};
pub use family::{wave_family, FamilyEntry, FamilyResult};
pub(crate) use shoot::{critical_wave_sampled, truncated_wave_sampled};
pub use shoot::{critical_wave, shoot, solve_wave, truncated_wave};

use crate::grid::GridError;
use crate::profile::{Profile, ProfileError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KppError {
    #[error("no wave exists at speed c={c}: required c > {threshold}")]
    NoWave { c: f64, threshold: f64 },
    #[error("no wave at height {theta}: minimal admissible height is about {theta_c}")]
    NoWaveAtHeight { theta: f64, theta_c: f64 },
    #[error("speed c={c} outside the critical range ({lo}, {hi})")]
    Range { c: f64, lo: f64, hi: f64 },
    #[error("criticality identity missed: |I - c^2/4| = {gap:e} exceeds tolerance {tol:e}")]
    Tolerance { gap: f64, tol: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Nonincreasing meeting-rate kernel A with its limits Ā and ulA.
#[derive(Debug, Clone)]
pub struct Kernel {
    profile: Profile,
    abar: f64,
    aunderbar: f64,
}

impl Kernel {
    pub fn new(profile: Profile, abar: f64, aunderbar: f64) -> Result<Self, KppError> {
        if !(aunderbar >= 0.0 && abar >= aunderbar) {
            return Err(KppError::Config(format!(
                "kernel limits must satisfy Abar >= ulA >= 0, got {abar}, {aunderbar}"
            )));
        }
        let vals = profile.values();
        if vals.windows(2).any(|w| w[1] > w[0] + 1e-12 * abar.max(1.0)) {
            return Err(KppError::Config("kernel samples must be nonincreasing".into()));
        }
        if vals[0] > abar + 1e-9 * abar.max(1.0) || *vals.last().unwrap() < aunderbar - 1e-9 {
            return Err(KppError::Config("kernel samples must stay inside [ulA, Abar]".into()));
        }
        Ok(Self {
            profile,
            abar,
            aunderbar,
        })
    }

    /// Constant kernel A ≡ value (the classical KPP reduction).
    pub fn constant(grid: crate::grid::Grid, value: f64) -> Result<Self, KppError> {
        let profile = Profile::constant(grid, value)?;
        Kernel::new(profile, value, value)
    }

    /// Sample a closure; tails come from the stated limits (flat left
    /// extension toward Ā, fitted exponential approach when ulA = 0,
    /// constant extension otherwise).
    pub fn from_fn(
        grid: crate::grid::Grid,
        f: impl Fn(f64) -> f64,
        abar: f64,
        aunderbar: f64,
        fit_window: usize,
    ) -> Result<Self, KppError> {
        use crate::profile::{LeftTail, RightTail};
        let values: Vec<f64> = grid.nodes().iter().map(|&x| f(x)).collect();
        let v0 = values[0];
        let left = LeftTail::matching(abar, 1.0, v0);
        let prof = Profile::new(grid, values, left, RightTail::flat())?;
        let right = if aunderbar == 0.0 {
            match crate::profile::fit_right_tail(&prof, fit_window) {
                Ok(fit) if fit.rate > 1e-8 => RightTail::decay(fit.rate),
                _ => RightTail::flat(),
            }
        } else {
            RightTail::flat()
        };
        let left = {
            // Fit the left approach rate toward Ā when the kernel is not flat there.
            let gap = abar - v0;
            if gap > 1e-14 * abar.max(1.0) {
                crate::profile::fit_left_tail(&prof, fit_window, abar)?
            } else {
                LeftTail::flat(v0)
            }
        };
        let profile = Profile::new(
            prof.grid().clone(),
            prof.values().to_vec(),
            left,
            right,
        )?;
        Kernel::new(profile, abar, aunderbar)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn abar(&self) -> f64 {
        self.abar
    }

    pub fn aunderbar(&self) -> f64 {
        self.aunderbar
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.profile.deriv(x)
    }

    /// Kernel with all values multiplied by `factor` (the 1/κ² rescaling).
    pub fn scaled(&self, factor: f64) -> Kernel {
        use crate::profile::{LeftTail, RightTail};
        let vals: Vec<f64> = self.profile.values().iter().map(|v| v * factor).collect();
        let tans: Vec<f64> = self.profile.tangents().iter().map(|t| t * factor).collect();
        let lt = self.profile.left_tail();
        let left = LeftTail {
            limit: lt.limit * factor,
            amplitude: lt.amplitude * factor,
            rate: lt.rate,
        };
        let rt = self.profile.right_tail();
        let right = RightTail {
            rate: rt.rate,
            poly_degree: rt.poly_degree,
        };
        let profile = Profile::with_tangents(self.profile.grid().clone(), vals, tans, left, right)
            .expect("scaling preserves validity");
        Kernel {
            profile,
            abar: self.abar * factor,
            aunderbar: self.aunderbar * factor,
        }
    }

    /// Speed below which no wave exists.
    pub fn min_speed(&self) -> f64 {
        2.0 * self.aunderbar.sqrt()
    }

    /// Speed at which the critical range closes.
    pub fn max_critical_speed(&self) -> f64 {
        2.0 * self.abar.sqrt()
    }
}

/// State of the localized first-order shooting system: w, u = w′ and the
/// cumulated nonlocal term J = ∫_{−∞}^x A(−w′).
#[derive(Debug, Clone, Copy)]
pub struct ShootState {
    pub w: f64,
    pub u: f64,
    pub j: f64,
}

/// Classified outcome of a forward shot.
#[derive(Debug)]
pub enum ShootOutcome {
    Decayed(Box<WaveSolution>),
    CrossedZero { x: f64 },
    TurnedUp { x: f64 },
    Diverged,
}

/// A computed traveling wave.
#[derive(Debug, Clone)]
pub struct WaveSolution {
    /// Monotone-decreasing profile of w.
    pub w: Profile,
    pub c: f64,
    /// Height at the origin, θ = w(0).
    pub theta: f64,
    /// I(w) = ∫ A(−w′), completed with the analytic tail pieces.
    pub i_value: f64,
    /// Fitted right decay rate.
    pub lambda: f64,
    pub critical: bool,
    /// Max normalized defect of the integrated wave equation on the grid.
    pub residual: f64,
    /// Left-tail amplitude the shot was launched with.
    pub eps: f64,
}

impl WaveSolution {
    /// Decay rate implied by the identity λ = c/2 − √(c²/4 − I).
    pub fn lambda_from_identity(&self) -> f64 {
        let disc = (self.c * self.c / 4.0 - self.i_value).max(0.0);
        self.c / 2.0 - disc.sqrt()
    }
}
