//! Learning technology α(s): the concave meeting-rate function and its calculus.
//!
//! The solver needs α, α′, and the inverse of α′ (the policy argmax reduces to
//! σ = (α′)⁻¹ of a price ratio, saturated at 1). Two families are supported:
//! the power law α(s) = a0·s^η with η ∈ (0,1), and a tabulated technology
//! interpolated monotonically from samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlphaError {
    #[error("argument {arg}={value} outside its domain ({constraint})")]
    Domain {
        arg: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("invalid technology: {0}")]
    Invalid(String),
}

/// Which functional family the technology belongs to.
#[derive(Debug, Clone)]
pub enum TechFamily {
    /// α(s) = a0·s^eta with a0 > 0 and eta ∈ (0,1).
    Power { a0: f64, eta: f64 },
    /// Monotone concave samples (s, α(s)) on [0,1], interpolated with a
    /// monotone cubic; α′ near 0 extrapolated by a power-law fit so that
    /// α′(0⁺) = +∞ is honored.
    Tabulated(TabulatedTech),
}

#[derive(Debug, Clone)]
pub struct TabulatedTech {
    s: Vec<f64>,
    a: Vec<f64>,
    /// Hermite tangents of the monotone interpolant.
    t: Vec<f64>,
    /// Power-law fit α ≈ c0·s^e0 used left of the first positive node.
    c0: f64,
    e0: f64,
}

/// The learning technology α together with its cached value at s = 1.
#[derive(Debug, Clone)]
pub struct LearningTech {
    family: TechFamily,
    alpha1: f64,
}

/// Named hypothesis checks produced by [`LearningTech::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// α continuous, increasing, strictly concave.
    pub alpha_concave_increasing: bool,
    /// α(0) = 0.
    pub alpha_zero_at_zero: bool,
    /// α(1) > κ².
    pub alpha_one_above_kappa_sq: bool,
    /// α′(s) → +∞ as s → 0⁺.
    pub deriv_unbounded_at_zero: bool,
    /// α′(1) > 0.
    pub deriv_positive_at_one: bool,
    /// ρ > κ².
    pub discount_above_kappa_sq: bool,
    /// ρ ≥ 2κ√α(1), needed for the critical balanced growth path.
    pub discount_covers_critical_speed: bool,
    /// Near-linear tabulated segments make the policy slope equation stiff;
    /// flagged here rather than rejected.
    pub stiff_segments: bool,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.alpha_concave_increasing
            && self.alpha_zero_at_zero
            && self.alpha_one_above_kappa_sq
            && self.deriv_unbounded_at_zero
            && self.deriv_positive_at_one
            && self.discount_above_kappa_sq
            && self.discount_covers_critical_speed
    }
}

impl LearningTech {
    pub fn power(a0: f64, eta: f64) -> Result<Self, AlphaError> {
        if !(a0 > 0.0) {
            return Err(AlphaError::Invalid(format!("a0 must be positive, got {a0}")));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(AlphaError::Invalid(format!("eta must lie in (0,1), got {eta}")));
        }
        Ok(Self {
            family: TechFamily::Power { a0, eta },
            alpha1: a0,
        })
    }

    /// Build a tabulated technology from (s, α(s)) samples.
    ///
    /// Samples must start at (0,0), be strictly increasing in both columns and
    /// concave. The interpolant is monotone cubic; bisection inverts its
    /// derivative.
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self, AlphaError> {
        if samples.len() < 4 {
            return Err(AlphaError::Invalid("need at least 4 samples".into()));
        }
        let s: Vec<f64> = samples.iter().map(|p| p.0).collect();
        let a: Vec<f64> = samples.iter().map(|p| p.1).collect();
        if s[0] != 0.0 || a[0] != 0.0 {
            return Err(AlphaError::Invalid("table must start at (0,0)".into()));
        }
        if *s.last().unwrap() != 1.0 {
            return Err(AlphaError::Invalid("table must end at s=1".into()));
        }
        for i in 1..s.len() {
            if s[i] <= s[i - 1] || a[i] <= a[i - 1] {
                return Err(AlphaError::Invalid("samples must be strictly increasing".into()));
            }
        }
        // Secant slopes must decrease for concavity.
        let mut slopes = Vec::with_capacity(s.len() - 1);
        for i in 0..s.len() - 1 {
            slopes.push((a[i + 1] - a[i]) / (s[i + 1] - s[i]));
        }
        for i in 1..slopes.len() {
            if slopes[i] >= slopes[i - 1] {
                return Err(AlphaError::Invalid("samples are not strictly concave".into()));
            }
        }
        // Fritsch-Carlson style tangents: average of adjacent secants, clamped
        // into the monotone region. Concave monotone data keeps them positive.
        let n = s.len();
        let mut t = vec![0.0; n];
        t[0] = slopes[0] + (slopes[0] - slopes[1]) * 0.5;
        t[n - 1] = slopes[n - 2] - (slopes[n - 3] - slopes[n - 2]) * 0.5;
        for i in 1..n - 1 {
            t[i] = 0.5 * (slopes[i - 1] + slopes[i]);
        }
        for i in 0..n - 1 {
            let d = slopes[i];
            t[i] = t[i].clamp(0.0, 3.0 * d);
            t[i + 1] = t[i + 1].clamp(0.0, 3.0 * d);
        }
        // Power-law fit through the first two positive nodes; this keeps
        // α′(s) → ∞ as s → 0⁺ for exponents < 1.
        let e0 = (a[2] / a[1]).ln() / (s[2] / s[1]).ln();
        let c0 = a[1] / s[1].powf(e0);
        let alpha1 = *a.last().unwrap();
        Ok(Self {
            family: TechFamily::Tabulated(TabulatedTech { s, a, t, c0, e0 }),
            alpha1,
        })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn family(&self) -> &TechFamily {
        &self.family
    }

    /// α(s) for s ∈ [0,1].
    pub fn eval(&self, s: f64) -> Result<f64, AlphaError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(AlphaError::Domain {
                arg: "s",
                value: s,
                constraint: "0 <= s <= 1",
            });
        }
        Ok(match &self.family {
            TechFamily::Power { a0, eta } => {
                if s == 0.0 {
                    0.0
                } else {
                    a0 * s.powf(*eta)
                }
            }
            TechFamily::Tabulated(tab) => tab.eval(s),
        })
    }

    /// α′(s) for s ∈ (0,1]. Unbounded at 0, so s = 0 is a domain error.
    pub fn deriv(&self, s: f64) -> Result<f64, AlphaError> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(AlphaError::Domain {
                arg: "s",
                value: s,
                constraint: "0 < s <= 1",
            });
        }
        Ok(match &self.family {
            TechFamily::Power { a0, eta } => a0 * eta * s.powf(eta - 1.0),
            TechFamily::Tabulated(tab) => tab.deriv(s),
        })
    }

    /// Solve α′(s) = p for s, saturating at 1 when p < α′(1).
    pub fn inv_deriv(&self, p: f64) -> Result<f64, AlphaError> {
        if !(p > 0.0) {
            return Err(AlphaError::Domain {
                arg: "p",
                value: p,
                constraint: "p > 0",
            });
        }
        let d1 = self.deriv(1.0).expect("s=1 is in the derivative domain");
        if p <= d1 {
            return Ok(1.0);
        }
        Ok(match &self.family {
            TechFamily::Power { a0, eta } => (p / (a0 * eta)).powf(1.0 / (eta - 1.0)),
            TechFamily::Tabulated(tab) => tab.inv_deriv(p),
        })
    }

    /// Check the standing hypotheses against (κ, ρ) and report each one.
    pub fn validate(&self, kappa: f64, rho: f64) -> ValidationReport {
        let k2 = kappa * kappa;
        let (concave, unbounded, positive_d1, stiff) = match &self.family {
            TechFamily::Power { a0, eta } => {
                (*a0 > 0.0 && *eta > 0.0 && *eta < 1.0, *eta < 1.0, a0 * eta > 0.0, false)
            }
            TechFamily::Tabulated(tab) => {
                // Finite-difference concavity scan of the interpolant.
                let m = 64;
                let mut concave = true;
                let mut increasing = true;
                let mut prev_d = f64::INFINITY;
                for i in 1..=m {
                    let s = i as f64 / m as f64;
                    let d = tab.deriv(s);
                    if d <= 0.0 {
                        increasing = false;
                    }
                    if d >= prev_d {
                        concave = false;
                    }
                    prev_d = d;
                }
                let stiff = tab.min_curvature_scale() < 1e-3;
                (concave && increasing, tab.e0 < 1.0, tab.deriv(1.0) > 0.0, stiff)
            }
        };
        ValidationReport {
            alpha_concave_increasing: concave,
            alpha_zero_at_zero: self.eval(0.0).map(|v| v == 0.0).unwrap_or(false),
            alpha_one_above_kappa_sq: self.alpha1 > k2,
            deriv_unbounded_at_zero: unbounded,
            deriv_positive_at_one: positive_d1,
            discount_above_kappa_sq: rho > k2,
            discount_covers_critical_speed: rho >= 2.0 * kappa * self.alpha1.sqrt(),
            stiff_segments: stiff,
        }
    }
}

impl TabulatedTech {
    fn cell(&self, s: f64) -> usize {
        let n = self.s.len();
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.s[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= self.s[1] {
            return self.c0 * s.powf(self.e0);
        }
        let i = self.cell(s);
        let h = self.s[i + 1] - self.s[i];
        let u = (s - self.s[i]) / h;
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        h00 * self.a[i] + h * h10 * self.t[i] + h01 * self.a[i + 1] + h * h11 * self.t[i + 1]
    }

    fn deriv(&self, s: f64) -> f64 {
        if s <= self.s[1] {
            return self.c0 * self.e0 * s.powf(self.e0 - 1.0);
        }
        let i = self.cell(s);
        let h = self.s[i + 1] - self.s[i];
        let u = (s - self.s[i]) / h;
        let d00 = 6.0 * u * (u - 1.0) / h;
        let d10 = (1.0 - u) * (1.0 - 3.0 * u);
        let d01 = -d00;
        let d11 = u * (3.0 * u - 2.0);
        d00 * self.a[i] + d10 * self.t[i] + d01 * self.a[i + 1] + d11 * self.t[i + 1]
    }

    fn inv_deriv(&self, p: f64) -> f64 {
        // deriv is decreasing; bisect on s.
        let mut lo = 1e-300_f64;
        let mut hi = 1.0_f64;
        // Left of the first node the power-law extrapolation inverts exactly.
        let d1 = self.c0 * self.e0 * self.s[1].powf(self.e0 - 1.0);
        if p >= d1 {
            return (p / (self.c0 * self.e0)).powf(1.0 / (self.e0 - 1.0));
        }
        lo = lo.max(self.s[1]);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.deriv(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Smallest |secant-slope change| relative to the slope scale; a proxy for
    /// α″ ≈ 0 segments.
    fn min_curvature_scale(&self) -> f64 {
        let mut slopes = Vec::with_capacity(self.s.len() - 1);
        for i in 0..self.s.len() - 1 {
            slopes.push((self.a[i + 1] - self.a[i]) / (self.s[i + 1] - self.s[i]));
        }
        let scale = slopes[0].abs().max(1e-300);
        let mut min_rel = f64::INFINITY;
        for i in 1..slopes.len() {
            min_rel = min_rel.min((slopes[i - 1] - slopes[i]).abs() / scale);
        }
        min_rel
    }
}
