//! Weighted quadratures over profiles: composite rules on the grid plus
//! closed-form contributions from the exponential tail descriptors.
//!
//! Weight `One` uses the trapezoid rule on node values, which is robust to the
//! kink that the policy derivative has at the saturation threshold. Weight
//! `ExpY` integrates a cubic Hermite model of the non-exponential factor
//! against e^y exactly per cell; the e^y curvature otherwise dominates the
//! error budget of the speed-normalization and policy integrals.

use crate::profile::{Profile, ProfileError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    One,
    ExpY,
}

#[derive(Debug, Clone, Copy)]
pub enum Integrand<'a> {
    /// p(y)
    Single(&'a Profile),
    /// p(y)·q(y)
    Product(&'a Profile, &'a Profile),
    /// p(y)·(−q′(y))
    TimesNegDeriv(&'a Profile, &'a Profile),
    /// −q′(y)
    NegDeriv(&'a Profile),
}

impl<'a> Integrand<'a> {
    fn profiles(&self) -> Vec<&'a Profile> {
        match self {
            Integrand::Single(p) | Integrand::NegDeriv(p) => vec![p],
            Integrand::Product(p, q) | Integrand::TimesNegDeriv(p, q) => vec![p, q],
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Integrand::Single(p) => p.eval(x),
            Integrand::Product(p, q) => p.eval(x) * q.eval(x),
            Integrand::TimesNegDeriv(p, q) => -p.eval(x) * q.deriv(x),
            Integrand::NegDeriv(q) => -q.deriv(x),
        }
    }

    fn eval_deriv(&self, x: f64) -> f64 {
        match self {
            Integrand::Single(p) => p.deriv(x),
            Integrand::Product(p, q) => p.deriv(x) * q.eval(x) + p.eval(x) * q.deriv(x),
            Integrand::TimesNegDeriv(p, q) => {
                -p.deriv(x) * q.deriv(x) - p.eval(x) * second_deriv(q, x)
            }
            Integrand::NegDeriv(q) => -second_deriv(q, x),
        }
    }
}

fn second_deriv(p: &Profile, x: f64) -> f64 {
    let xl = p.grid().x_left();
    let xr = p.grid().x_right();
    if x < xl {
        let t = p.left_tail();
        return -t.amplitude * t.rate * t.rate * (t.rate * (x - xl)).exp();
    }
    if x > xr {
        let t = p.right_tail();
        let u = x - xr;
        let v = p.value_at_end() * (-t.rate * u).exp();
        return if t.poly_degree == 1 {
            v * (t.rate * t.rate * (1.0 + u) - 2.0 * t.rate)
        } else {
            t.rate * t.rate * v
        };
    }
    let i = p.grid().locate(x);
    let c = p.cell_monomials(i);
    let u = x - p.grid().nodes()[i];
    2.0 * c[2] + 6.0 * c[3] * u
}

/// One poly-exponential term `coef·u^pow·e^{rate·u}` of a tail integrand.
#[derive(Debug, Clone, Copy)]
struct PeTerm {
    coef: f64,
    pow: u8,
    rate: f64,
}

fn pe_product(a: &[PeTerm], b: &[PeTerm]) -> Vec<PeTerm> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for ta in a {
        for tb in b {
            out.push(PeTerm {
                coef: ta.coef * tb.coef,
                pow: ta.pow + tb.pow,
                rate: ta.rate + tb.rate,
            });
        }
    }
    out
}

/// ∫_a^b u^k e^{r·u} du for finite a ≤ b.
fn poly_exp_finite(k: u8, r: f64, a: f64, b: f64) -> f64 {
    if r.abs() < 1e-14 {
        let k1 = k as f64 + 1.0;
        return (b.powf(k1) - a.powf(k1)) / k1;
    }
    let mut j = ((r * b).exp() - (r * a).exp()) / r;
    for kk in 1..=k {
        j = (b.powi(kk as i32) * (r * b).exp() - a.powi(kk as i32) * (r * a).exp() - kk as f64 * j) / r;
    }
    j
}

/// ∫_a^∞ u^k e^{r·u} du, requiring r < 0.
fn poly_exp_to_inf(k: u8, r: f64, a: f64) -> f64 {
    let mut j = -(r * a).exp() / r;
    for kk in 1..=k {
        j = (-a.powi(kk as i32) * (r * a).exp() - kk as f64 * j) / r;
    }
    j
}

/// ∫_{−∞}^b u^k e^{r·u} du, requiring r > 0.
fn poly_exp_from_neg_inf(k: u8, r: f64, b: f64) -> f64 {
    let mut j = (r * b).exp() / r;
    for kk in 1..=k {
        j = (b.powi(kk as i32) * (r * b).exp() - kk as f64 * j) / r;
    }
    j
}

fn integrate_terms(
    terms: &[PeTerm],
    lo: f64,
    hi: f64,
    side: &'static str,
) -> Result<f64, ProfileError> {
    let mut total = 0.0;
    for t in terms {
        if t.coef == 0.0 || t.coef.abs() < 1e-300 {
            continue;
        }
        let v = if hi.is_infinite() {
            if t.rate >= -1e-14 {
                return Err(ProfileError::Divergence(format!(
                    "{side} tail term u^{}·e^({}u) is not integrable to +inf",
                    t.pow, t.rate
                )));
            }
            poly_exp_to_inf(t.pow, t.rate, lo)
        } else if lo.is_infinite() {
            if t.rate <= 1e-14 {
                return Err(ProfileError::Divergence(format!(
                    "{side} tail term u^{}·e^({}u) is not integrable to -inf",
                    t.pow, t.rate
                )));
            }
            poly_exp_from_neg_inf(t.pow, t.rate, hi)
        } else {
            poly_exp_finite(t.pow, t.rate, lo, hi)
        };
        total += t.coef * v;
    }
    Ok(total)
}

/// Right-tail factor of `p` anchored at `x_anchor ≥ p.x_right()`, in u = x − x_anchor.
fn right_factor(p: &Profile, x_anchor: f64) -> Vec<PeTerm> {
    let t = p.right_tail();
    let s0 = x_anchor - p.grid().x_right();
    let base = p.value_at_end() * (-t.rate * s0).exp();
    if t.poly_degree == 1 {
        vec![
            PeTerm { coef: base * (1.0 + s0), pow: 0, rate: -t.rate },
            PeTerm { coef: base, pow: 1, rate: -t.rate },
        ]
    } else {
        vec![PeTerm { coef: base, pow: 0, rate: -t.rate }]
    }
}

/// −q′ in the right tail, anchored at `x_anchor`.
fn right_neg_deriv_factor(q: &Profile, x_anchor: f64) -> Vec<PeTerm> {
    let t = q.right_tail();
    let f = right_factor(q, x_anchor);
    // d/du of (c0 + c1 u)e^{−λu} is (c1 − λc0 − λc1 u)e^{−λu}.
    let c0 = f[0].coef;
    let c1 = if f.len() > 1 { f[1].coef } else { 0.0 };
    vec![
        PeTerm { coef: t.rate * c0 - c1, pow: 0, rate: -t.rate },
        PeTerm { coef: t.rate * c1, pow: 1, rate: -t.rate },
    ]
}

/// Left-tail factor of `p` anchored at `x_anchor ≤ p.x_left()`, in v = x − x_anchor.
fn left_factor(p: &Profile, x_anchor: f64) -> Vec<PeTerm> {
    let t = p.left_tail();
    let amp = t.amplitude * (t.rate * (x_anchor - p.grid().x_left())).exp();
    if t.rate == 0.0 {
        // Constant extension by limit − amplitude.
        vec![PeTerm { coef: t.limit - t.amplitude, pow: 0, rate: 0.0 }]
    } else {
        vec![
            PeTerm { coef: t.limit, pow: 0, rate: 0.0 },
            PeTerm { coef: -amp, pow: 0, rate: t.rate },
        ]
    }
}

fn left_neg_deriv_factor(q: &Profile, x_anchor: f64) -> Vec<PeTerm> {
    let t = q.left_tail();
    let amp = t.amplitude * (t.rate * (x_anchor - q.grid().x_left())).exp();
    vec![PeTerm { coef: amp * t.rate, pow: 0, rate: t.rate }]
}

fn tail_terms(integrand: &Integrand, x_anchor: f64, right: bool) -> Vec<PeTerm> {
    match integrand {
        Integrand::Single(p) => {
            if right { right_factor(p, x_anchor) } else { left_factor(p, x_anchor) }
        }
        Integrand::Product(p, q) => {
            let (a, b) = if right {
                (right_factor(p, x_anchor), right_factor(q, x_anchor))
            } else {
                (left_factor(p, x_anchor), left_factor(q, x_anchor))
            };
            pe_product(&a, &b)
        }
        Integrand::TimesNegDeriv(p, q) => {
            let (a, b) = if right {
                (right_factor(p, x_anchor), right_neg_deriv_factor(q, x_anchor))
            } else {
                (left_factor(p, x_anchor), left_neg_deriv_factor(q, x_anchor))
            };
            pe_product(&a, &b)
        }
        Integrand::NegDeriv(q) => {
            if right {
                right_neg_deriv_factor(q, x_anchor)
            } else {
                left_neg_deriv_factor(q, x_anchor)
            }
        }
    }
}

/// ∫_0^h (a0 + a1 u + a2 u² + a3 u³)·e^{σu} du.
pub fn cubic_exp_moment(c: [f64; 4], h: f64, sigma: f64) -> f64 {
    if sigma.abs() * h < 1e-8 {
        // Expand e^{σu} ≈ 1 + σu to avoid cancellation.
        let base = c[0] * h + c[1] * h * h / 2.0 + c[2] * h.powi(3) / 3.0 + c[3] * h.powi(4) / 4.0;
        let corr = sigma
            * (c[0] * h * h / 2.0 + c[1] * h.powi(3) / 3.0 + c[2] * h.powi(4) / 4.0 + c[3] * h.powi(5) / 5.0);
        return base + corr;
    }
    let eh = (sigma * h).exp();
    let mut m = vec![0.0; 4];
    m[0] = (sigma * h).exp_m1() / sigma;
    for k in 1..4 {
        m[k] = (h.powi(k as i32) * eh - k as f64 * m[k - 1]) / sigma;
    }
    c[0] * m[0] + c[1] * m[1] + c[2] * m[2] + c[3] * m[3]
}

/// ∫_{lower}^{upper} integrand(y)·weight(y) dy with tail closed forms.
///
/// Bounds may be ±infinity; divergent combinations (for instance an e^y weight
/// against a right tail with rate ≤ 1) return [`ProfileError::Divergence`].
pub fn weighted_integral(
    integrand: Integrand,
    weight: Weight,
    lower: f64,
    upper: f64,
) -> Result<f64, ProfileError> {
    if lower >= upper {
        return if lower == upper {
            Ok(0.0)
        } else {
            Err(ProfileError::Invalid(format!("reversed bounds [{lower}, {upper}]")))
        };
    }
    let profiles = integrand.profiles();
    let span_left = profiles.iter().map(|p| p.grid().x_left()).fold(f64::INFINITY, f64::min);
    let span_right = profiles.iter().map(|p| p.grid().x_right()).fold(f64::NEG_INFINITY, f64::max);

    let mut total = 0.0;

    // Left tail segment (−∞ or lower, min(upper, span_left)).
    if lower < span_left {
        let hi_x = upper.min(span_left);
        let mut terms = tail_terms(&integrand, span_left, false);
        if weight == Weight::ExpY {
            for t in &mut terms {
                t.coef *= span_left.exp();
                t.rate += 1.0;
            }
        }
        let lo_v = if lower.is_infinite() { f64::NEG_INFINITY } else { lower - span_left };
        total += integrate_terms(&terms, lo_v, hi_x - span_left, "left")?;
    }

    // Core segment on the union of grids.
    let a = lower.max(span_left);
    let b = upper.min(span_right);
    if a < b {
        let mut xs: Vec<f64> = Vec::new();
        xs.push(a);
        for p in &profiles {
            for &x in p.grid().nodes() {
                if x > a && x < b {
                    xs.push(x);
                }
            }
        }
        xs.push(b);
        xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
        xs.dedup();
        match weight {
            Weight::One => {
                if let Integrand::NegDeriv(q) = integrand {
                    // Fundamental theorem: exact for the interpolant and tails.
                    total += q.eval(a) - q.eval(b);
                } else {
                    let gs: Vec<f64> = xs.iter().map(|&x| integrand.eval(x)).collect();
                    for i in 0..xs.len() - 1 {
                        total += 0.5 * (gs[i] + gs[i + 1]) * (xs[i + 1] - xs[i]);
                    }
                }
            }
            Weight::ExpY => {
                for i in 0..xs.len() - 1 {
                    let h = xs[i + 1] - xs[i];
                    let g0 = integrand.eval(xs[i]);
                    let g1 = integrand.eval(xs[i + 1]);
                    let d0 = integrand.eval_deriv(xs[i]);
                    let d1 = integrand.eval_deriv(xs[i + 1]);
                    let c = crate::profile::hermite_monomials(g0, g1, d0, d1, h);
                    total += xs[i].exp() * cubic_exp_moment(c, h, 1.0);
                }
            }
        }
    }

    // Right tail segment (max(lower, span_right), upper).
    if upper > span_right {
        let lo_x = lower.max(span_right);
        if let (Integrand::NegDeriv(q), Weight::One) = (&integrand, weight) {
            let end = if upper.is_infinite() { 0.0 } else { q.eval(upper) };
            total += q.eval(lo_x) - end;
        } else {
            let mut terms = tail_terms(&integrand, span_right, true);
            if weight == Weight::ExpY {
                for t in &mut terms {
                    t.coef *= span_right.exp();
                    t.rate += 1.0;
                }
            }
            let hi_v = if upper.is_infinite() { f64::INFINITY } else { upper - span_right };
            total += integrate_terms(&terms, lo_x - span_right, hi_v, "right")?;
        }
    }

    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grid};
    use crate::profile::{LeftTail, RightTail};

    fn grid_m10_half() -> Grid {
        make_grid(-10.0, 0.5, 106, 1.0).unwrap()
    }

    #[test]
    fn expy_constant_with_left_tail_is_one() {
        // p ≡ 1 with left limit 1: ∫_{−∞}^0 e^y dy = 1.
        let p = Profile::constant(grid_m10_half(), 1.0).unwrap();
        let v = weighted_integral(Integrand::Single(&p), Weight::ExpY, f64::NEG_INFINITY, 0.0).unwrap();
        assert!((v - 1.0).abs() < 5e-7, "got {v}");
    }

    #[test]
    fn expy_pure_tail_decay() {
        // ∫_0^∞ e^y · e^{−2y} dy = 1, with the mass split between core and tail.
        let g = make_grid(-1.0, 0.5, 31, 1.0).unwrap();
        let p = Profile::from_fn(
            g,
            |x| (-2.0 * x).exp(),
            LeftTail::flat((2.0f64).exp()),
            RightTail::decay(2.0),
        )
        .unwrap();
        let v = weighted_integral(Integrand::Single(&p), Weight::ExpY, 0.0, f64::INFINITY).unwrap();
        assert!((v - 1.0).abs() < 5e-7, "got {v}");
    }

    #[test]
    fn divergence_when_rate_too_small() {
        let g = make_grid(-1.0, 0.5, 31, 1.0).unwrap();
        let p = Profile::from_fn(
            g,
            |x| (-0.5 * x).exp(),
            LeftTail::flat(1.0),
            RightTail::decay(0.5),
        )
        .unwrap();
        let r = weighted_integral(Integrand::Single(&p), Weight::ExpY, 0.0, f64::INFINITY);
        assert!(matches!(r, Err(ProfileError::Divergence(_))));
    }

    fn wave_like() -> (Profile, Profile) {
        // w = 1/(1+e^x) on [−15, 15]; A = 2/(1+e^x).
        let g = make_grid(-15.0, 15.0, 601, 1.0).unwrap();
        let w = Profile::from_fn(
            g.clone(),
            |x| 1.0 / (1.0 + x.exp()),
            LeftTail::matching(1.0, 1.0, 1.0 / (1.0 + (-15.0f64).exp())),
            RightTail::decay(1.0),
        )
        .unwrap();
        let a = Profile::from_fn(
            g,
            |x| 2.0 / (1.0 + x.exp()),
            LeftTail::matching(2.0, 1.0, 2.0 / (1.0 + (-15.0f64).exp())),
            RightTail::decay(1.0),
        )
        .unwrap();
        (w, a)
    }

    #[test]
    fn constant_kernel_i_integral_equals_abar() {
        // ∫ Ā·(−w′) over the real line = Ā for any admissible wave.
        let (w, _) = wave_like();
        let a = Profile::constant(w.grid().clone(), 1.5).unwrap();
        let v = weighted_integral(
            Integrand::TimesNegDeriv(&a, &w),
            Weight::One,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .unwrap();
        assert!((v - 1.5).abs() < 1e-7, "got {v}");
    }

    #[test]
    fn integration_by_parts_identity() {
        // ∫A(−w′) = Ā + ∫A′w for w(−∞)=1, w(∞)=0.
        let (w, a) = wave_like();
        let route1 = weighted_integral(
            Integrand::TimesNegDeriv(&a, &w),
            Weight::One,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .unwrap();
        let route2 = 2.0
            - weighted_integral(
                Integrand::TimesNegDeriv(&w, &a),
                Weight::One,
                f64::NEG_INFINITY,
                f64::INFINITY,
            )
            .unwrap();
        // Exact value: ∫ 2/(1+e^x) · e^x/(1+e^x)^2 dx = 2·∫ t(1-t)... = 1/3·2 = 2/3·... compare the two routes.
        assert!(
            (route1 - route2).abs() < 1e-6 * route1.abs(),
            "routes disagree: {route1} vs {route2}"
        );
    }

    #[test]
    fn mass_of_neg_deriv_is_total_drop() {
        let (w, _) = wave_like();
        let v = weighted_integral(
            Integrand::NegDeriv(&w),
            Weight::One,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn linearity_and_split_additivity() {
        let (w, a) = wave_like();
        let full = weighted_integral(Integrand::Product(&a, &w), Weight::ExpY, -8.0, 6.0).unwrap();
        // Split at a grid node.
        let mid = w.grid().nodes()[w.grid().origin_index().unwrap()];
        let p1 = weighted_integral(Integrand::Product(&a, &w), Weight::ExpY, -8.0, mid).unwrap();
        let p2 = weighted_integral(Integrand::Product(&a, &w), Weight::ExpY, mid, 6.0).unwrap();
        assert!((p1 + p2 - full).abs() < 1e-10 * full.abs().max(1.0));
        // Linearity in p: scale a by 3 via a fresh profile.
        let a3 = Profile::from_fn(
            a.grid().clone(),
            |x| 3.0 * a.eval(x),
            LeftTail::matching(6.0, 1.0, 3.0 * a.values()[0]),
            RightTail::decay(1.0),
        )
        .unwrap();
        let scaled = weighted_integral(Integrand::Product(&a3, &w), Weight::ExpY, -8.0, 6.0).unwrap();
        assert!((scaled - 3.0 * full).abs() < 1e-9 * full.abs().max(1.0));
    }

    #[test]
    fn expy_product_against_closed_form() {
        // z constant 0.5, w = e^{−2x} tail: ∫_0^∞ 0.5·e^{−2y}·e^y dy = 0.5.
        let g = make_grid(-1.0, 4.0, 101, 1.0).unwrap();
        let z = Profile::constant(g.clone(), 0.5).unwrap();
        let w = Profile::from_fn(
            g,
            |x| (-2.0 * x).exp(),
            LeftTail::flat((2.0f64).exp()),
            RightTail::decay(2.0),
        )
        .unwrap();
        let v = weighted_integral(Integrand::Product(&z, &w), Weight::ExpY, 0.0, f64::INFINITY).unwrap();
        assert!((v - 0.5).abs() < 5e-7, "got {v}");
    }

    #[test]
    fn cubic_exp_moment_against_quadrature() {
        // Oracle: dense Simpson on the same cubic × exponential.
        let c = [0.3, -1.2, 0.7, 0.05];
        for &sigma in &[1.0, -1.0, -3.0, 0.0, 1e-12] {
            let h = 0.37;
            let f = |u: f64| (c[0] + c[1] * u + c[2] * u * u + c[3] * u * u * u) * (sigma * u).exp();
            let n = 2000;
            let mut acc = 0.0;
            for i in 0..n {
                let u0 = h * i as f64 / n as f64;
                let u1 = h * (i + 1) as f64 / n as f64;
                let um = 0.5 * (u0 + u1);
                acc += (u1 - u0) / 6.0 * (f(u0) + 4.0 * f(um) + f(u1));
            }
            let v = cubic_exp_moment(c, h, sigma);
            assert!((v - acc).abs() < 1e-12, "sigma={sigma}: {v} vs {acc}");
        }
    }

    #[test]
    fn poly_exp_helpers_match_gamma_values() {
        // ∫_0^∞ u^2 e^{−3u} du = 2/27.
        assert!((poly_exp_to_inf(2, -3.0, 0.0) - 2.0 / 27.0).abs() < 1e-14);
        // ∫_{−∞}^0 e^{2u} du = 1/2.
        assert!((poly_exp_from_neg_inf(0, 2.0, 0.0) - 0.5).abs() < 1e-14);
        // Finite: ∫_0^1 u e^u du = 1.
        assert!((poly_exp_finite(1, 1.0, 0.0, 1.0) - 1.0).abs() < 1e-14);
    }
}
