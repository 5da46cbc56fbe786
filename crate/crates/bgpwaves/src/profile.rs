//! Grid-sampled scalar functions with analytic exponential tails.
//!
//! A [`Profile`] stores node values plus Hermite tangents on a [`Grid`], a left
//! tail `v(x) ≈ limit − amplitude·e^{γ(x−xL)}` and a right tail
//! `v(x) ≈ v(xR)·(1 + (x−xR)·[deg=1])·e^{−λ(x−xR)}`. Interpolation inside the
//! grid is cubic Hermite; tangents either come from the producer (an ODE
//! integrator knows the derivative exactly) or are estimated with fourth-order
//! finite differences and then limited to preserve monotonicity.

use crate::grid::Grid;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid profile: {0}")]
    Invalid(String),
    #[error("integral diverges: {0}")]
    Divergence(String),
    #[error("tail fit failed: {0}")]
    Fit(String),
}

/// Left tail `v(x) ≈ limit − amplitude·e^{rate·(x−xL)}` for x < xL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeftTail {
    pub limit: f64,
    pub amplitude: f64,
    pub rate: f64,
}

impl LeftTail {
    /// Tail continuous at xL: amplitude is pinned by `limit − v(xL)`.
    pub fn matching(limit: f64, rate: f64, v_at_xl: f64) -> Self {
        Self {
            limit,
            amplitude: limit - v_at_xl,
            rate,
        }
    }

    /// Constant extension by the boundary value.
    pub fn flat(v_at_xl: f64) -> Self {
        Self {
            limit: v_at_xl,
            amplitude: 0.0,
            rate: 0.0,
        }
    }
}

/// Right tail `v(x) ≈ v(xR)·(1 + (x−xR)·[poly_degree=1])·e^{−rate·(x−xR)}` for x > xR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RightTail {
    pub rate: f64,
    pub poly_degree: u8,
}

impl RightTail {
    pub fn decay(rate: f64) -> Self {
        Self { rate, poly_degree: 0 }
    }

    pub fn flat() -> Self {
        Self { rate: 0.0, poly_degree: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Profile {
    grid: Grid,
    values: Vec<f64>,
    tangents: Vec<f64>,
    left_tail: LeftTail,
    right_tail: RightTail,
}

impl Profile {
    /// Build a profile estimating tangents from the samples (fourth-order
    /// stencils, limited so the interpolant cannot overshoot monotone data).
    pub fn new(
        grid: Grid,
        values: Vec<f64>,
        left_tail: LeftTail,
        right_tail: RightTail,
    ) -> Result<Self, ProfileError> {
        Self::check(&grid, &values, &right_tail)?;
        let tangents = limited_tangents(grid.nodes(), &values);
        Ok(Self {
            grid,
            values,
            tangents,
            left_tail,
            right_tail,
        })
    }

    /// Build a profile from values plus exact derivative samples.
    pub fn with_tangents(
        grid: Grid,
        values: Vec<f64>,
        tangents: Vec<f64>,
        left_tail: LeftTail,
        right_tail: RightTail,
    ) -> Result<Self, ProfileError> {
        Self::check(&grid, &values, &right_tail)?;
        if tangents.len() != values.len() {
            return Err(ProfileError::Invalid("tangent/value length mismatch".into()));
        }
        if tangents.iter().any(|t| !t.is_finite()) {
            return Err(ProfileError::Invalid("tangents must be finite".into()));
        }
        Ok(Self {
            grid,
            values,
            tangents,
            left_tail,
            right_tail,
        })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self, ProfileError> {
        let n = grid.len();
        Self::with_tangents(
            grid,
            vec![value; n],
            vec![0.0; n],
            LeftTail::flat(value),
            RightTail::flat(),
        )
    }

    /// Sample a closure on the grid; tangents are estimated.
    pub fn from_fn(
        grid: Grid,
        f: impl Fn(f64) -> f64,
        left_tail: LeftTail,
        right_tail: RightTail,
    ) -> Result<Self, ProfileError> {
        let values: Vec<f64> = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values, left_tail, right_tail)
    }

    fn check(grid: &Grid, values: &[f64], right_tail: &RightTail) -> Result<(), ProfileError> {
        if values.len() != grid.len() {
            return Err(ProfileError::Invalid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProfileError::Invalid("values must be finite".into()));
        }
        if right_tail.rate < 0.0 {
            return Err(ProfileError::Invalid("right tail rate must be >= 0".into()));
        }
        if right_tail.poly_degree > 1 {
            return Err(ProfileError::Invalid("poly_degree must be 0 or 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tangents(&self) -> &[f64] {
        &self.tangents
    }

    pub fn left_tail(&self) -> LeftTail {
        self.left_tail
    }

    pub fn right_tail(&self) -> RightTail {
        self.right_tail
    }

    pub fn value_at_end(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Strictly decreasing node values?
    pub fn is_strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// Interpolated value: Hermite inside the grid, analytic tails outside.
    pub fn eval(&self, x: f64) -> f64 {
        let xl = self.grid.x_left();
        let xr = self.grid.x_right();
        if x < xl {
            let t = self.left_tail;
            return t.limit - t.amplitude * (t.rate * (x - xl)).exp();
        }
        if x > xr {
            let t = self.right_tail;
            let u = x - xr;
            let poly = if t.poly_degree == 1 { 1.0 + u } else { 1.0 };
            return self.value_at_end() * poly * (-t.rate * u).exp();
        }
        let i = self.grid.locate(x);
        let (h, u) = self.cell_param(i, x);
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        h00 * self.values[i]
            + h * h10 * self.tangents[i]
            + h01 * self.values[i + 1]
            + h * h11 * self.tangents[i + 1]
    }

    /// Interpolated first derivative.
    pub fn deriv(&self, x: f64) -> f64 {
        let xl = self.grid.x_left();
        let xr = self.grid.x_right();
        if x < xl {
            let t = self.left_tail;
            return -t.amplitude * t.rate * (t.rate * (x - xl)).exp();
        }
        if x > xr {
            let t = self.right_tail;
            let u = x - xr;
            let v = self.value_at_end() * (-t.rate * u).exp();
            return if t.poly_degree == 1 {
                v * (1.0 - t.rate * (1.0 + u))
            } else {
                -t.rate * v
            };
        }
        let i = self.grid.locate(x);
        self.deriv_in_cell(i, x)
    }

    fn deriv_in_cell(&self, i: usize, x: f64) -> f64 {
        let (h, u) = self.cell_param(i, x);
        let d00 = 6.0 * u * (u - 1.0) / h;
        let d10 = (1.0 - u) * (1.0 - 3.0 * u);
        let d01 = -d00;
        let d11 = u * (3.0 * u - 2.0);
        d00 * self.values[i] + d10 * self.tangents[i] + d01 * self.values[i + 1] + d11 * self.tangents[i + 1]
    }

    /// Second derivative of the interpolant at node `i`, averaging the two
    /// one-sided cell values in the interior.
    pub fn second_deriv_at_node(&self, i: usize) -> f64 {
        let n = self.grid.len();
        let from_cell = |c: usize, at_right: bool| -> f64 {
            let x0 = self.grid.nodes()[c];
            let h = self.grid.nodes()[c + 1] - x0;
            let u = if at_right { 1.0 } else { 0.0 };
            let s00 = (12.0 * u - 6.0) / (h * h);
            let s10 = (6.0 * u - 4.0) / h;
            let s01 = -s00;
            let s11 = (6.0 * u - 2.0) / h;
            s00 * self.values[c]
                + s10 * self.tangents[c]
                + s01 * self.values[c + 1]
                + s11 * self.tangents[c + 1]
        };
        if i == 0 {
            from_cell(0, false)
        } else if i == n - 1 {
            from_cell(n - 2, true)
        } else {
            0.5 * (from_cell(i - 1, true) + from_cell(i, false))
        }
    }

    fn cell_param(&self, i: usize, x: f64) -> (f64, f64) {
        let x0 = self.grid.nodes()[i];
        let h = self.grid.nodes()[i + 1] - x0;
        (h, (x - x0) / h)
    }

    /// Hermite coefficients of cell `i` in local monomials a0 + a1·u + a2·u² + a3·u³,
    /// u = x − x_i.
    pub fn cell_monomials(&self, i: usize) -> [f64; 4] {
        let h = self.grid.nodes()[i + 1] - self.grid.nodes()[i];
        hermite_monomials(self.values[i], self.values[i + 1], self.tangents[i], self.tangents[i + 1], h)
    }
}

/// Hermite cell in monomial form given end values/derivatives and width h.
pub fn hermite_monomials(v0: f64, v1: f64, t0: f64, t1: f64, h: f64) -> [f64; 4] {
    let dv = (v1 - v0) / h;
    let a0 = v0;
    let a1 = t0;
    let a2 = (3.0 * dv - 2.0 * t0 - t1) / h;
    let a3 = (t0 + t1 - 2.0 * dv) / (h * h);
    [a0, a1, a2, a3]
}

/// Finite-difference weights (Fornberg) for the m-th derivative at `x0` on
/// arbitrary nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Fourth-order tangent estimates limited into the Fritsch-Carlson monotone
/// region, so the Hermite interpolant cannot overshoot monotone data.
fn limited_tangents(xs: &[f64], vs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut t = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(2).min(n - 5);
        let stencil = &xs[lo..lo + 5];
        let w = fd_weights(xs[i], stencil, 1);
        t[i] = w.iter().zip(&vs[lo..lo + 5]).map(|(wi, vi)| wi * vi).sum();
    }
    let slope = |i: usize| (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i]);
    for i in 0..n {
        let (dl, dr) = if i == 0 {
            (slope(0), slope(0))
        } else if i == n - 1 {
            (slope(n - 2), slope(n - 2))
        } else {
            (slope(i - 1), slope(i))
        };
        if dl * dr <= 0.0 {
            t[i] = 0.0;
        } else {
            let cap = 3.0 * dl.abs().min(dr.abs());
            if dl > 0.0 {
                t[i] = t[i].clamp(0.0, cap);
            } else {
                t[i] = t[i].clamp(-cap, 0.0);
            }
        }
    }
    t
}

/// Result of an exponential tail fit on the rightmost samples.
#[derive(Debug, Clone, Copy)]
pub struct TailFit {
    pub rate: f64,
    pub poly_degree: u8,
    pub residual: f64,
}

/// Least-squares fit of the rightmost `window` samples against `C·e^{−λx}`
/// and, when all window abscissae are positive, against `C·x·e^{−λx}`;
/// returns the better-residual model.
pub fn fit_right_tail(p: &Profile, window: usize) -> Result<TailFit, ProfileError> {
    let n = p.grid().len();
    let window = window.max(4);
    if window > n {
        return Err(ProfileError::Fit(format!("window {window} exceeds {n} nodes")));
    }
    let xs = &p.grid().nodes()[n - window..];
    let vs = &p.values()[n - window..];
    fit_tail_samples(xs, vs)
}

pub(crate) fn fit_tail_samples(xs: &[f64], vs: &[f64]) -> Result<TailFit, ProfileError> {
    if vs.iter().any(|&v| v <= 0.0) {
        return Err(ProfileError::Fit("non-positive values in fit window".into()));
    }
    let lin_fit = |ys: &[f64]| -> (f64, f64) {
        // Regress ys on xs; returns (slope, rms residual).
        let m = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let denom = m * sxx - sx * sx;
        let slope = (m * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / m;
        let ss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        (slope, (ss / m).sqrt())
    };
    let log_v: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let (slope0, res0) = lin_fit(&log_v);
    let mut best = TailFit {
        rate: (-slope0).max(0.0),
        poly_degree: 0,
        residual: res0,
    };
    if xs.iter().all(|&x| x > 0.0) {
        let log_vx: Vec<f64> = vs.iter().zip(xs).map(|(v, x)| v.ln() - x.ln()).collect();
        let (slope1, res1) = lin_fit(&log_vx);
        if res1 < best.residual && -slope1 > 0.0 {
            best = TailFit {
                rate: -slope1,
                poly_degree: 1,
                residual: res1,
            };
        }
    }
    Ok(best)
}

/// Fit the left tail `limit − amplitude·e^{γ(x−xL)}` given the known limit.
pub fn fit_left_tail(p: &Profile, window: usize, limit: f64) -> Result<LeftTail, ProfileError> {
    let window = window.max(4).min(p.grid().len());
    let xs = &p.grid().nodes()[..window];
    let vs = &p.values()[..window];
    let gaps: Vec<f64> = vs.iter().map(|&v| limit - v).collect();
    if gaps.iter().any(|&g| g <= 0.0) {
        // Flat or touching the limit: constant extension.
        return Ok(LeftTail::flat(vs[0]));
    }
    let m = xs.len() as f64;
    let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = m * sxx - sx * sx;
    let rate = ((m * sxy - sx * sy) / denom).max(0.0);
    Ok(LeftTail::matching(limit, rate, vs[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn constant_profile_everywhere() {
        let g = make_grid(-10.0, 10.0, 41, 1.0).unwrap();
        let p = Profile::constant(g, 0.5).unwrap();
        for &x in &[-3.7, 0.0, 2.2, 9.9] {
            assert_eq!(p.eval(x), 0.5);
        }
        // Tails: flat extension on both sides.
        assert_eq!(p.eval(-50.0), 0.5);
        assert_eq!(p.eval(50.0), 0.5);
    }

    #[test]
    fn right_tail_half_life() {
        let g = make_grid(-1.0, 5.0, 31, 1.0).unwrap();
        let n = g.len();
        let mut values = vec![0.0; n];
        for (i, &x) in g.nodes().iter().enumerate() {
            values[i] = 0.01 * (-(x - 5.0)).exp();
        }
        *values.last_mut().unwrap() = 0.01;
        let p = Profile::new(g, values, LeftTail::flat(0.01 * (6.0f64).exp()), RightTail::decay(1.0)).unwrap();
        let half = p.eval(5.0 + std::f64::consts::LN_2);
        assert!((half - 0.005).abs() < 1e-15);
    }

    #[test]
    fn interp_matches_exponential_within_1e6() {
        // e^{-x} sampled with spacing 0.1; estimated tangents must keep the
        // interpolant within 1e-6 of the truth between nodes.
        let g = make_grid(-2.0, 2.0, 41, 1.0).unwrap();
        let p = Profile::from_fn(
            g,
            |x| (-x).exp(),
            LeftTail::flat((2.0f64).exp()),
            RightTail::decay(1.0),
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..400 {
            let x = -2.0 + 4.0 * (i as f64 + 0.5) / 400.0;
            let exact = (-x).exp();
            worst = worst.max((p.eval(x) - exact).abs() / exact);
        }
        assert!(worst < 1e-6, "worst relative interp error {worst}");
    }

    #[test]
    fn interp_reproduces_node_values_exactly() {
        let g = make_grid(-5.0, 5.0, 33, 1.3).unwrap();
        let p = Profile::from_fn(
            g.clone(),
            |x| 1.0 / (1.0 + x.exp()),
            LeftTail::matching(1.0, 0.5, 1.0 / (1.0 + (-5.0f64).exp())),
            RightTail::decay(1.0),
        )
        .unwrap();
        for (i, &x) in g.nodes().iter().enumerate() {
            assert_eq!(p.eval(x), p.values()[i]);
        }
    }

    #[test]
    fn monotone_data_stays_monotone_between_nodes() {
        let g = make_grid(-5.0, 5.0, 21, 1.0).unwrap();
        let p = Profile::from_fn(
            g,
            |x| 1.0 / (1.0 + (2.0 * x).exp()),
            LeftTail::matching(1.0, 2.0, 1.0 / (1.0 + (-10.0f64).exp())),
            RightTail::decay(2.0),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=500 {
            let x = -5.0 + 10.0 * i as f64 / 500.0;
            let v = p.eval(x);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn fit_right_tail_pure_exponential() {
        let g = make_grid(-1.0, 20.0, 200, 1.0).unwrap();
        let p = Profile::from_fn(
            g,
            |x| (-0.5 * x).exp(),
            LeftTail::flat((0.5f64).exp()),
            RightTail::decay(0.5),
        )
        .unwrap();
        let fit = fit_right_tail(&p, 20).unwrap();
        assert_eq!(fit.poly_degree, 0);
        assert!((fit.rate - 0.5).abs() < 1e-6, "rate {}", fit.rate);
    }

    #[test]
    fn fit_right_tail_degenerate_decay() {
        // Samples of x·e^{-1.1x} on [20, 30].
        let mut nodes = vec![-1.0, -0.5];
        for i in 0..=100 {
            nodes.push(20.0 + 0.1 * i as f64);
        }
        let g = Grid::new(nodes).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|&x| {
            if x > 0.0 { x * (-1.1 * x).exp() } else { 1.0 }
        }).collect();
        let p = Profile::new(g, vals, LeftTail::flat(1.0), RightTail::decay(1.1)).unwrap();
        let fit = fit_right_tail(&p, 60).unwrap();
        assert_eq!(fit.poly_degree, 1);
        assert!((fit.rate - 1.1).abs() < 1e-3, "rate {}", fit.rate);
    }

    #[test]
    fn fit_right_tail_degenerate_inputs() {
        let g = make_grid(-1.0, 10.0, 50, 1.0).unwrap();
        let n = g.len();
        // Constant data: rate ~ 0.
        let p = Profile::constant(g.clone(), 2.0).unwrap();
        let fit = fit_right_tail(&p, 12).unwrap();
        assert!(fit.rate.abs() < 1e-12);
        // Non-positive data: error.
        let mut vals = vec![1.0; n];
        vals[n - 3] = -0.1;
        let p = Profile::new(g, vals, LeftTail::flat(1.0), RightTail::flat()).unwrap();
        assert!(fit_right_tail(&p, 12).is_err());
    }

    #[test]
    fn fd_weights_standard_stencils() {
        // Uniform central first derivative: [-1/2, 0, 1/2] / h.
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert!((w[0] + 0.5).abs() < 1e-14);
        assert!(w[1].abs() < 1e-14);
        assert!((w[2] - 0.5).abs() < 1e-14);
        // Five-point first derivative at center: [1, -8, 0, 8, -1]/12.
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn second_deriv_at_nodes_tracks_smooth_function() {
        let g = make_grid(-2.0, 2.0, 81, 1.0).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|&x| (-x).exp()).collect();
        let tans: Vec<f64> = g.nodes().iter().map(|&x| -(-x).exp()).collect();
        let p = Profile::with_tangents(g.clone(), vals, tans, LeftTail::flat(0.0), RightTail::decay(1.0)).unwrap();
        for i in 5..p.grid().len() - 5 {
            let x = p.grid().nodes()[i];
            let exact = (-x).exp();
            assert!((p.second_deriv_at_node(i) - exact).abs() < 1e-3 * exact);
        }
    }
}
