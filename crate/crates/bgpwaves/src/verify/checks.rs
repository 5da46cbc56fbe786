//! Property suites: everything the structure theorems guarantee about waves
//! and balanced growth paths, measured on the actual numerical objects.

use super::CheckReport;
use crate::kpp::{Kernel, WaveSolution};
use crate::mfg::{BgpSolution, ModelParams};
use crate::quad::{weighted_integral, Integrand, Weight};

/// Default gate on normalized equation residuals.
pub(crate) const RESIDUAL_TOL: f64 = 1e-3;

/// Frozen constant of the interior lower bound for z. The sub-solution
/// 1 − (x−1)² bounds the operator by 6·(1 + κ² + c + ρ + sup A·sup w); 8
/// absorbs the discretization.
pub(crate) const Z_FLOOR_C: f64 = 8.0;

/// Worst-margin scan: returns (min margin, location of the minimum).
fn scan<'a>(
    points: impl Iterator<Item = (f64, f64)> + 'a,
) -> (f64, f64) {
    let mut worst = f64::INFINITY;
    let mut loc = f64::NAN;
    for (x, margin) in points {
        if margin < worst {
            worst = margin;
            loc = x;
        }
    }
    (worst, loc)
}

/// Wave-level checks: monotonicity, height window, the I-window, the
/// criticality bound, the decay-rate identity, log-concavity, the two
/// formulations of I, the pointwise decay estimates and the residual gate.
pub fn check_wave(ws: &WaveSolution, kernel: &Kernel) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let w = &ws.w;
    let xs = w.grid().nodes();
    let vals = w.values();
    let tans = w.tangents();
    let c = ws.c;
    let abar = kernel.abar();
    let ula = kernel.aunderbar();
    let theta = ws.theta;
    let full_wave = w.left_tail().amplitude > 0.0;

    // w strictly decreasing.
    let (m, loc) = scan((0..vals.len() - 1).map(|i| (xs[i], vals[i] - vals[i + 1])));
    out.push(CheckReport::located("w_strictly_decreasing", m > 0.0, m, 0.0, loc));

    // 0 < w < 1.
    let (m, loc) = scan(vals.iter().zip(xs).map(|(&v, &x)| (x, v.min(1.0 - v))));
    out.push(CheckReport::located("w_inside_unit_interval", m > 0.0, m, 0.0, loc));

    // ulA < I ≤ c²/4 and I ≤ Ā.
    out.push(CheckReport::scalar(
        "i_above_ula",
        ws.i_value > ula,
        ws.i_value - ula,
        0.0,
    ));
    let crit_cap = c * c / 4.0;
    out.push(CheckReport::scalar(
        "i_at_most_quarter_c_squared",
        ws.i_value <= crit_cap * (1.0 + 1e-6),
        crit_cap - ws.i_value,
        -1e-6 * crit_cap,
    ));
    out.push(CheckReport::scalar(
        "i_at_most_abar",
        ws.i_value <= abar * (1.0 + 1e-9),
        abar - ws.i_value,
        -1e-9 * abar,
    ));

    // λ identity: fitted right rate vs c/2 − √(c²/4 − I).
    let lam_id = ws.lambda_from_identity();
    out.push(CheckReport::scalar(
        "lambda_matches_identity",
        (ws.lambda - lam_id).abs() <= 2e-3,
        (ws.lambda - lam_id).abs(),
        2e-3,
    ));

    // Log-concavity: q = −w′/w increasing.
    let q: Vec<f64> = vals.iter().zip(tans).map(|(v, t)| -t / v).collect();
    let (m, loc) = scan((0..q.len() - 1).map(|i| (xs[i], q[i + 1] - q[i])));
    out.push(CheckReport::located("log_concavity", m > -1e-9, m, -1e-9, loc));

    // Height bounds at the origin (denominators permitting).
    let a0 = kernel.eval(0.0);
    let mut margin = f64::INFINITY;
    if a0 - ula > 1e-9 * abar.max(1.0) {
        margin = margin.min(theta - (a0 - ws.i_value) / (a0 - ula));
    }
    if abar - a0 > 1e-9 * abar.max(1.0) {
        margin = margin.min((abar - ws.i_value) / (abar - a0) - theta);
    }
    let applicable = margin.is_finite();
    out.push(CheckReport::scalar(
        if applicable { "height_bounds" } else { "height_bounds (not applicable)" },
        !applicable || margin >= -1e-6,
        if applicable { margin } else { 1e300 },
        -1e-6,
    ));

    // Pointwise decay estimates (left-resolved waves only).
    if full_wave {
        let gamma0 = a0 * theta / (abar.sqrt() + c);
        let gamma0t = a0 * (1.0 - theta) / c;
        let (m, loc) = scan(xs.iter().zip(vals).filter(|(&x, _)| x <= 0.0).map(|(&x, &v)| {
            ((x), (1.0 - theta) * (gamma0 * x).exp() - (1.0 - v))
        }));
        out.push(CheckReport::located("left_decay_estimate", m >= -1e-12, m, -1e-12, loc));
        let (m, loc) = scan(xs.iter().zip(vals).filter(|(&x, _)| x > 0.0).map(|(&x, &v)| {
            ((x), theta * (gamma0t * (1.0 / c - x)).exp() - v)
        }));
        out.push(CheckReport::located("right_decay_estimate", m >= -1e-12, m, -1e-12, loc));
    }

    // Two formulations of I agree: ∫A(−w′) vs Ā + ∫A′w.
    let route1 = weighted_integral(
        Integrand::TimesNegDeriv(kernel.profile(), w),
        Weight::One,
        f64::NEG_INFINITY,
        f64::INFINITY,
    );
    let route2 = weighted_integral(
        Integrand::TimesNegDeriv(w, kernel.profile()),
        Weight::One,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )
    .map(|v| abar - v);
    match (route1, route2) {
        (Ok(r1), Ok(r2)) => {
            let gap = (r1 - r2).abs() / r1.abs().max(1e-300);
            out.push(CheckReport::scalar("i_two_routes_agree", gap <= 1e-6, gap, 1e-6));
        }
        _ => out.push(CheckReport::scalar("i_two_routes_agree", false, f64::NAN, 1e-6)),
    }

    // λ(x) = −(1/x)·log(w(x)/θ) increasing for x > 0.
    if full_wave {
        let lam_x: Vec<(f64, f64)> = xs
            .iter()
            .zip(vals)
            .filter(|(&x, _)| x > 0.1)
            .map(|(&x, &v)| (x, -(v / theta).ln() / x))
            .collect();
        let (m, loc) = scan((0..lam_x.len().saturating_sub(1)).map(|i| {
            (lam_x[i].0, lam_x[i + 1].1 - lam_x[i].1)
        }));
        out.push(CheckReport::located(
            "effective_rate_increasing",
            m >= -1e-10,
            m,
            -1e-10,
            loc,
        ));
    }

    // Residual gate.
    out.push(CheckReport::scalar(
        "residual_bounded",
        ws.residual <= RESIDUAL_TOL,
        ws.residual,
        RESIDUAL_TOL,
    ));

    out
}

/// BGP-level checks: speed windows, value-slope limits and bounds, the
/// interior floor, mass normalization, the criticality identity (or its
/// strict failure on the supercritical branch), tail integrability and the
/// Bellman defect.
pub fn check_bgp(b: &BgpSolution, params: &ModelParams) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let k2 = params.kappa_sq();
    let a1 = params.tech.alpha1();
    let c = b.c;

    out.push(CheckReport::scalar(
        "speed_above_slow_bound",
        c > 2.0 * k2,
        c - 2.0 * k2,
        0.0,
    ));
    out.push(CheckReport::scalar(
        "speed_below_fast_bound",
        c < a1 + k2,
        a1 + k2 - c,
        0.0,
    ));
    out.push(CheckReport::scalar(
        "speed_below_discount",
        c < params.rho,
        params.rho - c,
        0.0,
    ));

    // z limits and bounds.
    let plateau = params.z_plateau();
    let zxs = b.z.grid().nodes();
    let zvals = b.z.values();
    out.push(CheckReport::scalar(
        "z_right_limit",
        (zvals.last().unwrap() - plateau).abs() <= 1e-3 * plateau,
        (zvals.last().unwrap() - plateau).abs(),
        1e-3 * plateau,
    ));
    let (m, loc) = scan((0..zvals.len() - 1).map(|i| (zxs[i], zvals[i + 1] - zvals[i])));
    out.push(CheckReport::located("z_nondecreasing", m >= -1e-12, m, -1e-12, loc));
    let (m, loc) = scan(zvals.iter().zip(zxs).map(|(&z, &x)| (x, (plateau - z).min(z))));
    out.push(CheckReport::located(
        "z_inside_bounds",
        m >= -1e-9,
        m,
        -1e-9,
        loc,
    ));

    // Interior floor with the frozen universal constant.
    let sup_aw = zxs
        .iter()
        .map(|&x| b.policy.kernel.eval(x) * b.wave.w.eval(x))
        .fold(0.0, f64::max);
    let denom = Z_FLOOR_C * (1.0 + k2 + c + params.rho + sup_aw);
    let sigma = &b.policy.sigma;
    let (m, loc) = scan(zxs.iter().filter(|&&x| x + 2.0 <= b.z.grid().x_right()).map(|&x| {
        let sup_sigma = zxs
            .iter()
            .zip(sigma.values())
            .filter(|(&y, _)| y >= x && y <= x + 2.0)
            .map(|(_, &s)| s)
            .fold(0.0, f64::max);
        let floor = (1.0 - sup_sigma) / denom;
        (x, b.z.eval(x + 1.0) - floor)
    }));
    out.push(CheckReport::located("z_interior_floor", m >= -1e-12, m, -1e-12, loc));

    // Mass: quadrature of −w′ equals the total height drop.
    let drop = b.wave.w.left_tail().limit;
    out.push(CheckReport::scalar(
        "mass_normalization",
        (b.diagnostics.mass_quadrature - drop).abs() <= 1e-8 * drop,
        (b.diagnostics.mass_quadrature - drop).abs(),
        1e-8 * drop,
    ));

    // Criticality identity (critical branch) or its strict failure.
    let target = c * c / (4.0 * k2);
    if b.diagnostics.critical_branch {
        out.push(CheckReport::scalar(
            "criticality_identity",
            b.diagnostics.crit_residual <= RESIDUAL_TOL,
            b.diagnostics.crit_residual,
            RESIDUAL_TOL,
        ));
    } else {
        out.push(CheckReport::scalar(
            "criticality_identity (not applicable)",
            true,
            b.diagnostics.crit_residual,
            1e300,
        ));
        out.push(CheckReport::scalar(
            "supercritical_strict_inequality",
            b.diagnostics.i_quadrature < target,
            target - b.diagnostics.i_quadrature,
            0.0,
        ));
    }

    // Integrability of z e^x w: the wave decays faster than e^{−x}.
    out.push(CheckReport::scalar(
        "tail_rate_exceeds_one",
        b.wave.lambda > 1.0,
        b.wave.lambda - 1.0,
        0.0,
    ));

    // ν increasing from K > 0.
    let (m, loc) = scan(
        (0..b.nu.values().len() - 1)
            .map(|i| (b.nu.grid().nodes()[i], b.nu.values()[i + 1] - b.nu.values()[i])),
    );
    out.push(CheckReport::located("nu_increasing", m >= 0.0, m, 0.0, loc));
    out.push(CheckReport::scalar("k_positive", b.k_const > 0.0, b.k_const, 0.0));

    // σ saturation structure.
    out.push(CheckReport::scalar(
        "sigma_saturated_on_left",
        b.policy.x0.is_finite() && b.policy.sigma.values()[0] == 1.0,
        b.policy.x0,
        f64::NEG_INFINITY,
    ));
    out.push(CheckReport::scalar(
        "sigma_vanishes_on_right",
        *b.policy.sigma.values().last().unwrap() < 0.05,
        *b.policy.sigma.values().last().unwrap(),
        0.05,
    ));

    // Bellman defect.
    out.push(CheckReport::scalar(
        "bellman_defect_bounded",
        b.diagnostics.bellman_residual <= RESIDUAL_TOL,
        b.diagnostics.bellman_residual,
        RESIDUAL_TOL,
    ));

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NumericsConfig;
    use crate::grid::make_grid;
    use crate::kpp::solve_wave;
    use crate::profile::Profile;

    fn logistic_kernel() -> Kernel {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        Kernel::from_fn(g, |x| 2.0 / (1.0 + x.exp()), 2.0, 0.0, 25).unwrap()
    }

    #[test]
    fn solver_wave_passes_all_checks() {
        let k = logistic_kernel();
        let w = solve_wave(&k, 2.2, 0.6, &NumericsConfig::default()).unwrap();
        let reports = check_wave(&w, &k);
        for r in &reports {
            assert!(r.passed, "{} failed: measured {} vs bound {}", r.name, r.measured, r.bound);
        }
    }

    #[test]
    fn flat_segment_fails_monotonicity_with_location() {
        let k = logistic_kernel();
        let w = solve_wave(&k, 2.2, 0.6, &NumericsConfig::default()).unwrap();
        let mut vals = w.w.values().to_vec();
        let origin = w.w.grid().origin_index().unwrap();
        vals[origin + 1] = vals[origin];
        let flat = Profile::with_tangents(
            w.w.grid().clone(),
            vals,
            w.w.tangents().to_vec(),
            w.w.left_tail(),
            w.w.right_tail(),
        )
        .unwrap();
        let bad = WaveSolution { w: flat, ..w.clone() };
        let reports = check_wave(&bad, &k);
        let mono = reports
            .iter()
            .find(|r| r.name == "w_strictly_decreasing")
            .unwrap();
        assert!(!mono.passed);
        assert!((mono.location - 0.0).abs() < 0.2, "location {}", mono.location);
    }

    #[test]
    fn wrong_tail_breaks_lambda_identity() {
        let k = logistic_kernel();
        let w = solve_wave(&k, 2.2, 0.6, &NumericsConfig::default()).unwrap();
        let bad = WaveSolution {
            lambda: w.lambda + 0.3,
            ..w.clone()
        };
        let reports = check_wave(&bad, &k);
        assert!(!reports.iter().find(|r| r.name == "lambda_matches_identity").unwrap().passed);
    }
}
