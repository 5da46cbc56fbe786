//! Damped fixed-point iteration on the policy σ, the solve-and-extend
//! truncation strategy, and the reconstruction of the balanced-growth-path
//! value function.

use super::policy::{build_policy, policy_from_value};
use super::speed::select_speed_impl;
use super::zsolve::solve_z;
use super::{
    feasibility, BgpSolution, ChiCutoff, Classification, MfgError, ModelParams, PolicySolution,
    TruncationScheme,
};
use crate::config::NumericsConfig;
use crate::grid::{make_grid, Grid};
use crate::kpp::{truncated_wave, WaveSolution};
use crate::kpp::truncated_wave_sampled;
use crate::profile::{hermite_monomials, LeftTail, Profile, RightTail};
use crate::quad::{cubic_exp_moment, weighted_integral, Integrand, Weight};
use serde::{Deserialize, Serialize};

/// Residual and consistency data attached to a returned BGP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BgpDiagnostics {
    pub iterations: usize,
    /// sup|σ_{k+1} − σ_k| per iteration, both stages.
    pub sigma_history: Vec<f64>,
    /// Selected (or imposed) growth rate per iteration.
    pub c_history: Vec<f64>,
    /// |c²/(4κ²) − ∫α(σ)(−w′)| relative to c²/(4κ²), quadrature route.
    pub crit_residual: f64,
    /// ∫α(σ)(−w′) by quadrature, physical units.
    pub i_quadrature: f64,
    /// Growth-rate move between the coarse and the extended stage.
    pub stage_c_shift: f64,
    /// sup|σ| move between the extended-stage seed and its fixed point.
    pub stage_sigma_shift: f64,
    /// sup|T(σ*) − σ*| at the returned point.
    pub idempotence_gap: f64,
    /// Max of |Bellman defect|·e^{−x} on interior nodes.
    pub bellman_residual: f64,
    /// ∫(−w′) by composite quadrature (should be the total height drop).
    pub mass_quadrature: f64,
    /// Left-ordering consistency of the speed envelope (critical branch).
    pub envelope_gap: f64,
    /// Achieved G(c) (critical branch; 0 otherwise).
    pub g_value: f64,
    pub converged: bool,
    pub critical_branch: bool,
    pub cutoff: ChiCutoff,
}

/// Reconstructed distribution and value data of a BGP.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// f = −w′ normalized to unit mass.
    pub f: Profile,
    /// ν(r) = ∫_{−∞}^r z e^y dy + K.
    pub nu: Profile,
    pub k_const: f64,
    /// Max of |(ρ−c)ν + cν′ − κ²ν″ − H|·e^{−x} on interior nodes.
    pub bellman_residual: f64,
    /// ∫(−w′) by composite quadrature.
    pub mass: f64,
}

struct StageOutcome {
    sigma: Vec<f64>,
    grid: Grid,
    c: f64,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    params: &ModelParams,
    cfg: &NumericsConfig,
    trunc: &TruncationScheme,
    grid: Grid,
    mut sigma: Vec<f64>,
    budget: &mut usize,
    sigma_history: &mut Vec<f64>,
    c_history: &mut Vec<f64>,
    produce: &mut dyn FnMut(&PolicySolution) -> Result<(f64, WaveSolution), MfgError>,
) -> Result<StageOutcome, MfgError> {
    let mut omega = cfg.damping;
    let mut rises = 0usize;
    let mut last_c = f64::NAN;
    let mut converged = false;
    while *budget > 0 {
        *budget -= 1;
        let policy = build_policy(grid.clone(), sigma.clone(), &params.tech)?;
        let (c, wave) = produce(&policy)?;
        let z = solve_z(&policy, &wave, params, c, trunc)?;
        let fresh = policy_from_value(&z, &wave, params, trunc)?;

        let mut delta_raw: f64 = 0.0;
        for (a, b) in sigma.iter().zip(fresh.sigma.values()) {
            delta_raw = delta_raw.max((a - b).abs());
        }
        for (a, b) in sigma.iter_mut().zip(fresh.sigma.values()) {
            *a = (1.0 - omega) * *a + omega * b;
        }
        let delta = omega * delta_raw;
        last_c = c;
        c_history.push(c);
        if let Some(&prev) = sigma_history.last() {
            if delta > prev {
                rises += 1;
                if rises >= 2 {
                    omega = (0.5 * omega).max(0.05);
                    rises = 0;
                }
            } else {
                rises = 0;
            }
        }
        sigma_history.push(delta);
        if delta < cfg.fp_tol {
            converged = true;
            break;
        }
    }
    Ok(StageOutcome {
        sigma,
        grid,
        c: last_c,
        converged,
    })
}

/// Seed policy: σ = 1 left of the origin, (α′)⁻¹(e^x(ρ−κ²)) right of it
/// (the constant-value-slope heuristic).
fn seed_sigma(grid: &Grid, params: &ModelParams) -> Result<Vec<f64>, MfgError> {
    let scale = params.rho - params.kappa_sq();
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid.nodes() {
        let s = if x <= 0.0 {
            1.0
        } else {
            params.tech.inv_deriv(x.exp() * scale)?
        };
        out.push(s);
    }
    for i in 1..out.len() {
        if out[i] > out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    Ok(out)
}

/// Interpolate a converged σ onto a finer/wider grid, preserving saturation
/// and monotonicity exactly.
fn resample_sigma(policy_grid: &Grid, sigma: &[f64], tech: &crate::alpha::LearningTech, new_grid: &Grid) -> Result<Vec<f64>, MfgError> {
    let prof = build_policy(policy_grid.clone(), sigma.to_vec(), tech)?.sigma;
    let mut out: Vec<f64> = new_grid
        .nodes()
        .iter()
        .map(|&x| prof.eval(x).clamp(0.0, 1.0))
        .collect();
    for i in 1..out.len() {
        if out[i] > out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    Ok(out)
}

/// Critical balanced growth path: speed selected by G(c) = 1/2, wave pinned
/// by the criticality identity, solved at the requested truncation and then
/// re-solved on a doubled domain with halved spacing.
pub fn bgp_critical(
    params: &ModelParams,
    trunc: &TruncationScheme,
    cfg: &NumericsConfig,
) -> Result<BgpSolution, MfgError> {
    let report = params.tech.validate(params.kappa, params.rho);
    if !report.all_pass() {
        return Err(MfgError::Feasibility(format!(
            "hypothesis check failed: {report:?}"
        )));
    }

    let mut budget = cfg.max_iter;
    let mut sigma_history = Vec::new();
    let mut c_history = Vec::new();

    let mut prev_c: Option<f64> = None;
    let mut last_gap = 0.0;
    let mut last_g = 0.0;
    let mut produce = |policy: &PolicySolution| -> Result<(f64, WaveSolution), MfgError> {
        let hint = prev_c.map(|c| (0.85 * c, 1.15 * c));
        let sel = select_speed_impl(policy, params, cfg, hint)?;
        prev_c = Some(sel.c);
        last_gap = sel.envelope_gap;
        last_g = sel.g_value;
        Ok((sel.c, sel.wave))
    };

    let grid_a = make_grid(-trunc.n, trunc.n, cfg.n_core, cfg.stretch)?;
    let stage_a = run_stage(
        params,
        cfg,
        trunc,
        grid_a,
        seed_sigma(&make_grid(-trunc.n, trunc.n, cfg.n_core, cfg.stretch)?, params)?,
        &mut budget,
        &mut sigma_history,
        &mut c_history,
        &mut produce,
    )?;
    if !stage_a.converged {
        let last = sigma_history.last().copied().unwrap_or(f64::NAN);
        return Err(MfgError::NonConvergence {
            iterations: cfg.max_iter,
            last,
            history: sigma_history,
        });
    }

    // Extend: double the half-width, halve the spacing, restart from the
    // interpolated iterate.
    let grid_b = make_grid(
        -2.0 * trunc.n,
        2.0 * trunc.n,
        (cfg.n_core - 1) * 4 + 1,
        cfg.stretch,
    )?;
    let seed_b = resample_sigma(&stage_a.grid, &stage_a.sigma, &params.tech, &grid_b)?;
    let trunc_b = TruncationScheme {
        n: 2.0 * trunc.n,
        chi: trunc.chi,
    };
    let stage_b = run_stage(
        params,
        cfg,
        &trunc_b,
        grid_b,
        seed_b.clone(),
        &mut budget,
        &mut sigma_history,
        &mut c_history,
        &mut produce,
    )?;
    if !stage_b.converged {
        let last = sigma_history.last().copied().unwrap_or(f64::NAN);
        return Err(MfgError::NonConvergence {
            iterations: cfg.max_iter,
            last,
            history: sigma_history,
        });
    }
    let stage_sigma_shift = seed_b
        .iter()
        .zip(&stage_b.sigma)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    // Final assembly at the converged policy.
    let policy = build_policy(stage_b.grid.clone(), stage_b.sigma.clone(), &params.tech)?;
    let hint = Some((0.9 * stage_b.c, 1.1 * stage_b.c));
    let sel = select_speed_impl(&policy, params, cfg, hint)?;
    let c = sel.c;
    let wave = sel.wave;
    let z = solve_z(&policy, &wave, params, c, &trunc_b)?;
    let fresh = policy_from_value(&z, &wave, params, &trunc_b)?;
    let idempotence_gap = policy
        .sigma
        .values()
        .iter()
        .zip(fresh.sigma.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let k2 = params.kappa_sq();
    let i_quadrature = weighted_integral(
        Integrand::TimesNegDeriv(policy.kernel.profile(), &wave.w),
        Weight::One,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )?;
    let crit_target = c * c / (4.0 * k2);
    let crit_residual = (crit_target - i_quadrature).abs() / crit_target;
    if crit_residual > cfg.crit_tol {
        return Err(MfgError::NonConvergence {
            iterations: cfg.max_iter - budget,
            last: crit_residual,
            history: sigma_history,
        });
    }

    let recon = reconstruct_parts(&wave, &z, &policy, c, params)?;
    let diagnostics = BgpDiagnostics {
        iterations: cfg.max_iter - budget,
        sigma_history,
        c_history,
        crit_residual,
        i_quadrature,
        stage_c_shift: (stage_b.c - stage_a.c).abs(),
        stage_sigma_shift,
        idempotence_gap,
        bellman_residual: recon.bellman_residual,
        mass_quadrature: recon.mass,
        envelope_gap: last_gap,
        g_value: last_g,
        converged: true,
        critical_branch: true,
        cutoff: trunc.chi,
    };
    Ok(BgpSolution {
        c,
        wave,
        z,
        policy,
        k_const: recon.k_const,
        nu: recon.nu,
        tail_inequality: 2.0 * k2 / c,
        diagnostics,
    })
}

/// Supercritical balanced growth path at an imposed speed, with the wave
/// pinned by w(x0) = ell0 and the additive 1/n policy regularization.
pub fn bgp_supercritical(
    params: &ModelParams,
    c: f64,
    x0: f64,
    ell0: f64,
    trunc: &TruncationScheme,
    cfg: &NumericsConfig,
) -> Result<BgpSolution, MfgError> {
    match feasibility(params, c) {
        Classification::SupercriticalWindow => {}
        other => {
            return Err(MfgError::Feasibility(format!(
                "speed {c} classified {other}, not in the supercritical window"
            )))
        }
    }

    let k2 = params.kappa_sq();
    let mut budget = cfg.max_iter;
    let mut sigma_history = Vec::new();
    let mut c_history = Vec::new();
    let mut produce = |policy: &PolicySolution| -> Result<(f64, WaveSolution), MfgError> {
        let kernel = policy.kernel.scaled(1.0 / k2);
        let wave = truncated_wave_sampled(&kernel, c / k2, x0, ell0, cfg)?;
        Ok((c, wave))
    };

    let grid_a = make_grid(-trunc.n, trunc.n, cfg.n_core, cfg.stretch)?;
    let seed = seed_sigma(&grid_a, params)?;
    let stage_a = run_stage(
        params,
        cfg,
        trunc,
        grid_a,
        seed,
        &mut budget,
        &mut sigma_history,
        &mut c_history,
        &mut produce,
    )?;
    if !stage_a.converged {
        let last = sigma_history.last().copied().unwrap_or(f64::NAN);
        return Err(MfgError::NonConvergence {
            iterations: cfg.max_iter,
            last,
            history: sigma_history,
        });
    }
    let grid_b = make_grid(
        -2.0 * trunc.n,
        2.0 * trunc.n,
        (cfg.n_core - 1) * 4 + 1,
        cfg.stretch,
    )?;
    let seed_b = resample_sigma(&stage_a.grid, &stage_a.sigma, &params.tech, &grid_b)?;
    let trunc_b = TruncationScheme {
        n: 2.0 * trunc.n,
        chi: trunc.chi,
    };
    let stage_b = run_stage(
        params,
        cfg,
        &trunc_b,
        grid_b,
        seed_b.clone(),
        &mut budget,
        &mut sigma_history,
        &mut c_history,
        &mut produce,
    )?;
    if !stage_b.converged {
        let last = sigma_history.last().copied().unwrap_or(f64::NAN);
        return Err(MfgError::NonConvergence {
            iterations: cfg.max_iter,
            last,
            history: sigma_history,
        });
    }
    let stage_sigma_shift = seed_b
        .iter()
        .zip(&stage_b.sigma)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let policy = build_policy(stage_b.grid.clone(), stage_b.sigma.clone(), &params.tech)?;
    let kernel = policy.kernel.scaled(1.0 / k2);
    let wave = truncated_wave(&kernel, c / k2, x0, ell0, cfg)?;
    let z = solve_z(&policy, &wave, params, c, &trunc_b)?;
    let fresh = policy_from_value(&z, &wave, params, &trunc_b)?;
    let idempotence_gap = policy
        .sigma
        .values()
        .iter()
        .zip(fresh.sigma.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let i_quadrature = weighted_integral(
        Integrand::TimesNegDeriv(policy.kernel.profile(), &wave.w),
        Weight::One,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )?;
    let crit_target = c * c / (4.0 * k2);
    let recon = reconstruct_parts(&wave, &z, &policy, c, params)?;

    let diagnostics = BgpDiagnostics {
        iterations: cfg.max_iter - budget,
        sigma_history,
        c_history,
        crit_residual: (crit_target - i_quadrature).abs() / crit_target,
        i_quadrature,
        stage_c_shift: 0.0,
        stage_sigma_shift,
        idempotence_gap,
        bellman_residual: recon.bellman_residual,
        mass_quadrature: recon.mass,
        envelope_gap: 0.0,
        g_value: 0.0,
        converged: true,
        critical_branch: false,
        cutoff: trunc.chi,
    };
    Ok(BgpSolution {
        c,
        wave,
        z,
        policy,
        k_const: recon.k_const,
        nu: recon.nu,
        tail_inequality: 2.0 * k2 / c,
        diagnostics,
    })
}

/// P(x) = ∫_{−∞}^x z·w·e^y dy accumulated forward; the uncut policy integral
/// is M(x) = M_tot − P(x).
fn cumulative_p(z: &Profile, wave: &WaveSolution) -> Vec<f64> {
    let xs = z.grid().nodes();
    let g = |x: f64| z.eval(x) * wave.w.eval(x);
    let dg = |x: f64| z.deriv(x) * wave.w.eval(x) + z.eval(x) * wave.w.deriv(x);
    let mut p = vec![0.0; xs.len()];
    for i in 0..xs.len() - 1 {
        let h = xs[i + 1] - xs[i];
        let coeffs = hermite_monomials(g(xs[i]), g(xs[i + 1]), dg(xs[i]), dg(xs[i + 1]), h);
        p[i + 1] = p[i] + xs[i].exp() * cubic_exp_moment(coeffs, h, 1.0);
    }
    p
}

/// Rebuild (f, ν, K) from a wave/slope/policy triple and measure the
/// stationary Bellman defect.
pub(crate) fn reconstruct_parts(
    wave: &WaveSolution,
    z: &Profile,
    _policy: &PolicySolution,
    c: f64,
    params: &ModelParams,
) -> Result<Reconstruction, MfgError> {
    if c >= params.rho {
        return Err(MfgError::Feasibility(format!(
            "reconstruction requires c < rho, got c = {c}, rho = {}",
            params.rho
        )));
    }
    let k2 = params.kappa_sq();

    // Mass of −w′ by composite trapezoid plus the analytic tail drops.
    let wxs = wave.w.grid().nodes();
    let wus = wave.w.tangents();
    let mut mass = wave.w.left_tail().amplitude + wave.w.value_at_end();
    for i in 0..wxs.len() - 1 {
        mass += 0.5 * (-wus[i] - wus[i + 1]) * (wxs[i + 1] - wxs[i]);
    }

    let f_vals: Vec<f64> = wus.iter().map(|u| -u / mass).collect();
    let lt = wave.w.left_tail();
    let f = Profile::new(
        wave.w.grid().clone(),
        f_vals,
        LeftTail::matching(0.0, lt.rate, -wus[0] / mass),
        RightTail {
            rate: wave.w.right_tail().rate,
            poly_degree: wave.w.right_tail().poly_degree,
        },
    )?;

    // Integrability gate: z·e^y·w must decay on the right.
    let m_tot = weighted_integral(
        Integrand::Product(z, &wave.w),
        Weight::ExpY,
        f64::NEG_INFINITY,
        f64::INFINITY,
    )?;
    let k_const = params.tech.alpha1() / (params.rho - c) * m_tot;

    // ν̃(x) = ∫_{−∞}^x z e^y dy accumulated left to right; ν = ν̃ + K and
    // ν′ = z·e^x exactly.
    let xs = z.grid().nodes();
    let zv = z.values();
    let g = |x: f64| z.eval(x);
    let dg = |x: f64| z.deriv(x);
    let mut nu_tilde = vec![0.0; xs.len()];
    for i in 0..xs.len() - 1 {
        let h = xs[i + 1] - xs[i];
        let coeffs = hermite_monomials(g(xs[i]), g(xs[i + 1]), dg(xs[i]), dg(xs[i + 1]), h);
        nu_tilde[i + 1] = nu_tilde[i] + xs[i].exp() * cubic_exp_moment(coeffs, h, 1.0);
    }
    let nu_vals: Vec<f64> = nu_tilde.iter().map(|v| v + k_const).collect();
    let nu_tangents: Vec<f64> = xs.iter().zip(zv).map(|(&x, &zi)| zi * x.exp()).collect();
    let nu = Profile::with_tangents(
        z.grid().clone(),
        nu_vals,
        nu_tangents,
        LeftTail::flat(k_const),
        RightTail::flat(),
    )?;

    // Bellman defect scaled by e^{−x}. The raw form
    //   (ρ−c)νe^{−x} + cz − κ²(z+z′) − max_s[(1−s) + α(s)M e^{−x}]
    // hides an exact cancellation (ρ−c)K = α(1)·M_tot between terms that
    // individually grow like e^{|x|} on the left; substituting
    // M = M_tot − P with P = ∫_{−∞}^x z w e^y gives the stable form below.
    let p_cum = cumulative_p(z, wave);
    let alpha1 = params.tech.alpha1();
    let d1 = params.tech.deriv(1.0)?;
    let mut worst: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        if x < z.grid().x_left() + 2.0 || x > z.grid().x_right() - 2.0 {
            continue;
        }
        let m = (m_tot - p_cum[i]).max(0.0);
        let price = x.exp() / m;
        let s = if m <= 0.0 {
            0.0
        } else if price <= d1 {
            1.0
        } else {
            params.tech.inv_deriv(price)?
        };
        let a_s = params.tech.eval(s)?;
        let zp = z.tangents()[i];
        let d = (params.rho - c) * nu_tilde[i] * (-x).exp() + c * zv[i]
            - k2 * (zv[i] + zp)
            - (1.0 - s)
            + ((alpha1 - a_s) * m_tot + a_s * p_cum[i]) * (-x).exp();
        worst = worst.max(d.abs());
    }

    Ok(Reconstruction {
        f,
        nu,
        k_const,
        bellman_residual: worst,
        mass,
    })
}

/// Rebuild the distribution and value data of an assembled BGP.
pub fn reconstruct_bgp(b: &BgpSolution, params: &ModelParams) -> Result<Reconstruction, MfgError> {
    reconstruct_parts(&b.wave, &b.z, &b.policy, b.c, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha::LearningTech;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 3.0, LearningTech::power(2.0, 0.5).unwrap()).unwrap()
    }

    fn small_cfg() -> NumericsConfig {
        // Coarse settings keep the unit test quick; the acceptance suite runs
        // the full configuration.
        NumericsConfig {
            n: 14.0,
            n_core: 281,
            fp_tol: 1e-3,
            ..NumericsConfig::default()
        }
    }

    #[test]
    fn critical_bgp_converges_on_coarse_grid() {
        let p = params();
        let cfg = small_cfg();
        let trunc = TruncationScheme::new(cfg.n, ChiCutoff::ExpCutoff).unwrap();
        let bgp = bgp_critical(&p, &trunc, &cfg).unwrap();
        assert!(bgp.diagnostics.converged);
        assert!(
            bgp.c > 2.0 && bgp.c < 2.0 * (2.0f64).sqrt(),
            "c = {} outside the critical window",
            bgp.c
        );
        assert!(bgp.diagnostics.crit_residual <= cfg.crit_tol);
        // σ saturates on a left half-line and decays on the right.
        assert!(bgp.policy.x0.is_finite());
        assert!(*bgp.policy.sigma.values().last().unwrap() < 0.05);
        // z plateau.
        assert!((bgp.z.eval(bgp.z.grid().x_right()) - 0.5).abs() < 1e-9);
        assert!(bgp.z.is_nondecreasing());
        // Tail inequality 2κ²/c.
        assert!((bgp.tail_inequality - 2.0 / bgp.c).abs() < 1e-14);
        // Wave decays fast enough for z e^x w to be integrable.
        assert!(bgp.wave.lambda > 1.0);
    }

    #[test]
    fn supercritical_bgp_normalizations() {
        let p = params();
        let cfg = small_cfg();
        let trunc = TruncationScheme::new(cfg.n, ChiCutoff::Additive).unwrap();
        let bgp = bgp_supercritical(&p, 2.9, 0.0, 0.5, &trunc, &cfg).unwrap();
        assert!((bgp.wave.theta - 0.5).abs() < 1e-4);
        // Strictly below criticality.
        assert!(bgp.diagnostics.i_quadrature < 2.9 * 2.9 / 4.0);
        // Out-of-window speeds refuse.
        assert!(matches!(
            bgp_supercritical(&p, 3.1, 0.0, 0.5, &trunc, &cfg),
            Err(MfgError::Feasibility(_))
        ));
        assert!(matches!(
            bgp_supercritical(&p, 2.5, 0.0, 0.5, &trunc, &cfg),
            Err(MfgError::Feasibility(_))
        ));
    }

    #[test]
    fn reconstruction_properties() {
        let p = params();
        let cfg = small_cfg();
        let trunc = TruncationScheme::new(cfg.n, ChiCutoff::ExpCutoff).unwrap();
        let bgp = bgp_critical(&p, &trunc, &cfg).unwrap();
        let recon = reconstruct_bgp(&bgp, &p).unwrap();
        // Unit mass after normalization: the quadrature itself integrated f.
        let total = weighted_integral(
            Integrand::NegDeriv(&bgp.wave.w),
            Weight::One,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .unwrap();
        // Coarse-grid trapezoid; the default grid meets 1e-8 in acceptance.
        assert!((total / recon.mass - 1.0).abs() < 1e-6);
        // ν increasing from K.
        assert!(recon.nu.is_nondecreasing());
        assert!((recon.nu.eval(recon.nu.grid().x_left() - 5.0) - recon.k_const).abs() < 1e-12);
        assert!(recon.k_const > 0.0);
    }
}
