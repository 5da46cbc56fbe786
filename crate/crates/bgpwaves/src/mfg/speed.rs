//! Speed selection for the critical branch: the unique c with
//! G(c) = ∫_{−∞}^0 e^y w̲_c(y) dy = 1/2, where w̲_c is the pointwise lower
//! envelope of the critical waves with speeds c′ ≤ c.

use super::{MfgError, ModelParams, PolicySolution};
use crate::config::NumericsConfig;
use crate::kpp::{critical_wave, Kernel, WaveSolution};
use crate::kpp::critical_wave_sampled;
use crate::profile::hermite_monomials;
use crate::quad::cubic_exp_moment;
use rayon::prelude::*;

/// G for a prescribed envelope speed grid (each c′ ≤ c, in physical units).
pub fn speed_normalization(
    policy: &PolicySolution,
    c: f64,
    params: &ModelParams,
    c_grid: &[f64],
    cfg: &NumericsConfig,
) -> Result<f64, MfgError> {
    let kernel = policy.kernel.scaled(1.0 / params.kappa_sq());
    let mut waves = Vec::new();
    let results: Vec<Result<WaveSolution, _>> = c_grid
        .par_iter()
        .filter(|&&cp| cp <= c && cp > 0.0)
        .map(|&cp| critical_wave(&kernel, cp / params.kappa_sq(), cfg))
        .collect();
    for r in results {
        waves.push(r?);
    }
    waves.push(critical_wave(&kernel, c / params.kappa_sq(), cfg)?);
    Ok(envelope_g(&kernel, &waves))
}

/// ∫_{−∞}^0 e^y min_j w_j(y) dy over the common grid prefix plus the left
/// tail of the deepest member.
pub(crate) fn envelope_g(kernel: &Kernel, waves: &[WaveSolution]) -> f64 {
    let _ = kernel;
    let grid = waves[0].w.grid();
    let nodes = grid.nodes();
    let origin = grid
        .origin_index()
        .expect("wave grids contain the origin");

    // Envelope values and the member attaining them (for tangents).
    let mut env = Vec::with_capacity(origin + 1);
    let mut env_t = Vec::with_capacity(origin + 1);
    for i in 0..=origin {
        let mut best = f64::INFINITY;
        let mut best_t = 0.0;
        for w in waves {
            let v = w.w.values()[i];
            if v < best {
                best = v;
                best_t = w.w.tangents()[i];
            }
        }
        env.push(best);
        env_t.push(best_t);
    }

    // Left tail: the member lowest at the left end governs the limit.
    let deepest = waves
        .iter()
        .min_by(|a, b| a.w.values()[0].partial_cmp(&b.w.values()[0]).unwrap())
        .expect("non-empty wave set");
    let lt = deepest.w.left_tail();
    let x_left = nodes[0];
    // ∫_{−∞}^{xL} (1 − amp·e^{γ(y−xL)}) e^y dy.
    let mut total = x_left.exp() * (lt.limit - lt.amplitude / (1.0 + lt.rate));

    for i in 0..origin {
        let h = nodes[i + 1] - nodes[i];
        let coeffs = hermite_monomials(env[i], env[i + 1], env_t[i], env_t[i + 1], h);
        total += nodes[i].exp() * cubic_exp_moment(coeffs, h, 1.0);
    }
    total
}

pub(crate) struct SpeedSelection {
    pub c: f64,
    pub wave: WaveSolution,
    pub g_value: f64,
    /// Max over flat-kernel nodes of w_c − envelope; ordering of critical
    /// waves on the flat region makes this zero up to rounding.
    pub envelope_gap: f64,
}

/// Bisection on c for G(c) = 1/2. The envelope uses a fixed grid of
/// `cfg.c_grid_points` speeds spanning (0, 2κ√α(1)) plus the trial speed
/// itself; `hint` narrows the initial bracket.
pub(crate) fn select_speed_impl(
    policy: &PolicySolution,
    params: &ModelParams,
    cfg: &NumericsConfig,
    hint: Option<(f64, f64)>,
) -> Result<SpeedSelection, MfgError> {
    let k2 = params.kappa_sq();
    let c_max = params.critical_speed_cap();
    let kernel = policy.kernel.scaled(1.0 / k2);

    // Envelope members at fixed fractions of the admissible range, solved
    // once and shared across all trial speeds.
    let points = cfg.c_grid_points.max(2);
    let fractions: Vec<f64> = (1..=points)
        .map(|j| 0.04 + 0.92 * (j as f64 - 1.0) / (points as f64 - 1.0))
        .collect();
    let members: Vec<WaveSolution> = fractions
        .par_iter()
        .map(|f| critical_wave_sampled(&kernel, f * c_max / k2, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let eval_g = |c_phys: f64| -> Result<(f64, WaveSolution), MfgError> {
        let wave = critical_wave_sampled(&kernel, c_phys / k2, cfg)?;
        let mut active: Vec<WaveSolution> = members
            .iter()
            .zip(&fractions)
            .filter(|(_, &f)| f * c_max <= c_phys)
            .map(|(w, _)| w.clone())
            .collect();
        active.push(wave.clone());
        Ok((envelope_g(&kernel, &active), wave))
    };

    let (mut lo, mut hi) = hint.unwrap_or((0.02 * c_max, 0.995 * c_max));
    lo = lo.max(0.005 * c_max);
    hi = hi.min(0.9995 * c_max);
    let (g_lo, _) = eval_g(lo)?;
    let (g_hi, _) = eval_g(hi)?;
    if !(g_lo > 0.5 && g_hi < 0.5) {
        if hint.is_some() {
            // The narrowed bracket missed; retry with the full range.
            return select_speed_impl(policy, params, cfg, None);
        }
        return Err(MfgError::Bracket {
            c_lo: lo,
            g_lo,
            c_hi: hi,
            g_hi,
        });
    }

    let mut best: Option<(f64, WaveSolution, f64)> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (g, wave) = eval_g(mid)?;
        let better = match &best {
            Some((gb, _, _)) => (g - 0.5).abs() < (gb - 0.5).abs(),
            None => true,
        };
        if better {
            best = Some((g, wave, mid));
        }
        if (g - 0.5).abs() <= cfg.g_tol {
            break;
        }
        if g > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * c_max {
            break;
        }
    }
    let (g_value, wave, c) = best.ok_or_else(|| MfgError::Numeric("empty speed search".into()))?;

    // Consistency of the left ordering: on the flat-kernel region the
    // envelope equals the trial wave itself.
    let mut gap: f64 = 0.0;
    {
        let grid = wave.w.grid();
        let origin = grid.origin_index().unwrap();
        let mut active: Vec<&WaveSolution> = members
            .iter()
            .zip(&fractions)
            .filter(|(_, &f)| f * c_max <= c)
            .map(|(w, _)| w)
            .collect();
        active.push(&wave);
        for i in 0..=origin {
            let x = grid.nodes()[i];
            if policy.kernel.abar() - policy.kernel.eval(x) > 1e-12 * policy.kernel.abar() {
                break;
            }
            let env = active
                .iter()
                .map(|w| w.w.values()[i])
                .fold(f64::INFINITY, f64::min);
            gap = gap.max(wave.w.values()[i] - env);
        }
    }

    Ok(SpeedSelection {
        c,
        wave,
        g_value,
        envelope_gap: gap,
    })
}

/// Public entry: select the speed with no bracket hint.
pub fn select_speed(
    policy: &PolicySolution,
    params: &ModelParams,
    cfg: &NumericsConfig,
) -> Result<f64, MfgError> {
    Ok(select_speed_impl(policy, params, cfg, None)?.c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha::LearningTech;
    use crate::grid::make_grid;
    use crate::profile::{LeftTail, Profile, RightTail};

    fn policy_fixture() -> (PolicySolution, ModelParams) {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        let params =
            ModelParams::new(1.0, 3.0, LearningTech::power(2.0, 0.5).unwrap()).unwrap();
        let sig = |x: f64| if x <= 0.0 { 1.0 } else { (-2.0 * x).exp() };
        let sigma = Profile::from_fn(g.clone(), sig, LeftTail::flat(1.0), RightTail::decay(2.0)).unwrap();
        let kernel = Kernel::from_fn(
            g,
            |x| 2.0 * sig(x).sqrt(),
            2.0,
            0.0,
            25,
        )
        .unwrap();
        (
            PolicySolution {
                sigma,
                kernel,
                x0: 0.0,
            },
            params,
        )
    }

    #[test]
    fn g_is_decreasing_and_root_is_interior() {
        let (policy, params) = policy_fixture();
        let cfg = NumericsConfig::default();
        let sel = select_speed_impl(&policy, &params, &cfg, None).unwrap();
        assert!((sel.g_value - 0.5).abs() <= cfg.g_tol, "G = {}", sel.g_value);
        assert!(sel.c > 0.0 && sel.c < params.critical_speed_cap());
        // Monotonicity around the root.
        let grid: Vec<f64> = (1..=cfg.c_grid_points)
            .map(|j| 0.04 * params.critical_speed_cap() + 0.92 * params.critical_speed_cap() * (j as f64 - 1.0) / (cfg.c_grid_points as f64 - 1.0))
            .collect();
        let g_minus = speed_normalization(&policy, sel.c - 0.05, &params, &grid, &cfg).unwrap();
        let g_plus = speed_normalization(&policy, sel.c + 0.05, &params, &grid, &cfg).unwrap();
        assert!(g_minus > g_plus, "G not decreasing: {g_minus} vs {g_plus}");
        // On the flat region the envelope is the wave at c itself.
        assert!(sel.envelope_gap <= 1e-12, "gap {}", sel.envelope_gap);
    }

    #[test]
    fn g_limits_toward_range_ends() {
        let (policy, params) = policy_fixture();
        let cfg = NumericsConfig::default();
        let cap = params.critical_speed_cap();
        let g_small = speed_normalization(&policy, 0.05 * cap, &params, &[], &cfg).unwrap();
        let g_big = speed_normalization(&policy, 0.98 * cap, &params, &[0.5 * cap], &cfg).unwrap();
        assert!(g_small > 0.85, "G near c=0 should approach 1, got {g_small}");
        assert!(g_big < 0.3 && g_big < g_small, "G near the cap should be small, got {g_big}");
    }

    #[test]
    fn deterministic_selection() {
        let (policy, params) = policy_fixture();
        let cfg = NumericsConfig::default();
        let a = select_speed(&policy, &params, &cfg).unwrap();
        let b = select_speed(&policy, &params, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
