//! Forward shooting for the nonlocal wave equation and the bisections on the
//! left-tail amplitude that select heights and the critical wave.
//!
//! The nonlocal equation is localized through the auxiliary state
//! J(x) = ∫_{−∞}^x A(−w′): then w′ = u, u′ = −c·u − w·J, J′ = −A(x)·u, which
//! is valid under w(−∞) = 1. The shot starts at the left grid end with
//! w = 1 − ε, u = −με, J = Ā·ε, where μ is the growing root of the
//! frozen-coefficient linearization v″ + cv′ − Āv = 0 around w = 1.
//!
//! Bisection probes integrate between sparse waypoints under pure error
//! control; only returned waves are resolved at every grid node.

use super::{Kernel, KppError, ShootOutcome, WaveSolution};
use crate::config::NumericsConfig;
use crate::grid::Grid;
use crate::ode::Rk45;
use crate::profile::{fit_tail_samples, LeftTail, Profile, RightTail};

/// How far beyond the grid the integration may extend while waiting for the
/// trajectory to classify itself.
const EXTEND_SPAN: f64 = 400.0;

/// Kernel counts as exhausted once A(x) − ulA drops below this fraction of Ā.
const EXHAUST_REL: f64 = 1e-8;

/// Past the grid end with the kernel exhausted, trajectories still higher
/// than this keep the analytic tail instead of integrating to the floor.
const W_EARLY: f64 = 1e-4;

/// Waypoint stride of probe shots.
const PROBE_STRIDE: usize = 4;

/// Growing root of v″ + cv′ − Āv = 0.
fn growing_root(c: f64, abar: f64) -> f64 {
    (-c + (c * c + 4.0 * abar).sqrt()) / 2.0
}

pub(crate) struct RawTrajectory {
    xs: Vec<f64>,
    ws: Vec<f64>,
    us: Vec<f64>,
    j_end: f64,
    pub i_value: f64,
    pub theta: f64,
    early_stop: bool,
}

pub(crate) enum RawShot {
    Decayed(RawTrajectory),
    CrossedZero { x: f64 },
    TurnedUp { x: f64 },
    Diverged,
}

/// Integrate from the left end through the given waypoints and classify.
fn run_shot(
    kernel: &Kernel,
    c: f64,
    eps: f64,
    cfg: &NumericsConfig,
    stride: usize,
) -> Result<RawShot, KppError> {
    if !(c > 0.0) {
        return Err(KppError::Config(format!("speed must be positive, got {c}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(KppError::Config(format!("eps must lie in (0, 0.5), got {eps}")));
    }
    let grid = kernel.profile().grid();
    let x_left = grid.x_left();
    let abar = kernel.abar();
    if abar - kernel.eval(x_left) >= cfg.tail_tol {
        return Err(KppError::Config(format!(
            "kernel not flat at xL={x_left}: Abar - A(xL) = {:e} >= tail_tol",
            abar - kernel.eval(x_left)
        )));
    }

    // Waypoints: every `stride`-th node, always including the origin and the
    // right end.
    let base = grid.nodes();
    let origin = grid.origin_index().unwrap_or(0);
    let mut waypoints: Vec<f64> = Vec::with_capacity(base.len() / stride + 4);
    let mut i = 0;
    while i < base.len() {
        waypoints.push(base[i]);
        if i < origin && i + stride > origin {
            waypoints.push(base[origin]);
        }
        i += stride;
    }
    if *waypoints.last().unwrap() < base[base.len() - 1] {
        waypoints.push(base[base.len() - 1]);
    }

    let mu = growing_root(c, abar);
    let rk: Rk45<3> = Rk45::new(cfg.ode_atol);
    let rhs = |x: f64, y: &[f64; 3]| {
        let a = kernel.eval(x);
        [y[1], -c * y[1] - y[0] * y[2], -a * y[1]]
    };

    let x_right = grid.x_right();
    let h_ext = (base[base.len() - 1] - base[base.len() - 2]) * stride as f64;

    let mut xs: Vec<f64> = Vec::with_capacity(waypoints.len() + 64);
    let mut ws: Vec<f64> = Vec::with_capacity(waypoints.len() + 64);
    let mut us: Vec<f64> = Vec::with_capacity(waypoints.len() + 64);
    let mut theta = f64::NAN;

    let mut y = [1.0 - eps, -mu * eps, abar * eps];
    let mut x = x_left;
    xs.push(x);
    ws.push(y[0]);
    us.push(y[1]);

    let mut h = 0.25 * (waypoints[1] - waypoints[0]);
    let mut idx = 1usize;
    let mut early_stop = false;
    loop {
        let x_next = if idx < waypoints.len() {
            waypoints[idx]
        } else {
            let ext = x + h_ext;
            if ext - x_right > EXTEND_SPAN {
                return Ok(RawShot::Diverged);
            }
            ext
        };
        let h_max = x_next - x;
        y = match rk.advance(&rhs, x, y, x_next, h_max, &mut h) {
            Ok(v) => v,
            Err(()) => return Ok(RawShot::Diverged),
        };
        x = x_next;
        xs.push(x);
        ws.push(y[0]);
        us.push(y[1]);
        if x == 0.0 {
            theta = y[0];
        }
        idx += 1;

        if y[0] <= 0.0 {
            return Ok(RawShot::CrossedZero { x });
        }
        if y[1] >= 0.0 && y[0] > cfg.right_floor {
            return Ok(RawShot::TurnedUp { x });
        }
        let a_here = kernel.eval(x);
        let exhausted = a_here - kernel.aunderbar() <= EXHAUST_REL * kernel.abar().max(1.0);
        let at_floor = y[0] <= cfg.right_floor;
        if at_floor || (x >= x_right && exhausted) {
            // Frozen-coefficient dichotomy: with the remaining nonlocal mass
            // bounded by A(x)·w(x), the trajectory decays iff the Riccati
            // roots are real and q = −w′/w sits below the upper one.
            let i_est = y[2] + a_here * y[0];
            let disc = c * c / 4.0 - i_est;
            let q = -y[1] / y[0];
            let decays = disc >= 0.0 && q <= c / 2.0 + disc.sqrt();
            if !decays {
                return Ok(RawShot::CrossedZero { x });
            }
            if at_floor {
                break;
            }
            if y[0] > W_EARLY {
                early_stop = true;
                break;
            }
            // Decaying but still high: continue to the floor so the tail fit
            // sees the asymptotic regime.
        }
        if !y.iter().all(|v| v.is_finite()) || y[0] > 2.0 {
            return Ok(RawShot::Diverged);
        }
    }

    let x_stop = *xs.last().unwrap();
    let i_value = y[2] + kernel.eval(x_stop) * y[0];
    if theta.is_nan() {
        theta = if x_stop <= 0.0 { *ws.last().unwrap() } else { 1.0 };
    }
    Ok(RawShot::Decayed(RawTrajectory {
        xs,
        ws,
        us,
        j_end: y[2],
        i_value,
        theta,
        early_stop,
    }))
}

/// Integrate one trajectory node by node and classify it, building the full
/// wave on decay.
pub fn shoot(
    kernel: &Kernel,
    c: f64,
    eps: f64,
    cfg: &NumericsConfig,
) -> Result<ShootOutcome, KppError> {
    Ok(match run_shot(kernel, c, eps, cfg, 1)? {
        RawShot::Decayed(raw) => {
            ShootOutcome::Decayed(Box::new(build_wave(kernel, c, eps, raw, cfg)?))
        }
        RawShot::CrossedZero { x } => ShootOutcome::CrossedZero { x },
        RawShot::TurnedUp { x } => ShootOutcome::TurnedUp { x },
        RawShot::Diverged => ShootOutcome::Diverged,
    })
}

/// Probe shot between sparse waypoints: classification and scalar summaries
/// only.
fn probe(kernel: &Kernel, c: f64, eps: f64, cfg: &NumericsConfig) -> Result<RawShot, KppError> {
    run_shot(kernel, c, eps, cfg, PROBE_STRIDE)
}

fn build_wave(
    kernel: &Kernel,
    c: f64,
    eps: f64,
    raw: RawTrajectory,
    cfg: &NumericsConfig,
) -> Result<WaveSolution, KppError> {
    let RawTrajectory {
        xs,
        ws,
        us,
        j_end,
        early_stop,
        ..
    } = raw;
    let n = xs.len();
    if n < 16 || *xs.last().unwrap() <= 0.0 {
        return Err(KppError::Integration(
            "trajectory decayed before covering the grid".into(),
        ));
    }
    let x_stop = *xs.last().unwrap();
    let w_stop = *ws.last().unwrap();

    // Complete the nonlocal accumulation with the analytic right tail:
    // ∫_{x_stop}^∞ A(−w′) ≈ A(x_stop)·w(x_stop).
    let i_value = j_end + kernel.eval(x_stop) * w_stop;

    let (rate, poly_degree) = if early_stop {
        // Tail samples are still pre-asymptotic; take the decay rate from
        // the identity λ = c/2 − √(c²/4 − I).
        let disc = (c * c / 4.0 - i_value).max(0.0);
        (c / 2.0 - disc.sqrt(), 0)
    } else {
        let window = cfg.fit_window.clamp(6, n / 2);
        let fit = fit_tail_samples(&xs[n - window..], &ws[n - window..])
            .map_err(KppError::from)?;
        (fit.rate, fit.poly_degree)
    };

    let mu = growing_root(c, kernel.abar());
    let grid = Grid::new(xs)?;
    let left = LeftTail {
        limit: 1.0,
        amplitude: eps,
        rate: mu,
    };
    let right = RightTail { rate, poly_degree };
    let w = Profile::with_tangents(grid, ws, us, left, right)?;
    let theta = w.eval(0.0);

    let mut wave = WaveSolution {
        w,
        c,
        theta,
        i_value,
        lambda: rate,
        critical: false,
        residual: 0.0,
        eps,
    };
    wave.residual = super::diag::residual(&wave, kernel);
    Ok(wave)
}

/// Initial amplitude guess from the pure left-tail ansatz 1−w ≈ (1−θ)e^{μx}.
fn seed_eps(kernel: &Kernel, c: f64, theta: f64) -> f64 {
    let mu = growing_root(c, kernel.abar());
    let guess = (1.0 - theta) * (mu * kernel.profile().grid().x_left()).exp();
    guess.clamp(1e-290, 1e-2)
}

/// Wave with prescribed height w(0) = θ, found by bisecting the left-tail
/// amplitude. Fails with `NoWaveAtHeight` when θ is below the minimal height
/// of the foliation at this speed.
pub fn solve_wave(
    kernel: &Kernel,
    c: f64,
    theta: f64,
    cfg: &NumericsConfig,
) -> Result<WaveSolution, KppError> {
    let raw = solve_wave_probe(kernel, c, theta, cfg)?;
    match run_shot(kernel, c, raw, cfg, 1)? {
        RawShot::Decayed(tr) => {
            let wave = build_wave(kernel, c, raw, tr, cfg)?;
            if (wave.theta - theta).abs() <= 4.0 * cfg.value_tol.max(1e-14) {
                Ok(wave)
            } else {
                Err(KppError::Integration(format!(
                    "dense rebuild moved the height to {}",
                    wave.theta
                )))
            }
        }
        _ => Err(KppError::Integration("lost the decayed bracket".into())),
    }
}

/// Sampled-mode variant returning the wave on the sparse waypoint grid; used
/// inside iteration loops where full node resolution is not needed.
pub(crate) fn solve_wave_sampled(
    kernel: &Kernel,
    c: f64,
    theta: f64,
    cfg: &NumericsConfig,
) -> Result<WaveSolution, KppError> {
    let eps = solve_wave_probe(kernel, c, theta, cfg)?;
    match probe(kernel, c, eps, cfg)? {
        RawShot::Decayed(tr) => build_wave(kernel, c, eps, tr, cfg),
        _ => Err(KppError::Integration("lost the decayed bracket".into())),
    }
}

/// Bisect the amplitude to the requested height; returns the chosen eps.
fn solve_wave_probe(
    kernel: &Kernel,
    c: f64,
    theta: f64,
    cfg: &NumericsConfig,
) -> Result<f64, KppError> {
    let threshold = kernel.min_speed();
    if c <= threshold {
        return Err(KppError::NoWave { c, threshold });
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(KppError::Config(format!("theta must lie in (0,1), got {theta}")));
    }

    // Side of the target: Low = decayed with θ above it.
    let classify = |eps: f64| -> Result<(bool, f64), KppError> {
        Ok(match probe(kernel, c, eps, cfg)? {
            RawShot::Decayed(tr) if tr.theta > theta => (true, tr.theta),
            RawShot::Decayed(tr) => (false, tr.theta),
            _ => (false, f64::NAN),
        })
    };

    let mut lo = seed_eps(kernel, c, theta);
    let mut hi;
    let (low0, _) = classify(lo)?;
    if low0 {
        hi = lo;
        let mut found = false;
        for _ in 0..600 {
            hi = (hi * 4.0).min(0.499);
            let (low, _) = classify(hi)?;
            if !low {
                found = true;
                break;
            }
            lo = hi;
            if hi >= 0.499 {
                break;
            }
        }
        if !found {
            return Err(KppError::Integration(
                "failed to bracket the requested height from below".into(),
            ));
        }
    } else {
        hi = lo;
        let mut found = false;
        for _ in 0..600 {
            lo /= 4.0;
            if lo < 1e-300 {
                break;
            }
            let (low, _) = classify(lo)?;
            if low {
                found = true;
                break;
            }
            hi = lo;
        }
        if !found {
            return Err(KppError::Integration(
                "failed to bracket the requested height from above".into(),
            ));
        }
    }

    let mut theta_lo = f64::NAN;
    while hi - lo > cfg.bisect_rel * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (low, th) = classify(mid)?;
        if low {
            lo = mid;
            theta_lo = th;
            if (th - theta).abs() <= 0.25 * cfg.value_tol {
                break;
            }
        } else {
            hi = mid;
        }
    }
    if theta_lo.is_nan() {
        if let (true, th) = classify(lo)? {
            theta_lo = th;
        }
    }
    if (theta_lo - theta).abs() <= cfg.value_tol.max(1e-14) {
        Ok(lo)
    } else {
        // The bisection pinched the decayed/crossed boundary with θ still
        // above the target: the height is below the foliation minimum.
        Err(KppError::NoWaveAtHeight {
            theta,
            theta_c: theta_lo,
        })
    }
}

/// Bisect the amplitude to the decayed/crossed boundary; returns eps on the
/// decayed side with |I − c²/4| within a fraction of the tolerance.
fn critical_eps(kernel: &Kernel, c: f64, cfg: &NumericsConfig) -> Result<f64, KppError> {
    let target = c * c / 4.0;
    let decayed = |eps: f64| -> Result<Option<f64>, KppError> {
        Ok(match probe(kernel, c, eps, cfg)? {
            RawShot::Decayed(tr) => Some(tr.i_value),
            _ => None,
        })
    };

    let mut lo = seed_eps(kernel, c, 0.5);
    let mut guard = 0;
    while decayed(lo)?.is_none() {
        lo /= 4.0;
        guard += 1;
        if lo < 1e-300 || guard > 600 {
            return Err(KppError::Integration("no decayed amplitude found".into()));
        }
    }
    let mut hi = lo;
    guard = 0;
    loop {
        hi = (hi * 4.0).min(0.499);
        if decayed(hi)?.is_none() {
            break;
        }
        lo = hi;
        guard += 1;
        if hi >= 0.499 || guard > 600 {
            return Err(KppError::Integration(
                "decayed set has no upper boundary below eps = 0.5".into(),
            ));
        }
    }

    let mut gap_lo = f64::INFINITY;
    while hi - lo > cfg.bisect_rel * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match decayed(mid)? {
            Some(i) => {
                lo = mid;
                gap_lo = (i - target).abs();
                // The boundary value of I is c²/4; stop once safely inside
                // the identity tolerance.
                if gap_lo <= 0.2 * cfg.crit_tol * target {
                    break;
                }
            }
            None => hi = mid,
        }
    }
    let _ = gap_lo;
    Ok(lo)
}

/// The critical wave at speed c ∈ (2√ulA, 2√Ā): the boundary of the decayed
/// set in the amplitude parameter, cross-checked against I = c²/4.
pub fn critical_wave(
    kernel: &Kernel,
    c: f64,
    cfg: &NumericsConfig,
) -> Result<WaveSolution, KppError> {
    critical_wave_impl(kernel, c, cfg, 1)
}

/// Sampled-mode critical wave for iteration interiors.
pub(crate) fn critical_wave_sampled(
    kernel: &Kernel,
    c: f64,
    cfg: &NumericsConfig,
) -> Result<WaveSolution, KppError> {
    critical_wave_impl(kernel, c, cfg, PROBE_STRIDE)
}

fn critical_wave_impl(
    kernel: &Kernel,
    c: f64,
    cfg: &NumericsConfig,
    stride: usize,
) -> Result<WaveSolution, KppError> {
    let lo_speed = kernel.min_speed();
    let hi_speed = kernel.max_critical_speed();
    if !(c > lo_speed && c < hi_speed) {
        return Err(KppError::Range {
            c,
            lo: lo_speed,
            hi: hi_speed,
        });
    }
    let eps = critical_eps(kernel, c, cfg)?;
    let mut wave = match run_shot(kernel, c, eps, cfg, stride)? {
        RawShot::Decayed(tr) => build_wave(kernel, c, eps, tr, cfg)?,
        _ => return Err(KppError::Integration("lost the decayed bracket".into())),
    };
    wave.critical = true;
    let target = c * c / 4.0;
    let gap = (wave.i_value - target).abs();
    let tol = cfg.crit_tol * target;
    if gap > tol {
        return Err(KppError::Tolerance { gap, tol });
    }
    Ok(wave)
}

/// Wave of the truncated two-point problem on the kernel grid:
/// w″ + c w′ + w(A(xL)(1−γ) + ∫_{xL}^x A(−w′)) = 0 from w(xL) = γ,
/// w′(xL) = 0, with γ bisected until w(x0) = ℓ0. Requires c ≥ 2√Ā.
pub fn truncated_wave(
    kernel: &Kernel,
    c: f64,
    x0: f64,
    ell0: f64,
    cfg: &NumericsConfig,
) -> Result<WaveSolution, KppError> {
    truncated_wave_impl(kernel, c, x0, ell0, cfg, 1)
}

/// Sampled-mode variant for iteration interiors.
pub(crate) fn truncated_wave_sampled(
    kernel: &Kernel,
    c: f64,
    x0: f64,
    ell0: f64,
    cfg: &NumericsConfig,
) -> Result<WaveSolution, KppError> {
    truncated_wave_impl(kernel, c, x0, ell0, cfg, PROBE_STRIDE)
}

fn truncated_wave_impl(
    kernel: &Kernel,
    c: f64,
    x0: f64,
    ell0: f64,
    cfg: &NumericsConfig,
    stride: usize,
) -> Result<WaveSolution, KppError> {
    let cap = kernel.max_critical_speed();
    if c < cap {
        return Err(KppError::Range {
            c,
            lo: cap,
            hi: f64::INFINITY,
        });
    }
    if !(ell0 > 0.0 && ell0 < 1.0) {
        return Err(KppError::Config(format!("ell0 must lie in (0,1), got {ell0}")));
    }
    let grid = kernel.profile().grid();
    if !(x0 > grid.x_left() && x0 < grid.x_right()) {
        return Err(KppError::Config(format!(
            "normalization point {x0} outside the domain"
        )));
    }

    // Waypoints at the requested stride, with x0 inserted.
    let base = grid.nodes();
    let mut waypoints: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < base.len() {
        waypoints.push(base[i]);
        i += stride;
    }
    if *waypoints.last().unwrap() < base[base.len() - 1] {
        waypoints.push(base[base.len() - 1]);
    }
    for &special in &[0.0, x0] {
        if !waypoints.contains(&special) {
            waypoints.push(special);
        }
    }
    waypoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    waypoints.dedup();
    let value_idx = waypoints.iter().position(|&x| x == x0).unwrap();

    let shoot_gamma = |gamma: f64| -> Result<(Vec<f64>, Vec<f64>, f64), KppError> {
        let a_left = kernel.eval(waypoints[0]);
        let rk: Rk45<3> = Rk45::new(cfg.ode_atol);
        let rhs = |x: f64, y: &[f64; 3]| {
            let a = kernel.eval(x);
            [
                y[1],
                -c * y[1] - y[0] * (a_left * (1.0 - gamma) + y[2]),
                -a * y[1],
            ]
        };
        let mut ws = Vec::with_capacity(waypoints.len());
        let mut us = Vec::with_capacity(waypoints.len());
        let mut y = [gamma, 0.0, 0.0];
        ws.push(y[0]);
        us.push(y[1]);
        let mut h = 0.25 * (waypoints[1] - waypoints[0]);
        for k in 1..waypoints.len() {
            let h_max = waypoints[k] - waypoints[k - 1];
            y = rk
                .advance(&rhs, waypoints[k - 1], y, waypoints[k], h_max, &mut h)
                .map_err(|()| KppError::Integration("truncated shot stalled".into()))?;
            ws.push(y[0]);
            us.push(y[1]);
            if y[0] <= 0.0 {
                return Err(KppError::Integration(
                    "truncated trajectory lost positivity".into(),
                ));
            }
        }
        Ok((ws, us, y[2]))
    };

    // w(x0; γ) is increasing in γ with w(x0; ℓ0) < ℓ0 and w(x0; γ→1) → 1.
    let mut lo = ell0;
    let mut hi = 1.0 - 1e-12;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= cfg.bisect_rel {
            break;
        }
        let (ws, _, _) = shoot_gamma(mid)?;
        if ws[value_idx] < ell0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let (ws, us, j_end) = shoot_gamma(gamma)?;
    let achieved = ws[value_idx];
    // Single shooting amplifies γ-perturbations by the unstable factor
    // e^{μ(x0−xL)}, so the floating-point granularity of γ bounds the
    // achievable normalization accuracy.
    let mu = growing_root(c, kernel.abar());
    let conditioning = 4096.0 * f64::EPSILON * (mu * (x0 - grid.x_left())).exp();
    let tol = cfg.value_tol.max(conditioning);
    if (achieved - ell0).abs() > tol {
        return Err(KppError::Tolerance {
            gap: (achieved - ell0).abs(),
            tol,
        });
    }

    let n = ws.len();
    let a_left = kernel.eval(waypoints[0]);
    let i_value = a_left * (1.0 - gamma) + j_end + kernel.eval(*waypoints.last().unwrap()) * ws[n - 1];
    let window = cfg.fit_window.clamp(6, n / 2);
    let fit = fit_tail_samples(&waypoints[n - window..], &ws[n - window..])?;
    let wave_grid = Grid::new(waypoints.clone())?;
    let w = Profile::with_tangents(
        wave_grid,
        ws,
        us,
        LeftTail::flat(gamma),
        RightTail {
            rate: fit.rate,
            poly_degree: fit.poly_degree,
        },
    )?;
    let theta = w.eval(0.0);
    let mut wave = WaveSolution {
        w,
        c,
        theta,
        i_value,
        lambda: fit.rate,
        critical: false,
        residual: 0.0,
        eps: 1.0 - gamma,
    };
    wave.residual = super::diag::residual(&wave, kernel);
    Ok(wave)
}
