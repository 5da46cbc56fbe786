//! Finite-difference solve of the value-slope equation
//! −κ² z″ + (c − 2κ²) z′ + (ρ − κ²) z + A·w·z = 1 − σ  on (−n, n),
//! with z = 0 left of −n and z = 1/(ρ − κ²) right of n.

use super::{ModelParams, PolicySolution, TruncationScheme};
use super::MfgError;
use crate::kpp::WaveSolution;
use crate::profile::{LeftTail, Profile, RightTail};

/// Thomas solve of a tridiagonal system; diag is consumed as workspace.
fn solve_tridiagonal(
    sub: &[f64],
    diag: &mut [f64],
    sup: &[f64],
    rhs: &mut [f64],
) -> Result<Vec<f64>, MfgError> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1].abs() < 1e-300 {
            return Err(MfgError::Numeric("singular tridiagonal system".into()));
        }
        let m = sub[i - 1] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut z = vec![0.0; n];
    if diag[n - 1].abs() < 1e-300 {
        return Err(MfgError::Numeric("singular tridiagonal system".into()));
    }
    z[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        z[i] = (rhs[i] - sup[i] * z[i + 1]) / diag[i];
    }
    Ok(z)
}

/// Standard boundary data: 0 on the left, the plateau 1/(ρ−κ²) on the right.
pub fn solve_z(
    policy: &PolicySolution,
    wave: &WaveSolution,
    params: &ModelParams,
    c: f64,
    trunc: &TruncationScheme,
) -> Result<Profile, MfgError> {
    solve_z_with_bc(policy, wave, params, c, trunc, (0.0, params.z_plateau()))
}

/// Same scheme with explicit exterior values (used by degenerate-data tests).
pub fn solve_z_with_bc(
    policy: &PolicySolution,
    wave: &WaveSolution,
    params: &ModelParams,
    c: f64,
    _trunc: &TruncationScheme,
    bc: (f64, f64),
) -> Result<Profile, MfgError> {
    let k2 = params.kappa_sq();
    if params.rho <= k2 {
        return Err(MfgError::Feasibility(format!(
            "rho = {} must exceed kappa^2 = {k2}",
            params.rho
        )));
    }
    let grid = policy.sigma.grid();
    let xs = grid.nodes();
    let n = xs.len();
    let b = c - 2.0 * k2;

    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];

    diag[0] = 1.0;
    rhs[0] = bc.0;
    diag[n - 1] = 1.0;
    rhs[n - 1] = bc.1;

    for i in 1..n - 1 {
        let hm = xs[i] - xs[i - 1];
        let hp = xs[i + 1] - xs[i];
        // Second derivative on a nonuniform 3-point stencil.
        let d2_sub = 2.0 / (hm * (hm + hp));
        let d2_sup = 2.0 / (hp * (hm + hp));
        let d2_diag = -(d2_sub + d2_sup);
        // First derivative: central, switching to upwind when the cell
        // Péclet number |b|h/κ² exceeds 2.
        let peclet = b.abs() * hm.max(hp) / k2;
        let (d1_sub, d1_diag, d1_sup) = if peclet <= 2.0 {
            (
                -hp / (hm * (hm + hp)),
                (hp - hm) / (hm * hp),
                hm / (hp * (hm + hp)),
            )
        } else if b > 0.0 {
            (-1.0 / hm, 1.0 / hm, 0.0)
        } else {
            (0.0, -1.0 / hp, 1.0 / hp)
        };
        let zero_order = (params.rho - k2)
            + policy.kernel.eval(xs[i]) * wave.w.eval(xs[i]);
        sub[i - 1] = -k2 * d2_sub + b * d1_sub;
        diag[i] = -k2 * d2_diag + b * d1_diag + zero_order;
        sup[i] = -k2 * d2_sup + b * d1_sup;
        rhs[i] = 1.0 - policy.sigma.values()[i];
    }

    let z = solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs)?;
    // Exterior data of the truncated problem: constant on both sides.
    let left = LeftTail::flat(z[0]);
    let right = RightTail::flat();
    Ok(Profile::new(grid.clone(), z, left, right)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha::LearningTech;
    use crate::config::NumericsConfig;
    use crate::grid::make_grid;
    use crate::kpp::{solve_wave, Kernel};
    use crate::mfg::ChiCutoff;
    use crate::profile::Profile;

    fn setup() -> (PolicySolution, WaveSolution, ModelParams, TruncationScheme) {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        let params =
            ModelParams::new(1.0, 3.0, LearningTech::power(2.0, 0.5).unwrap()).unwrap();
        // Policy: σ = 1 left of 0, decaying right of it.
        let sigma = Profile::from_fn(
            g.clone(),
            |x| if x <= 0.0 { 1.0 } else { (-x).exp() },
            LeftTail::flat(1.0),
            RightTail::decay(1.0),
        )
        .unwrap();
        let a_of = |x: f64| 2.0 * (if x <= 0.0 { 1.0f64 } else { (-x).exp() }).sqrt();
        let kernel = Kernel::from_fn(g.clone(), a_of, 2.0, 0.0, 25).unwrap();
        let wave = solve_wave(&kernel, 2.4, 0.7, &NumericsConfig::default()).unwrap();
        let policy = PolicySolution {
            sigma,
            kernel,
            x0: 0.0,
        };
        let trunc = TruncationScheme::new(20.0, ChiCutoff::ExpCutoff).unwrap();
        (policy, wave, params, trunc)
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let (mut policy, wave, params, trunc) = setup();
        // σ ≡ 1 everywhere: right side vanishes; both boundaries at 0.
        policy.sigma = Profile::constant(policy.sigma.grid().clone(), 1.0).unwrap();
        let z = solve_z_with_bc(&policy, &wave, &params, 2.4, &trunc, (0.0, 0.0)).unwrap();
        for &v in z.values() {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn plateau_and_monotonicity() {
        let (policy, wave, params, trunc) = setup();
        let z = solve_z(&policy, &wave, &params, 2.4, &trunc).unwrap();
        let vals = z.values();
        // Right boundary value and the interior plateau 1/(ρ−κ²) = 0.5.
        assert_eq!(*vals.last().unwrap(), 0.5);
        let near_right = z.eval(15.0);
        assert!((near_right - 0.5).abs() < 1e-3, "plateau {near_right}");
        // Bounds and monotonicity.
        assert!(vals.iter().all(|&v| (-1e-12..=0.5 + 1e-12).contains(&v)));
        assert!(z.is_nondecreasing());
    }

    #[test]
    fn interior_lower_bound_with_universal_constant() {
        // z(x+1) ≥ (1 − sup_{(x,x+2)} σ) / (C(1+κ²+c+ρ+sup A·sup w)), C = 8.
        let (policy, wave, params, trunc) = setup();
        let c = 2.4;
        let z = solve_z(&policy, &wave, &params, c, &trunc).unwrap();
        let xs = z.grid().nodes();
        let sup_aw: f64 = xs
            .iter()
            .map(|&x| policy.kernel.eval(x) * wave.w.eval(x))
            .fold(0.0, f64::max);
        let denom = 8.0 * (1.0 + params.kappa_sq() + c + params.rho + sup_aw);
        for (i, &x) in xs.iter().enumerate() {
            if x + 2.0 > z.grid().x_right() {
                break;
            }
            let sup_sigma = xs
                .iter()
                .zip(policy.sigma.values())
                .filter(|(&y, _)| y >= x && y <= x + 2.0)
                .map(|(_, &s)| s)
                .fold(0.0, f64::max);
            let floor = (1.0 - sup_sigma) / denom;
            let z_mid = z.eval(x + 1.0);
            assert!(
                z_mid >= floor - 1e-12,
                "floor violated at x={x}: z={z_mid} < {floor}"
            );
            let _ = i;
        }
    }
}
