//! The policy argmax: σ(x) = (α′)⁻¹(e^x / M(x)) saturated at 1, where
//! M(x) = ∫_x^∞ z e^y w χ dy under the active cutoff (plus 1/n for the
//! additive scheme).

use super::{ChiCutoff, MfgError, ModelParams, PolicySolution, TruncationScheme};
use crate::kpp::{Kernel, WaveSolution};
use crate::profile::{fit_right_tail, hermite_monomials, LeftTail, Profile, RightTail};
use crate::quad::cubic_exp_moment;

/// M(x_i) at every node of `z`'s grid, accumulated from the right.
///
/// Inside the grid the integrand is z·w·e^y (the exponential cutoff only
/// bites beyond the right end, which is the truncation point n). Cells use a
/// cubic model of z·w against the exact exponential weight.
pub(crate) fn cumulative_meeting_integral(
    z: &Profile,
    wave: &WaveSolution,
    trunc: &TruncationScheme,
) -> Vec<f64> {
    let xs = z.grid().nodes();
    let n_nodes = xs.len();
    let x_trunc = z.grid().x_right();

    let g = |x: f64| z.eval(x) * wave.w.eval(x);
    let dg = |x: f64| z.deriv(x) * wave.w.eval(x) + z.eval(x) * wave.w.deriv(x);

    let mut m = vec![0.0; n_nodes];
    m[n_nodes - 1] = match trunc.chi {
        ChiCutoff::Additive => 0.0,
        ChiCutoff::ExpCutoff => tail_beyond_truncation(z, wave, x_trunc),
    };
    for i in (0..n_nodes - 1).rev() {
        let h = xs[i + 1] - xs[i];
        let coeffs = hermite_monomials(g(xs[i]), g(xs[i + 1]), dg(xs[i]), dg(xs[i + 1]), h);
        m[i] = m[i + 1] + xs[i].exp() * cubic_exp_moment(coeffs, h, 1.0);
    }
    if matches!(trunc.chi, ChiCutoff::Additive) {
        for v in &mut m {
            *v += 1.0 / trunc.n;
        }
    }
    m
}

/// ∫_n^∞ z(n)·w(y)·e^y·e^{−2(y−n)} dy: the exponential-cutoff completion.
fn tail_beyond_truncation(z: &Profile, wave: &WaveSolution, x_trunc: f64) -> f64 {
    let z_end = z.eval(x_trunc);
    let w_grid_end = wave.w.grid().x_right();
    let mut total = 0.0;
    // Wave samples may extend past the truncation point; integrate them
    // against e^{2n−y} cell by cell.
    if w_grid_end > x_trunc {
        let xs = wave.w.grid().nodes();
        let start = xs.partition_point(|&x| x < x_trunc);
        let mut a = x_trunc;
        for i in start.max(1) - 1..xs.len() - 1 {
            let b = xs[i + 1];
            if b <= x_trunc {
                continue;
            }
            let lo = a.max(xs[i]);
            let h = b - lo;
            if h <= 0.0 {
                continue;
            }
            let g0 = wave.w.eval(lo);
            let g1 = wave.w.eval(b);
            let d0 = wave.w.deriv(lo);
            let d1 = wave.w.deriv(b);
            let coeffs = hermite_monomials(g0, g1, d0, d1, h);
            total += z_end * (2.0 * x_trunc - lo).exp() * cubic_exp_moment(coeffs, h, -1.0);
            a = b;
        }
    }
    // Beyond both the truncation point and the wave grid: closed form for
    // (c0 + c1·t)·e^{−(1+λ)t} from the wave tail descriptors.
    let anchor = w_grid_end.max(x_trunc);
    let rt = wave.w.right_tail();
    let s0 = anchor - w_grid_end;
    let base = wave.w.value_at_end() * (-rt.rate * s0).exp();
    let (c0, c1) = if rt.poly_degree == 1 {
        (base * (1.0 + s0), base)
    } else {
        (base, 0.0)
    };
    let nu = 1.0 + rt.rate;
    let weight = (2.0 * x_trunc - anchor).exp();
    total += z_end * weight * (c0 / nu + c1 / (nu * nu));
    total
}

/// Compute σ, its saturation threshold and the induced kernel α∘σ from a
/// value slope and a wave.
pub fn policy_from_value(
    z: &Profile,
    wave: &WaveSolution,
    params: &ModelParams,
    trunc: &TruncationScheme,
) -> Result<PolicySolution, MfgError> {
    let tech = &params.tech;
    let m = cumulative_meeting_integral(z, wave, trunc);
    let xs = z.grid().nodes();
    let d1 = tech.deriv(1.0)?;

    let mut sigma = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let s = if m[i] <= 0.0 {
            0.0
        } else {
            let price = x.exp() / m[i];
            if price <= d1 {
                1.0
            } else {
                tech.inv_deriv(price)?
            }
        };
        sigma.push(s);
    }
    // The price ratio e^x/M is strictly increasing, so σ is nonincreasing up
    // to rounding; enforce it exactly.
    for i in 1..sigma.len() {
        if sigma[i] > sigma[i - 1] {
            sigma[i] = sigma[i - 1];
        }
    }
    build_policy(z.grid().clone(), sigma, tech)
}

/// Assemble a [`PolicySolution`] from σ samples: saturation threshold, tail
/// descriptors and the induced kernel α∘σ.
pub(crate) fn build_policy(
    grid: crate::grid::Grid,
    sigma: Vec<f64>,
    tech: &crate::alpha::LearningTech,
) -> Result<PolicySolution, MfgError> {
    if sigma[0] < 1.0 {
        return Err(MfgError::Numeric(format!(
            "saturation region lies left of the grid (sigma(xL) = {})",
            sigma[0]
        )));
    }
    let x0 = grid
        .nodes()
        .iter()
        .zip(&sigma)
        .take_while(|(_, &s)| s >= 1.0)
        .map(|(&x, _)| x)
        .last()
        .unwrap_or(f64::NEG_INFINITY);

    let sigma_prof = {
        let draft = Profile::new(grid.clone(), sigma.clone(), LeftTail::flat(1.0), RightTail::flat())?;
        let rate = fit_right_tail(&draft, 12).map(|f| f.rate).unwrap_or(0.0);
        Profile::new(grid.clone(), sigma.clone(), LeftTail::flat(1.0), RightTail::decay(rate))?
    };

    let a_vals: Vec<f64> = sigma
        .iter()
        .map(|&s| tech.eval(s))
        .collect::<Result<_, _>>()?;
    let kernel_prof = {
        let draft = Profile::new(
            grid.clone(),
            a_vals.clone(),
            LeftTail::flat(tech.alpha1()),
            RightTail::flat(),
        )?;
        let rate = fit_right_tail(&draft, 12).map(|f| f.rate).unwrap_or(0.0);
        Profile::new(
            grid,
            a_vals,
            LeftTail::flat(tech.alpha1()),
            RightTail::decay(rate),
        )?
    };
    let kernel = Kernel::new(kernel_prof, tech.alpha1(), 0.0)?;

    Ok(PolicySolution {
        sigma: sigma_prof,
        kernel,
        x0,
    })
}
