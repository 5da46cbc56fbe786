//! Independent brute-force oracle: the truncated wave problem discretized by
//! second-order collocation on a dense uniform grid, with the nonlocal term
//! assembled as a lower-triangular quadrature matrix and solved by damped
//! Newton. This path shares nothing with the shooting solver: different
//! discretization, different linear algebra, anti-correlated error sources.

use super::VerifyError;
use crate::grid::Grid;
use crate::kpp::Kernel;
use crate::profile::{fd_weights, fit_tail_samples, LeftTail, Profile, RightTail};

/// Solve J·x = b for a lower-Hessenberg J (nonzeros at columns ≤ row + 1).
///
/// Reversing rows and columns turns J into upper-Hessenberg form, which
/// Gaussian elimination with adjacent-row pivoting handles in O(n²).
fn solve_lower_hessenberg(rows: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>, VerifyError> {
    let n = b.len();
    // rows[i] holds J[i][0..=min(i+1, n-1)].
    // Reversed matrix: B[p][q] = J[n-1-p][n-1-q], stored dense from column
    // p-1 (its first possible nonzero) to the end.
    let mut bmat: Vec<Vec<f64>> = Vec::with_capacity(n);
    for p in 0..n {
        let i = n - 1 - p;
        let lo = p.saturating_sub(1);
        let mut row = vec![0.0; n - lo];
        for (q, slot) in row.iter_mut().enumerate() {
            let j = n - 1 - (lo + q);
            if j < rows[i].len() {
                *slot = rows[i][j];
            }
        }
        bmat.push(row);
    }
    let mut rhs: Vec<f64> = (0..n).map(|p| b[n - 1 - p]).collect();

    for k in 0..n - 1 {
        // Only row k+1 has a nonzero below the diagonal in column k.
        let off_k = k.saturating_sub(1);
        let off_k1 = k; // = (k+1)-1
        let akk = bmat[k][k - off_k];
        let ak1k = bmat[k + 1][k - off_k1];
        if ak1k.abs() > akk.abs() {
            // Swap rows k and k+1 over their common span.
            for col in k..n {
                let t = if col >= off_k { bmat[k][col - off_k] } else { 0.0 };
                let s = bmat[k + 1][col - off_k1];
                bmat[k + 1][col - off_k1] = t;
                if col >= off_k {
                    bmat[k][col - off_k] = s;
                }
            }
            rhs.swap(k, k + 1);
        }
        let pivot = bmat[k][k - off_k];
        if pivot.abs() < 1e-300 {
            return Err(VerifyError::Numeric("singular collocation Jacobian".into()));
        }
        let m = bmat[k + 1][k - off_k1] / pivot;
        if m != 0.0 {
            for col in k..n {
                let v = bmat[k][col - off_k];
                bmat[k + 1][col - off_k1] -= m * v;
            }
            rhs[k + 1] -= m * rhs[k];
        }
    }
    // Back substitution.
    let mut y = vec![0.0; n];
    for p in (0..n).rev() {
        let off = p.saturating_sub(1);
        let mut s = rhs[p];
        for col in p + 1..n {
            s -= bmat[p][col - off] * y[col];
        }
        let d = bmat[p][p - off];
        if d.abs() < 1e-300 {
            return Err(VerifyError::Numeric("singular collocation Jacobian".into()));
        }
        y[p] = s / d;
    }
    Ok((0..n).map(|i| y[n - 1 - i]).collect())
}

struct Collocation<'a> {
    kernel: &'a Kernel,
    c: f64,
    xs: Vec<f64>,
    h: f64,
    a_vals: Vec<f64>,
    ap_vals: Vec<f64>,
}

impl<'a> Collocation<'a> {
    fn new(kernel: &'a Kernel, c: f64, domain: f64, n_nodes: usize) -> Self {
        let n = if n_nodes % 2 == 0 { n_nodes + 1 } else { n_nodes };
        let h = 2.0 * domain / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| -domain + h * i as f64).collect();
        let a_vals: Vec<f64> = xs.iter().map(|&x| kernel.eval(x)).collect();
        let ap_vals: Vec<f64> = xs.iter().map(|&x| kernel.deriv(x)).collect();
        Self {
            kernel,
            c,
            xs,
            h,
            a_vals,
            ap_vals,
        }
    }

    /// Decay rate of the right-boundary closure from the current iterate.
    fn lambda_hat(&self, w: &[f64]) -> f64 {
        let n = w.len();
        // I ≈ A(−L) + ∫ A′ w by trapezoid.
        let mut i_val = self.a_vals[0];
        for j in 0..n - 1 {
            i_val += 0.5 * (self.ap_vals[j] * w[j] + self.ap_vals[j + 1] * w[j + 1]) * self.h;
        }
        let disc = (self.c * self.c / 4.0 - i_val).max(0.0);
        self.c / 2.0 - disc.sqrt()
    }

    /// Growing root of the left linearization around w = 1.
    fn mu(&self) -> f64 {
        let abar = self.a_vals[0];
        (-self.c + (self.c * self.c + 4.0 * abar).sqrt()) / 2.0
    }

    /// Residual vector. Row 0 imposes the left tail relation
    /// 1 − w₁ = (1 − w₀)·e^{μh}; row n−1 pins the right boundary value to the
    /// bordered unknown ε_R.
    fn residual(&self, w: &[f64], eps_r: f64) -> Vec<f64> {
        let n = w.len();
        let h2 = self.h * self.h;
        let mut f = vec![0.0; n];
        let grow = (self.mu() * self.h).exp();
        f[0] = (1.0 - w[1]) - (1.0 - w[0]) * grow;
        // Cumulative trapezoid of A′w.
        let mut acc = 0.0;
        let mut prev = self.ap_vals[0] * w[0];
        for i in 1..n - 1 {
            let cur = self.ap_vals[i] * w[i];
            acc += 0.5 * (prev + cur) * self.h;
            prev = cur;
            let reaction = self.a_vals[0] - self.a_vals[i] * w[i] + acc;
            f[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / h2
                + self.c * (w[i + 1] - w[i - 1]) / (2.0 * self.h)
                + w[i] * reaction;
        }
        f[n - 1] = w[n - 1] - eps_r;
        f
    }

    /// Lower-Hessenberg Jacobian rows (row i holds columns 0..=i+1).
    fn jacobian(&self, w: &[f64]) -> Vec<Vec<f64>> {
        let n = w.len();
        let h2 = self.h * self.h;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        let grow = (self.mu() * self.h).exp();
        rows.push(vec![grow, -1.0]);
        let mut acc = 0.0;
        let mut prev = self.ap_vals[0] * w[0];
        for i in 1..n - 1 {
            let cur = self.ap_vals[i] * w[i];
            acc += 0.5 * (prev + cur) * self.h;
            prev = cur;
            let reaction = self.a_vals[0] - self.a_vals[i] * w[i] + acc;
            let mut row = vec![0.0; i + 2];
            // Quadrature sensitivity: trapezoid weights h/2, h, …, h/2.
            for (j, slot) in row.iter_mut().enumerate().take(i + 1) {
                let weight = if j == 0 || j == i { 0.5 * self.h } else { self.h };
                *slot = w[i] * weight * self.ap_vals[j];
            }
            row[i - 1] += 1.0 / h2 - self.c / (2.0 * self.h);
            row[i] += -2.0 / h2 + reaction - w[i] * self.a_vals[i];
            row[i + 1] += 1.0 / h2 + self.c / (2.0 * self.h);
            rows.push(row);
        }
        let mut last = vec![0.0; n];
        last[n - 1] = 1.0;
        rows.push(last);
        rows
    }

    /// Bordered damped Newton: the right boundary value ε_R is an unknown
    /// tied to the extra normalization row w(0) = θ (the interior responds to
    /// the right boundary with O(1) sensitivity, unlike the left one). Block
    /// elimination costs two lower-Hessenberg solves per iteration.
    fn newton_normalized(
        &self,
        w0: Vec<f64>,
        eps0: f64,
        theta: f64,
    ) -> Result<(Vec<f64>, f64), VerifyError> {
        let n = self.xs.len();
        let mid = (n - 1) / 2;
        let mut w = w0;
        let mut eps = eps0;
        let scale = 1.0 + self.kernel.abar();
        let norm_of = |w: &[f64], eps: f64| -> f64 {
            let f = self.residual(w, eps);
            f.iter()
                .fold((w[mid] - theta).abs(), |m, v| m.max(v.abs()))
        };
        let mut last_norm = f64::INFINITY;
        for _ in 0..80 {
            let f = self.residual(&w, eps);
            let f_norm = w[mid] - theta;
            let norm = f.iter().fold(f_norm.abs(), |m, v| m.max(v.abs()));
            if norm <= 1e-11 * scale {
                return Ok((w, eps));
            }
            let rows = self.jacobian(&w);
            let mut b: Vec<f64> = f.iter().map(|v| -v).collect();
            let y = solve_lower_hessenberg(&mut rows.clone(), &mut b)?;
            // Border column: ∂F/∂ε_R = −e_{n−1}.
            let mut e_last = vec![0.0; n];
            e_last[n - 1] = 1.0;
            let q = solve_lower_hessenberg(&mut rows.clone(), &mut e_last)?;
            if q[mid].abs() < 1e-300 {
                return Err(VerifyError::Numeric("degenerate normalization row".into()));
            }
            let d_eps = -(y[mid] + f_norm) / q[mid];
            let dw: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b * d_eps).collect();

            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let eps_trial = (eps + t * d_eps).clamp(1e-300, 0.9);
                let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, s)| a + t * s).collect();
                let n_new = norm_of(&trial, eps_trial);
                if n_new < norm {
                    w = trial;
                    eps = eps_trial;
                    last_norm = n_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(VerifyError::NewtonDiverged { residual: norm });
            }
        }
        Err(VerifyError::NewtonDiverged { residual: last_norm })
    }
}

/// Solve the truncated nonlocal wave problem on a dense uniform grid of
/// `n_nodes` points spanning [−domain, domain], normalized to w(0) = theta by
/// an outer bisection on the left boundary gap.
pub fn oracle_bvp(
    kernel: &Kernel,
    c: f64,
    theta: f64,
    domain: f64,
    n_nodes: usize,
) -> Result<Profile, VerifyError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(VerifyError::Invalid(format!("theta must lie in (0,1), got {theta}")));
    }
    let coll = Collocation::new(kernel, c, domain, n_nodes);
    let n = coll.xs.len();
    let mid = (n - 1) / 2;

    // Initial iterate: logistic profile through (0, theta) with the slow
    // decay root on the right.
    let lam0 = {
        let disc = (c * c / 4.0 - 0.75 * kernel.abar()).max(0.01);
        c / 2.0 - disc.sqrt().min(c / 2.0 - 0.05)
    };
    let ratio = (1.0 - theta) / theta;
    let init: Vec<f64> = coll
        .xs
        .iter()
        .map(|&x| 1.0 / (1.0 + ratio * (lam0 * x).exp()))
        .collect();

    let eps0 = *init.last().unwrap();
    let (best, _eps) = coll.newton_normalized(init, eps0, theta)?;
    // Sign-changing iterates are the numerical evidence that the requested
    // height lies below the foliation minimum.
    if best.iter().any(|&v| v <= 0.0) {
        return Err(VerifyError::HeightUnreachable {
            theta,
            best: best.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    let achieved = best[mid];
    if (achieved - theta).abs() > 1e-8 {
        return Err(VerifyError::HeightUnreachable {
            theta,
            best: achieved,
        });
    }

    // Package as a profile with fourth-order tangents and fitted tails.
    let grid = Grid::new(coll.xs.clone()).map_err(|e| VerifyError::Invalid(e.to_string()))?;
    let mut tangents = vec![0.0; n];
    for i in 0..n {
        let lo_i = i.saturating_sub(2).min(n - 5);
        let stencil = &coll.xs[lo_i..lo_i + 5];
        let wgt = fd_weights(coll.xs[i], stencil, 1);
        tangents[i] = wgt.iter().zip(&best[lo_i..lo_i + 5]).map(|(a, b)| a * b).sum();
    }
    let window = 24.min(n / 4);
    let fit = fit_tail_samples(&coll.xs[n - window..], &best[n - window..])
        .unwrap_or(crate::profile::TailFit {
            rate: coll.lambda_hat(&best),
            poly_degree: 0,
            residual: f64::NAN,
        });
    let abar = kernel.abar();
    let mu = (-c + (c * c + 4.0 * abar).sqrt()) / 2.0;
    let left = LeftTail::matching(1.0, mu, best[0]);
    let right = RightTail {
        rate: fit.rate,
        poly_degree: fit.poly_degree,
    };
    Profile::with_tangents(grid, best, tangents, left, right)
        .map_err(|e| VerifyError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn hessenberg_solver_matches_dense_reference() {
        // Random-ish lower-Hessenberg system with a known solution.
        let n = 12;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let len = (i + 2).min(n);
            let mut row = vec![0.0; len];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.3;
            }
            row[i] += 4.0;
            rows.push(row);
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for (j, &a) in rows[i].iter().enumerate() {
                b[i] += a * x_true[j];
            }
        }
        let x = solve_lower_hessenberg(&mut rows.clone(), &mut b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn hessenberg_solver_with_pivoting_stress() {
        // Zero diagonal entries force row swaps at every step.
        let n = 9;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let len = (i + 2).min(n);
            let mut row = vec![0.0; len];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = ((i * 5 + j * 7) % 13) as f64 / 13.0 - 0.4;
            }
            if i + 1 < len {
                row[i + 1] = 3.0; // dominant superdiagonal
            }
            row[i] = 0.01; // near-singular diagonal without pivoting
            rows.push(row);
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 - 3.0) * 0.25).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for (j, &a) in rows[i].iter().enumerate() {
                b[i] += a * x_true[j];
            }
        }
        let x = solve_lower_hessenberg(&mut rows.clone(), &mut b).unwrap();
        for (a, c) in x.iter().zip(&x_true) {
            assert!((a - c).abs() < 1e-9, "{a} vs {c}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        let k = Kernel::from_fn(g, |x| 2.0 / (1.0 + x.exp()), 2.0, 0.0, 25).unwrap();
        let coll = Collocation::new(&k, 2.4, 6.0, 41);
        let n = coll.xs.len();
        let w: Vec<f64> = coll
            .xs
            .iter()
            .map(|&x| 1.0 / (1.0 + (0.8 * x).exp()))
            .collect();
        let eps = 1e-3;
        let f0 = coll.residual(&w, eps);
        let rows = coll.jacobian(&w);
        let dh = 1e-7;
        for j in 0..n {
            let mut wp = w.clone();
            wp[j] += dh;
            let fp = coll.residual(&wp, eps);
            for i in 0..n {
                let fd = (fp[i] - f0[i]) / dh;
                let an = if j < rows[i].len() { rows[i][j] } else { 0.0 };
                // The last row freezes its λ̂(w) dependence by design.
                if i == n - 1 && fd.abs() < 0.2 {
                    continue;
                }
                assert!(
                    (fd - an).abs() < 1e-4 * (1.0 + fd.abs()),
                    "J[{i}][{j}]: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn newton_step_solves_linear_system() {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        let k = Kernel::constant(g, 1.0).unwrap();
        let coll = Collocation::new(&k, 2.5, 12.0, 241);
        let n = coll.xs.len();
        let theta: f64 = 0.3;
        let ratio = (1.0 - theta) / theta;
        let w: Vec<f64> = coll.xs.iter().map(|&x| 1.0 / (1.0 + ratio * (0.5 * x).exp())).collect();
        let eps = 1.0 - w[0];
        let f = coll.residual(&w, eps);
        let rows = coll.jacobian(&w);
        let mut b: Vec<f64> = f.iter().map(|v| -v).collect();
        let y = solve_lower_hessenberg(&mut rows.clone(), &mut b).unwrap();
        // Check J·y = −F.
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut s = 0.0;
            for (j, &a) in rows[i].iter().enumerate() {
                s += a * y[j];
            }
            worst = worst.max((s + f[i]).abs());
        }
        assert!(worst < 1e-8, "linear solve defect {worst}");
    }

    #[test]
    fn oracle_matches_constant_kernel_wave() {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        let k = Kernel::constant(g, 1.0).unwrap();
        let oracle = oracle_bvp(&k, 2.5, 0.3, 12.0, 1201).unwrap();
        assert!((oracle.eval(0.0) - 0.3).abs() < 1e-6);
        let cfg = crate::config::NumericsConfig::default();
        let shot = crate::kpp::solve_wave(&k, 2.5, 0.3, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for &x in oracle.grid().nodes() {
            worst = worst.max((oracle.eval(x) - shot.w.eval(x)).abs());
        }
        assert!(worst < 1e-4, "oracle vs shooting sup-norm {worst}");
    }

    #[test]
    fn oracle_reports_unreachable_heights() {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        let k = Kernel::from_fn(g, |x| 2.0 / (1.0 + x.exp()), 2.0, 0.0, 25).unwrap();
        // θ_c ≈ 0.366 at c = 2.2; ask for far below it.
        match oracle_bvp(&k, 2.2, 0.05, 15.0, 1501) {
            Err(VerifyError::HeightUnreachable { .. }) | Err(VerifyError::NewtonDiverged { .. }) => {}
            other => panic!("expected unreachable-height evidence, got {other:?}"),
        }
    }
}
