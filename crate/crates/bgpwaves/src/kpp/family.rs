//! The foliation at a fixed speed: waves at a list of heights, the minimal
//! height when it exists, and the ordering/monotonicity guarantees.

use super::{critical_wave, solve_wave, Kernel, KppError, WaveSolution};
use crate::config::NumericsConfig;
use rayon::prelude::*;

#[derive(Debug)]
pub struct FamilyEntry {
    pub theta: f64,
    pub result: Result<WaveSolution, KppError>,
}

#[derive(Debug)]
pub struct FamilyResult {
    pub entries: Vec<FamilyEntry>,
    /// Minimal admissible height, present when 2√ulA < c < 2√Ā.
    pub theta_c: Option<f64>,
    /// Successful members are pointwise strictly ordered at every common node.
    pub strictly_ordered: bool,
    /// I is strictly decreasing along increasing θ.
    pub i_strictly_decreasing: bool,
}

/// Solve the family at each height (members run in parallel; per-height
/// failures are reported per entry, not as a global abort).
pub fn wave_family(
    kernel: &Kernel,
    c: f64,
    thetas: &[f64],
    cfg: &NumericsConfig,
) -> Result<FamilyResult, KppError> {
    let threshold = kernel.min_speed();
    if c <= threshold {
        return Err(KppError::NoWave { c, threshold });
    }
    let theta_c = if c < kernel.max_critical_speed() {
        Some(critical_wave(kernel, c, cfg)?.theta)
    } else {
        None
    };
    let entries: Vec<FamilyEntry> = thetas
        .par_iter()
        .map(|&theta| FamilyEntry {
            theta,
            result: solve_wave(kernel, c, theta, cfg),
        })
        .collect();

    let mut ok: Vec<&WaveSolution> = entries
        .iter()
        .filter_map(|e| e.result.as_ref().ok())
        .collect();
    ok.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());

    let mut ordered = true;
    for pair in ok.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let n_common = lo.w.grid().len().min(hi.w.grid().len());
        for i in 0..n_common {
            if !(lo.w.values()[i] < hi.w.values()[i]) {
                ordered = false;
                break;
            }
        }
    }
    let mut i_decreasing = true;
    for pair in ok.windows(2) {
        if !(pair[1].i_value < pair[0].i_value) {
            i_decreasing = false;
        }
    }
    Ok(FamilyResult {
        entries,
        theta_c,
        strictly_ordered: ordered,
        i_strictly_decreasing: i_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn logistic_kernel() -> Kernel {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        Kernel::from_fn(g, |x| 2.0 / (1.0 + x.exp()), 2.0, 0.0, 25).unwrap()
    }

    #[test]
    fn constant_kernel_family_shares_i() {
        let g = make_grid(-20.0, 20.0, 801, 1.0).unwrap();
        let k = Kernel::constant(g, 1.5).unwrap();
        let fam = wave_family(&k, 3.0, &[0.2, 0.5, 0.8], &NumericsConfig::default()).unwrap();
        assert!(fam.theta_c.is_none());
        assert!(fam.strictly_ordered);
        for e in &fam.entries {
            let w = e.result.as_ref().unwrap();
            assert!((w.i_value - 1.5).abs() < 1e-6, "I {}", w.i_value);
        }
    }

    #[test]
    fn critical_range_family_fills_interval() {
        let k = logistic_kernel();
        let cfg = NumericsConfig::default();
        let fam = wave_family(&k, 2.2, &[0.5, 0.65, 0.8, 0.95], &cfg).unwrap();
        let tc = fam.theta_c.unwrap();
        assert!(tc > 0.0 && tc < 0.5, "theta_c {tc}");
        assert!(fam.strictly_ordered);
        assert!(fam.i_strictly_decreasing);
        // I values live in (ulA, c²/4] = (0, 1.21].
        for e in &fam.entries {
            let w = e.result.as_ref().unwrap();
            assert!(w.i_value > 0.0 && w.i_value <= 1.21 + 1e-9);
        }
    }

    #[test]
    fn above_range_family_i_inside_kernel_limits() {
        let k = logistic_kernel();
        let cfg = NumericsConfig::default();
        let fam = wave_family(&k, 3.0, &[0.2, 0.5, 0.8], &cfg).unwrap();
        assert!(fam.theta_c.is_none());
        assert!(fam.i_strictly_decreasing);
        for e in &fam.entries {
            let w = e.result.as_ref().unwrap();
            assert!(w.i_value > 0.0 && w.i_value < 2.0);
        }
    }

    #[test]
    fn per_theta_failures_do_not_abort() {
        let k = logistic_kernel();
        let cfg = NumericsConfig::default();
        let fam = wave_family(&k, 2.2, &[0.01, 0.9], &cfg).unwrap();
        assert!(fam.entries[0].result.is_err());
        assert!(fam.entries[1].result.is_ok());
    }
}
