//! Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince) for small stiff-free
//! systems. Steps never cross the caller-supplied targets, so solution values
//! at grid nodes are exact integration outputs rather than dense output.

/// Controller outcome for a single attempted step.
pub enum StepOutcome<const N: usize> {
    Accepted { y: [f64; N], err: f64 },
    Rejected { err: f64 },
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub struct Rk45<const N: usize> {
    /// Error control scale: per-component tolerance is
    /// `atol·(|y| + abs_floor)`.
    pub atol: f64,
    pub abs_floor: f64,
    pub h_min: f64,
}

impl<const N: usize> Rk45<N> {
    pub fn new(atol: f64) -> Self {
        Self {
            atol,
            abs_floor: 1e-4,
            h_min: 1e-13,
        }
    }

    fn try_step(
        &self,
        f: &impl Fn(f64, &[f64; N]) -> [f64; N],
        x: f64,
        y: &[f64; N],
        h: f64,
    ) -> StepOutcome<N> {
        let k1 = f(x, y);
        let mut t = [0.0; N];
        for i in 0..N {
            t[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(x + h / 5.0, &t);
        for i in 0..N {
            t[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(x + 3.0 * h / 10.0, &t);
        for i in 0..N {
            t[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(x + 4.0 * h / 5.0, &t);
        for i in 0..N {
            t[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(x + 8.0 * h / 9.0, &t);
        for i in 0..N {
            t[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let k6 = f(x + h, &t);
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let k7 = f(x + h, &y_new);
        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.atol * (y[i].abs().max(y_new[i].abs()) + self.abs_floor);
            err = err.max((e / scale).abs());
        }
        if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
            StepOutcome::Accepted { y: y_new, err }
        } else {
            StepOutcome::Rejected { err }
        }
    }

    /// Integrate from (x0, y0) to x1 ≤ x0 + huge, capping steps at `h_max` and
    /// never overshooting x1. Returns Err(()) when the controller stalls.
    pub fn advance(
        &self,
        f: &impl Fn(f64, &[f64; N]) -> [f64; N],
        x0: f64,
        y0: [f64; N],
        x1: f64,
        h_max: f64,
        h_init: &mut f64,
    ) -> Result<[f64; N], ()> {
        let mut x = x0;
        let mut y = y0;
        let mut h = h_init.min(h_max).max(self.h_min);
        while x < x1 {
            h = h.min(h_max).min(x1 - x);
            match self.try_step(f, x, &y, h) {
                StepOutcome::Accepted { y: y_new, err } => {
                    x += h;
                    y = y_new;
                    let grow = if err > 0.0 {
                        (0.9 * err.powf(-0.2)).min(5.0)
                    } else {
                        5.0
                    };
                    h = (h * grow).min(h_max);
                    *h_init = h;
                }
                StepOutcome::Rejected { err } => {
                    let shrink = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).max(0.1)
                    } else {
                        0.1
                    };
                    h *= shrink;
                    if h < self.h_min {
                        return Err(());
                    }
                }
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_machine_tolerance() {
        let rk: Rk45<1> = Rk45::new(1e-12);
        let f = |_x: f64, y: &[f64; 1]| [-y[0]];
        let mut h = 0.01;
        let y = rk.advance(&f, 0.0, [1.0], 5.0, 0.5, &mut h).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn linear_oscillator_energy() {
        let rk: Rk45<2> = Rk45::new(1e-11);
        let f = |_x: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut h = 0.01;
        let y = rk
            .advance(&f, 0.0, [1.0, 0.0], std::f64::consts::PI, 0.3, &mut h)
            .unwrap();
        assert!((y[0] + 1.0).abs() < 1e-8);
        assert!(y[1].abs() < 1e-8);
    }

    #[test]
    fn never_overshoots_target() {
        let rk: Rk45<1> = Rk45::new(1e-9);
        let f = |x: f64, _y: &[f64; 1]| [x.cos()];
        let mut h = 10.0;
        let y = rk.advance(&f, 0.0, [0.0], 1.0, 10.0, &mut h).unwrap();
        assert!((y[0] - 1.0f64.sin()).abs() < 1e-8);
    }
}
