//! Discretization of the line: strictly increasing node sets spanning [xL, xR]
//! with optional grading toward the boundaries.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid argument: {0}")]
    Argument(String),
}

/// Strictly increasing abscissae x0 < ... < xN spanning [xL, xR] with xL < 0 < xR.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(nodes: Vec<f64>) -> Result<Self, GridError> {
        if nodes.len() < 16 {
            return Err(GridError::Argument(format!(
                "need at least 16 nodes, got {}",
                nodes.len()
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(GridError::Argument("nodes must be strictly increasing".into()));
            }
        }
        if !(nodes[0] < 0.0 && *nodes.last().unwrap() > 0.0) {
            return Err(GridError::Argument("grid must satisfy xL < 0 < xR".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_left(&self) -> f64 {
        self.nodes[0]
    }

    pub fn x_right(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Index of the cell [x_i, x_{i+1}] containing x, clamped to the ends.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return 0;
        }
        if x >= self.nodes[n - 1] {
            return n - 2;
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.nodes[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Index of the node at 0; every constructed grid contains the origin.
    pub fn origin_index(&self) -> Option<usize> {
        self.nodes.iter().position(|&x| x == 0.0)
    }
}

/// Build a grid on [xL, xR] containing the origin, graded so boundary spacing
/// is `stretch` times the spacing at 0. `stretch = 1` gives uniform spacing on
/// each side.
///
/// Each half is the image of a uniform parameter under the odd cubic
/// t ↦ (t + β t³)/(1 + β) with β = (stretch − 1)/3, which makes node gaps
/// increase monotonically away from the origin.
pub fn make_grid(x_left: f64, x_right: f64, n_core: usize, stretch: f64) -> Result<Grid, GridError> {
    if !(x_left < x_right) {
        return Err(GridError::Argument(format!("xL={x_left} must be < xR={x_right}")));
    }
    if !(x_left < 0.0 && x_right > 0.0) {
        return Err(GridError::Argument("domain must straddle the origin".into()));
    }
    if n_core < 16 {
        return Err(GridError::Argument(format!("n_core={n_core} < 16")));
    }
    if !(stretch >= 1.0) {
        return Err(GridError::Argument(format!("stretch={stretch} must be >= 1")));
    }
    let cells = n_core - 1;
    let frac_left = -x_left / (x_right - x_left);
    let mut n_left = (cells as f64 * frac_left).round() as usize;
    n_left = n_left.clamp(4, cells - 4);
    let n_right = cells - n_left;
    let beta = (stretch - 1.0) / 3.0;
    let phi = |t: f64| (t + beta * t * t * t) / (1.0 + beta);

    let mut nodes = Vec::with_capacity(n_core);
    for j in (1..=n_left).rev() {
        let t = j as f64 / n_left as f64;
        nodes.push(x_left * phi(t));
    }
    nodes.push(0.0);
    for j in 1..=n_right {
        let t = j as f64 / n_right as f64;
        nodes.push(x_right * phi(t));
    }
    // Pin the endpoints exactly.
    nodes[0] = x_left;
    let last = nodes.len() - 1;
    nodes[last] = x_right;
    Grid::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_examples() {
        let g = make_grid(-10.0, 10.0, 21, 1.0).unwrap();
        assert_eq!(g.len(), 21);
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - 1.0).abs() < 1e-12);
        }
        let g = make_grid(-30.0, 30.0, 601, 1.0).unwrap();
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn graded_boundary_to_center_ratio() {
        let g = make_grid(-30.0, 30.0, 301, 2.0).unwrap();
        let n = g.nodes();
        let k = g.origin_index().unwrap();
        let center_gap = n[k + 1] - n[k];
        let boundary_gap = n[n.len() - 1] - n[n.len() - 2];
        let ratio = boundary_gap / center_gap;
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
        // Gaps increase monotonically away from 0 on each side.
        for i in k..n.len() - 2 {
            assert!(n[i + 2] - n[i + 1] >= n[i + 1] - n[i] - 1e-12);
        }
        for i in (1..=k).rev() {
            assert!(n[i] - n[i - 1] >= n[i + 1] - n[i] - 1e-12);
        }
    }

    #[test]
    fn contains_origin_and_endpoints() {
        let g = make_grid(-7.3, 12.9, 64, 1.5).unwrap();
        assert_eq!(g.x_left(), -7.3);
        assert_eq!(g.x_right(), 12.9);
        assert!(g.origin_index().is_some());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(make_grid(10.0, -10.0, 21, 1.0).is_err());
        assert!(make_grid(-10.0, 10.0, 8, 1.0).is_err());
        assert!(make_grid(-10.0, 10.0, 21, 0.5).is_err());
        assert!(make_grid(1.0, 10.0, 21, 1.0).is_err());
    }

    #[test]
    fn locate_finds_cells() {
        let g = make_grid(-10.0, 10.0, 21, 1.0).unwrap();
        assert_eq!(g.locate(-10.0), 0);
        assert_eq!(g.locate(-9.5), 0);
        assert_eq!(g.locate(0.2), 10);
        assert_eq!(g.locate(10.0), 19);
        assert_eq!(g.locate(99.0), 19);
    }
}
