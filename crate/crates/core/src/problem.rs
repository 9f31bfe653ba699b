//! Manufactured Poisson problems on the unit square.
//!
//! Boundary layout: Dirichlet data `g_D = u` on `y = 0` and `y = 1`,
//! Neumann data `g_N = ∂u/∂n` on `x = 0` and `x = 1`; the source is
//! `f = -Δu`. All data are derived analytically from the exact solution.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Highest supported element degree.
pub const MAX_DEGREE: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum ExactSolution {
    /// `exp(-((x-½)² + (y-½)²)/c)`: flat for `c = 1`, sharp as `c → 0`.
    Gaussian { c: f64 },
    /// `u ≡ 1`; lies in every discrete space, so any error is round-off.
    Constant,
    /// `Σ coef · x^i · y^j` as `(coef, i, j)` terms.
    Polynomial(Vec<(f64, u32, u32)>),
}

impl ExactSolution {
    /// `u = y`, the linear patch-test solution.
    pub fn linear_y() -> Self {
        ExactSolution::Polynomial(alloc::vec![(1.0, 0, 1)])
    }

    pub fn value(&self, [x, y]: [f64; 2]) -> f64 {
        match self {
            ExactSolution::Gaussian { c } => {
                let r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
                math::exp(-r2 / c)
            }
            ExactSolution::Constant => 1.0,
            ExactSolution::Polynomial(terms) => {
                terms.iter().map(|&(k, i, j)| k * math::powi(x, i) * math::powi(y, j)).sum()
            }
        }
    }

    pub fn gradient(&self, [x, y]: [f64; 2]) -> [f64; 2] {
        match self {
            ExactSolution::Gaussian { c } => {
                let u = self.value([x, y]);
                [-2.0 * (x - 0.5) / c * u, -2.0 * (y - 0.5) / c * u]
            }
            ExactSolution::Constant => [0.0, 0.0],
            ExactSolution::Polynomial(terms) => {
                let mut g = [0.0, 0.0];
                for &(k, i, j) in terms {
                    if i > 0 {
                        g[0] += k * i as f64 * math::powi(x, i - 1) * math::powi(y, j);
                    }
                    if j > 0 {
                        g[1] += k * j as f64 * math::powi(x, i) * math::powi(y, j - 1);
                    }
                }
                g
            }
        }
    }

    pub fn laplacian(&self, [x, y]: [f64; 2]) -> f64 {
        match self {
            ExactSolution::Gaussian { c } => {
                let r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
                self.value([x, y]) * (4.0 * r2 / (c * c) - 4.0 / c)
            }
            ExactSolution::Constant => 0.0,
            ExactSolution::Polynomial(terms) => {
                let mut s = 0.0;
                for &(k, i, j) in terms {
                    if i > 1 {
                        s += k * (i * (i - 1)) as f64 * math::powi(x, i - 2) * math::powi(y, j);
                    }
                    if j > 1 {
                        s += k * (j * (j - 1)) as f64 * math::powi(x, i) * math::powi(y, j - 2);
                    }
                }
                s
            }
        }
    }

    /// Largest total degree for polynomials, `None` otherwise.
    pub fn polynomial_degree(&self) -> Option<u32> {
        match self {
            ExactSolution::Polynomial(terms) => terms.iter().map(|&(_, i, j)| i + j).max(),
            ExactSolution::Constant => Some(0),
            ExactSolution::Gaussian { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub solution: ExactSolution,
    pub degree: usize,
    /// Gauss points per direction for assembly.
    pub quadrature_points: usize,
}

impl ProblemSpec {
    /// Degree-`p` discretization with the default `p + 2` Gauss points.
    pub fn new(solution: ExactSolution, degree: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::invalid(format!("element degree must lie in 1..={MAX_DEGREE}, got {degree}")));
        }
        if let ExactSolution::Gaussian { c } = solution {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("gaussian width must be positive, got {c}")));
            }
        }
        Ok(ProblemSpec { solution, degree, quadrature_points: degree + 2 })
    }

    pub fn gaussian(c: f64, degree: usize) -> Result<Self> {
        Self::new(ExactSolution::Gaussian { c }, degree)
    }

    pub fn constant(degree: usize) -> Result<Self> {
        Self::new(ExactSolution::Constant, degree)
    }

    pub fn with_quadrature(mut self, points: usize) -> Self {
        self.quadrature_points = points;
        self
    }

    pub fn exact(&self, point: [f64; 2]) -> f64 {
        self.solution.value(point)
    }

    pub fn source(&self, point: [f64; 2]) -> f64 {
        -self.solution.laplacian(point)
    }

    pub fn dirichlet(&self, point: [f64; 2]) -> f64 {
        self.solution.value(point)
    }

    /// `∂u/∂n` for the outward normal `normal`.
    pub fn neumann(&self, point: [f64; 2], normal: [f64; 2]) -> f64 {
        let g = self.solution.gradient(point);
        g[0] * normal[0] + g[1] * normal[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    #[test]
    fn exact_values() {
        for c in [1.0, 1e-2, 1e-5] {
            let s = ExactSolution::Gaussian { c };
            assert_eq!(s.value([0.5, 0.5]), 1.0);
        }
        let s = ExactSolution::Gaussian { c: 1.0 };
        assert!((s.value([0.0, 0.0]) - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert_eq!(ExactSolution::Constant.value([0.3, 0.9]), 1.0);
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        let s = ExactSolution::Gaussian { c: 0.1 };
        let h = 1e-4;
        for p in [[0.3, 0.7], [0.5, 0.1], [0.9, 0.45]] {
            let g = s.gradient(p);
            let gx = (s.value([p[0] + h, p[1]]) - s.value([p[0] - h, p[1]])) / (2.0 * h);
            let gy = (s.value([p[0], p[1] + h]) - s.value([p[0], p[1] - h])) / (2.0 * h);
            assert!((g[0] - gx).abs() < 1e-6 && (g[1] - gy).abs() < 1e-6);
            let lap = (s.value([p[0] + h, p[1]])
                + s.value([p[0] - h, p[1]])
                + s.value([p[0], p[1] + h])
                + s.value([p[0], p[1] - h])
                - 4.0 * s.value(p))
                / (h * h);
            assert!((s.laplacian(p) - lap).abs() < 1e-4);
        }
    }

    /// Divergence theorem on the unit square: ∫f + ∮∂u/∂n = 0, i.e. the
    /// source and the boundary fluxes are consistent with the solution.
    #[test]
    fn data_consistent_by_divergence_theorem() {
        let rule = GaussLegendre::new(12);
        for spec in [
            ProblemSpec::gaussian(1.0, 1).unwrap(),
            ProblemSpec::gaussian(0.05, 1).unwrap(),
            ProblemSpec::new(ExactSolution::Polynomial(alloc::vec![(1.0, 2, 1), (-3.0, 0, 3)]), 3).unwrap(),
        ] {
            // Composite rule on an 8x8 grid of panels.
            let n = 8;
            let mut vol = 0.0;
            let mut flux = 0.0;
            for pi in 0..n {
                for (t, w) in rule.iter() {
                    let s = (pi as f64 + t) / n as f64;
                    let ws = w / n as f64;
                    flux += ws * spec.neumann([0.0, s], [-1.0, 0.0]);
                    flux += ws * spec.neumann([1.0, s], [1.0, 0.0]);
                    flux += ws * spec.neumann([s, 0.0], [0.0, -1.0]);
                    flux += ws * spec.neumann([s, 1.0], [0.0, 1.0]);
                    for pj in 0..n {
                        for (r, v) in rule.iter() {
                            let y = (pj as f64 + r) / n as f64;
                            vol += ws * v / n as f64 * spec.source([s, y]);
                        }
                    }
                }
            }
            assert!((vol + flux).abs() < 1e-10, "{:?}: {vol} + {flux}", spec.solution);
        }
    }

    #[test]
    fn degree_range_enforced() {
        assert!(ProblemSpec::gaussian(1.0, 0).is_err());
        assert!(ProblemSpec::gaussian(1.0, 5).is_err());
        assert!(ProblemSpec::gaussian(-1.0, 1).is_err());
        assert_eq!(ProblemSpec::constant(2).unwrap().quadrature_points, 4);
    }
}
