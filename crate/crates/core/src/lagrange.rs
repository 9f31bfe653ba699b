//! One-dimensional Lagrange bases on equispaced nodes of `[0, 1]`; the
//! tensor-product `Q_p` basis is `φ_ab(ξ, η) = L_a(ξ) L_b(η)`.

use alloc::vec::Vec;

#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1);
        let nodes = (0..=degree).map(|a| a as f64 / degree as f64).collect();
        LagrangeBasis { nodes }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn value(&self, a: usize, t: f64) -> f64 {
        let ta = self.nodes[a];
        self.nodes.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &tb)| (t - tb) / (ta - tb)).product()
    }

    pub fn derivative(&self, a: usize, t: f64) -> f64 {
        let ta = self.nodes[a];
        let mut sum = 0.0;
        for (m, &tm) in self.nodes.iter().enumerate() {
            if m == a {
                continue;
            }
            let mut term = 1.0 / (ta - tm);
            for (b, &tb) in self.nodes.iter().enumerate() {
                if b != a && b != m {
                    term *= (t - tb) / (ta - tb);
                }
            }
            sum += term;
        }
        sum
    }

    /// Values and derivatives of every basis function at each point:
    /// `out[q][a]`.
    pub fn tabulate(&self, points: &[f64]) -> Tabulation {
        let n = self.nodes.len();
        let mut values = Vec::with_capacity(points.len() * n);
        let mut derivatives = Vec::with_capacity(points.len() * n);
        for &t in points {
            for a in 0..n {
                values.push(self.value(a, t));
                derivatives.push(self.derivative(a, t));
            }
        }
        Tabulation { n, values, derivatives }
    }
}

#[derive(Clone, Debug)]
pub struct Tabulation {
    n: usize,
    values: Vec<f64>,
    derivatives: Vec<f64>,
}

impl Tabulation {
    #[inline]
    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.n + a]
    }

    #[inline]
    pub fn derivative(&self, q: usize, a: usize) -> f64 {
        self.derivatives[q * self.n + a]
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.n..(q + 1) * self.n]
    }

    pub fn derivatives_at(&self, q: usize) -> &[f64] {
        &self.derivatives[q * self.n..(q + 1) * self.n]
    }
}
