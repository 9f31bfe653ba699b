//! Sparse `LDLᵀ` direct solver.
//!
//! Up-looking factorization driven by the elimination tree: row `k` of `L`
//! is a sparse triangular solve against the rows above it. The pivot order
//! comes from a deterministic fill-reducing permutation, and the whole
//! factorization is sequential, so identical inputs give bitwise identical
//! factors and solutions.

use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::LinearSystem;
use crate::error::{Error, Result};
use crate::ordering;
use crate::sparse::SymmetricCsr;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Ordering {
    Natural,
    ReverseCuthillMcKee,
    /// Coordinate bisection; needs integer coordinates for every unknown.
    #[default]
    NestedDissection,
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    l_vals: Vec<f64>,
    diag: Vec<f64>,
}

impl LdlFactor {
    /// Factors `matrix` under `perm` (`perm[new] = old`).
    ///
    /// Fails on the first pivot that is not strictly positive and finite;
    /// the reported index is the original unknown.
    pub fn new(matrix: &SymmetricCsr, perm: Vec<usize>) -> Result<Self> {
        let n = matrix.dim();
        if perm.len() != n || !ordering::is_permutation(&perm) {
            return Err(Error::invalid("ordering is not a permutation of the unknowns"));
        }
        assert!(n < u32::MAX as usize, "system too large for 32-bit row indices");
        let c = matrix.permuted(&perm);

        // Symbolic: elimination tree and column counts of L.
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &j in c.row(k).0 {
                let mut i = j;
                while i < k && flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for k in 0..n {
            col_ptr.push(col_ptr[k] + lnz[k]);
        }
        let nnz = col_ptr[n];

        // Numeric.
        let mut row_idx = vec![0u32; nnz];
        let mut l_vals = vec![0.0; nnz];
        let mut diag = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|v| *v = 0);
        flag.iter_mut().for_each(|v| *v = NONE);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let (cols, vals) = c.row(k);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v;
                let mut len = 0;
                let mut i = j;
                while i < k && flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = col_ptr[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[row_idx[p] as usize] -= l_vals[p] * yi;
                }
                let lki = yi / diag[i];
                dk -= lki * yi;
                row_idx[end] = k as u32;
                l_vals[end] = lki;
                lnz[i] += 1;
            }
            if !(dk > 0.0 && dk.is_finite()) {
                return Err(Error::Factorization { pivot: perm[k], value: dk });
            }
            diag[k] = dk;
        }

        Ok(LdlFactor { perm, col_ptr, row_idx, l_vals, diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Off-diagonal entries of `L`.
    pub fn nnz_l(&self) -> usize {
        self.l_vals.len()
    }

    /// Stored off-diagonal entries of `L`.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                x[self.row_idx[p] as usize] -= self.l_vals[p] * xj;
            }
        }
        for (v, d) in x.iter_mut().zip(&self.diag) {
            *v /= d;
        }
        for j in (0..n).rev() {
            let mut xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                xj -= self.l_vals[p] * x[self.row_idx[p] as usize];
            }
            x[j] = xj;
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

/// Permutation for `choice`; nested dissection falls back to RCM when the
/// system carries no coordinates.
pub fn ordering_for(system: &LinearSystem, choice: Ordering) -> Vec<usize> {
    let n = system.matrix.dim();
    match choice {
        Ordering::Natural => (0..n).collect(),
        Ordering::ReverseCuthillMcKee => ordering::reverse_cuthill_mckee(&system.matrix),
        Ordering::NestedDissection => match &system.coords {
            Some((coords, _)) => ordering::nested_dissection(coords, &system.matrix.adjacency()),
            None => ordering::reverse_cuthill_mckee(&system.matrix),
        },
    }
}

/// Factors and solves `A x = b` with the default ordering.
pub fn solve_direct(system: &LinearSystem) -> Result<Vec<f64>> {
    solve_with(system, Ordering::default())
}

pub fn solve_with(system: &LinearSystem, choice: Ordering) -> Result<Vec<f64>> {
    if system.rhs.len() != system.matrix.dim() {
        return Err(Error::invalid("right-hand side length differs from matrix dimension"));
    }
    if system.matrix.dim() == 0 {
        return Ok(Vec::new());
    }
    let factor = LdlFactor::new(&system.matrix, ordering_for(system, choice))?;
    Ok(factor.solve(&system.rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(matrix: SymmetricCsr, rhs: Vec<f64>) -> LinearSystem {
        LinearSystem { matrix, rhs, coords: None }
    }

    #[test]
    fn one_by_one() {
        let s = system(SymmetricCsr::from_triplets(1, &[(0, 0, 2.0)]), vec![4.0]);
        assert_eq!(solve_direct(&s).unwrap(), vec![2.0]);
    }

    #[test]
    fn identity() {
        let n = 7;
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        let b: Vec<f64> = (0..n).map(|i| i as f64 * 0.37 - 1.0).collect();
        let s = system(SymmetricCsr::from_triplets(n, &trip), b.clone());
        assert_eq!(solve_direct(&s).unwrap(), b);
    }

    /// Dense SPD A = MᵀM + n·I with b built from a known x.
    #[test]
    fn random_spd_recovers_known_solution() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(20240601);
        let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut trip = Vec::new();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut v: f64 = (0..n).map(|k| m[k][i] * m[k][j]).sum();
                if i == j {
                    v += n as f64;
                }
                dense[i][j] = v;
                dense[j][i] = v;
                trip.push((i, j, v));
            }
        }
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum()).collect();
        let s = system(SymmetricCsr::from_triplets(n, &trip), b);
        for choice in [Ordering::Natural, Ordering::ReverseCuthillMcKee, Ordering::NestedDissection] {
            let x = solve_with(&s, choice).unwrap();
            let err = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = x_true.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(err / scale < 1e-12, "{choice:?}: {err}");
            assert!(s.matrix.relative_residual(&x, &s.rhs) < 1e-12);
        }
    }

    #[test]
    fn singular_and_indefinite_report_pivot() {
        let s = system(SymmetricCsr::from_triplets(2, &[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)]), vec![1.0, 1.0]);
        assert!(matches!(solve_with(&s, Ordering::Natural), Err(Error::Factorization { pivot: 1, .. })));
        let s = system(SymmetricCsr::from_triplets(2, &[(0, 0, 1.0), (1, 1, -3.0)]), vec![1.0, 1.0]);
        assert!(matches!(
            solve_with(&s, Ordering::Natural),
            Err(Error::Factorization { pivot: 1, value }) if value == -3.0
        ));
    }

    #[test]
    fn tridiagonal_fill_free() {
        let n = 100;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i > 0 {
                trip.push((i, i - 1, -1.0));
            }
        }
        let a = SymmetricCsr::from_triplets(n, &trip);
        let f = LdlFactor::new(&a, (0..n).collect()).unwrap();
        assert_eq!(f.nnz_l(), n - 1);
        let ones = vec![1.0; n];
        let b = a.mul_vec(&ones);
        let x = f.solve(&b);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }
}
