//! Symmetric sparse matrices stored as their lower triangle, row by row.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Lower triangle (diagonal included) in CSR form; column indices ascend
/// within each row. Row `k` of the lower triangle doubles as column `k` of
/// the upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricCsr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SymmetricCsr {
    /// Builds from raw lower-triangular CSR parts.
    ///
    /// # Panics
    /// If the parts are inconsistent or an entry lies above the diagonal.
    pub fn from_parts(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>) -> Self {
        assert_eq!(row_ptr.len(), n + 1);
        assert_eq!(cols.len(), vals.len());
        assert_eq!(row_ptr[n], cols.len());
        for i in 0..n {
            let row = &cols[row_ptr[i]..row_ptr[i + 1]];
            assert!(row.windows(2).all(|w| w[0] < w[1]), "row {i} not strictly ascending");
            assert!(row.iter().all(|&j| j <= i), "row {i} has an upper entry");
        }
        SymmetricCsr { n, row_ptr, cols, vals }
    }

    /// Sums duplicate triplets in input order; `(i, j)` and `(j, i)` refer to
    /// the same entry.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n);
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SymmetricCsr { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored (lower-triangle) entries.
    pub fn nnz_lower(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    /// `‖b - A x‖∞ / ‖b‖∞` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.mul_vec(x);
        let r = ax.iter().zip(b).map(|(a, b)| math::abs(b - a)).fold(0.0, f64::max);
        let nb = b.iter().map(|v| math::abs(*v)).fold(0.0, f64::max);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }

    /// Full symmetric adjacency (no diagonal), neighbors ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for &j in cols {
                if j != i {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// `P A Pᵀ` where `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        assert_eq!(perm.len(), n);
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut counts = vec![0usize; n + 1];
        for i in 0..n {
            for &j in self.row(i).0 {
                counts[inv[i].max(inv[j]) + 1] += 1;
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut cols = vec![0; self.nnz_lower()];
        let mut vals = vec![0.0; self.nnz_lower()];
        for i in 0..n {
            let (rc, rv) = self.row(i);
            for (&j, &v) in rc.iter().zip(rv) {
                let (a, b) = (inv[i], inv[j]);
                let (r, c) = if a >= b { (a, b) } else { (b, a) };
                cols[fill[r]] = c;
                vals[fill[r]] = v;
                fill[r] += 1;
            }
        }
        for r in 0..n {
            let range = row_ptr[r]..row_ptr[r + 1];
            let mut pairs: Vec<(usize, f64)> =
                cols[range.clone()].iter().copied().zip(vals[range.clone()].iter().copied()).collect();
            pairs.sort_by_key(|&(c, _)| c);
            for (k, (c, v)) in range.zip(pairs) {
                cols[k] = c;
                vals[k] = v;
            }
        }
        SymmetricCsr { n, row_ptr, cols, vals }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SymmetricCsr {
        SymmetricCsr::from_triplets(3, &[(0, 0, 4.0), (1, 0, 1.0), (1, 1, 3.0), (0, 2, 0.5), (2, 2, 2.0), (2, 2, 1.0)])
    }

    #[test]
    fn triplets_merge_and_mirror() {
        let a = sample();
        assert_eq!(a.get(2, 2), 3.0);
        assert_eq!(a.get(0, 2), 0.5);
        assert_eq!(a.get(2, 0), 0.5);
        assert_eq!(a.get(2, 1), 0.0);
        assert_eq!(a.nnz_lower(), 5);
    }

    #[test]
    fn symmetric_matvec() {
        let a = sample();
        let y = a.mul_vec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![4.0 + 2.0 + 1.5, 1.0 + 6.0, 0.5 + 9.0]);
    }

    #[test]
    fn permutation_preserves_entries() {
        let a = sample();
        let perm = [2, 0, 1];
        let b = a.permuted(&perm);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.get(i, j), a.get(perm[i], perm[j]));
            }
        }
    }
}
