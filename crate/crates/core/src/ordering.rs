//! Deterministic fill-reducing orderings.
//!
//! [`nested_dissection`] splits the unknowns with axis-parallel lines and
//! turns each cut into a vertex separator using the matrix graph, so coarse
//! cells that straddle a line stay correctly separated on graded meshes. [`reverse_cuthill_mckee`] is the coordinate-free
//! fallback.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::sparse::SymmetricCsr;

/// Subproblems at or below this size are emitted as they are.
const LEAF_SIZE: usize = 48;

/// Fractions of the unknowns left of a candidate cut.
const SPLIT_QUANTILES: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

/// Nested-dissection permutation (`perm[new] = old`) from integer
/// coordinates and the adjacency lists of the matrix graph.
pub fn nested_dissection(coords: &[[u64; 2]], adj: &[Vec<usize>]) -> Vec<usize> {
    let n = coords.len();
    let mut work = Work { coords, adj, stamp: vec![0; n], left: vec![false; n], next_stamp: 0 };
    let mut out = Vec::with_capacity(n);
    work.dissect((0..n).collect(), &mut out);
    debug_assert_eq!(out.len(), n);
    out
}

struct Work<'a> {
    coords: &'a [[u64; 2]],
    adj: &'a [Vec<usize>],
    /// Marks the members of the subproblem being split.
    stamp: Vec<u32>,
    left: Vec<bool>,
    next_stamp: u32,
}

struct Split {
    left: Vec<usize>,
    right: Vec<usize>,
    sep: Vec<usize>,
}

impl Work<'_> {
    fn dissect(&mut self, ids: Vec<usize>, out: &mut Vec<usize>) {
        if ids.len() <= LEAF_SIZE {
            out.extend(ids);
            return;
        }
        match self.best_split(&ids) {
            Some(s) => {
                self.dissect(s.left, out);
                self.dissect(s.right, out);
                out.extend(s.sep);
            }
            None => out.extend(ids),
        }
    }

    /// Tries lines at several count quantiles on both axes and keeps the
    /// cut with the smallest separator relative to the smaller half. The
    /// median line alone runs through the densest part of strongly graded
    /// meshes.
    fn best_split(&mut self, ids: &[usize]) -> Option<Split> {
        self.next_stamp += 1;
        let stamp = self.next_stamp;
        for &i in ids {
            self.stamp[i] = stamp;
        }
        let mut best: Option<(f64, usize, u64)> = None;
        for axis in 0..2 {
            // Node i borders the right side of cut t iff c_i < t <= hi_i and
            // the left side iff lo_i < t <= c_i, so one pass over the edges
            // scores every candidate.
            let spans: Vec<(u64, u64, u64)> = ids
                .iter()
                .map(|&i| {
                    let c = self.coords[i][axis];
                    self.adj[i].iter().filter(|&&j| self.stamp[j] == stamp).fold((c, c, c), |(lo, c, hi), &j| {
                        let cj = self.coords[j][axis];
                        (lo.min(cj), c, hi.max(cj))
                    })
                })
                .collect();
            let mut values: Vec<u64> = spans.iter().map(|s| s.1).collect();
            values.sort_unstable();
            let mut cuts: Vec<u64> = Vec::new();
            for q in SPLIT_QUANTILES {
                let v = values[((values.len() as f64 * q) as usize).min(values.len() - 1)];
                // The quantile value and the next coordinate line above it.
                let next = values[values.partition_point(|&x| x <= v).min(values.len() - 1)];
                cuts.extend([v, next]);
            }
            cuts.sort_unstable();
            cuts.dedup();
            for cut in cuts {
                let (mut left, mut lb, mut rb) = (0usize, 0usize, 0usize);
                for &(lo, c, hi) in &spans {
                    if c < cut {
                        left += 1;
                        lb += usize::from(cut <= hi);
                    } else {
                        rb += usize::from(lo < cut);
                    }
                }
                let right = ids.len() - left;
                let (sep, left, right) = if lb < rb { (lb, left - lb, right) } else { (rb, left, right - rb) };
                let smaller = left.min(right);
                if smaller == 0 {
                    continue;
                }
                let score = sep as f64 / smaller as f64;
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, axis, cut));
                }
            }
        }
        best.map(|(_, axis, cut)| self.split_at(ids, axis, cut, stamp))
    }

    /// Cut at `c < cut`; the separator is the smaller boundary layer.
    fn split_at(&mut self, ids: &[usize], axis: usize, cut: u64, stamp: u32) -> Split {
        for &i in ids {
            self.left[i] = self.coords[i][axis] < cut;
        }
        let touches_other =
            |i: usize| self.adj[i].iter().any(|&j| self.stamp[j] == stamp && self.left[j] != self.left[i]);
        let (mut lb, mut rb) = (0usize, 0usize);
        for &i in ids {
            if touches_other(i) {
                if self.left[i] {
                    lb += 1;
                } else {
                    rb += 1;
                }
            }
        }
        // Cut the layer on the side with fewer boundary nodes.
        let sep_left = lb < rb;
        let mut s = Split { left: Vec::new(), right: Vec::new(), sep: Vec::new() };
        for &i in ids {
            if self.left[i] == sep_left && touches_other(i) {
                s.sep.push(i);
            } else if self.left[i] {
                s.left.push(i);
            } else {
                s.right.push(i);
            }
        }
        s
    }
}

/// Reverse Cuthill-McKee from a minimum-degree start in each component;
/// ties broken by index.
pub fn reverse_cuthill_mckee(matrix: &SymmetricCsr) -> Vec<usize> {
    let n = matrix.dim();
    let adj = matrix.adjacency();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (adj[u].len(), u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter().all(|&p| p < seen.len() && !core::mem::replace(&mut seen[p], true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dissection_is_a_permutation_with_separator_last() {
        // Five-point grid graph.
        let m = 33usize;
        let coords: Vec<[u64; 2]> = (0..m).flat_map(|y| (0..m).map(move |x| [x as u64, y as u64])).collect();
        let adj: Vec<Vec<usize>> = (0..m * m)
            .map(|k| {
                let (x, y) = (k % m, k / m);
                let mut v = Vec::new();
                if x > 0 {
                    v.push(k - 1);
                }
                if x + 1 < m {
                    v.push(k + 1);
                }
                if y > 0 {
                    v.push(k - m);
                }
                if y + 1 < m {
                    v.push(k + m);
                }
                v
            })
            .collect();
        let perm = nested_dissection(&coords, &adj);
        assert!(is_permutation(&perm));
        // Top-level separator: one full grid column, ordered last.
        let tail: Vec<[u64; 2]> = perm[perm.len() - m..].iter().map(|&i| coords[i]).collect();
        assert!(tail.iter().all(|c| c[0] == tail[0][0]));
        assert!((15..=17).contains(&tail[0][0]));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = SymmetricCsr::from_triplets(
            5,
            &[(0, 0, 2.0), (1, 1, 2.0), (2, 2, 2.0), (3, 3, 2.0), (4, 4, 2.0), (4, 0, -1.0), (3, 1, -1.0)],
        );
        let perm = reverse_cuthill_mckee(&a);
        assert!(is_permutation(&perm));
    }
}
