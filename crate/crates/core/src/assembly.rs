//! Assembly of the condensed Galerkin system.
//!
//! Every node value is an affine combination of free unknowns: free nodes
//! map to themselves, Dirichlet nodes to their boundary value, hanging nodes
//! to their constraint row. Substituting that map into the element
//! contributions eliminates Dirichlet rows/columns and condenses the
//! constraints directly, which keeps the matrix symmetric positive definite.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dofs::{DofMap, NodeRole};
use crate::error::{Error, Result};
use crate::lagrange::{LagrangeBasis, Tabulation};
use crate::mesh::{Face, QuadMesh};
use crate::problem::ProblemSpec;
use crate::quadrature::GaussLegendre;
use crate::sparse::SymmetricCsr;

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SymmetricCsr,
    pub rhs: Vec<f64>,
    /// Integer coordinates of every unknown and the coordinate extent, used
    /// by the nested-dissection ordering.
    pub coords: Option<(Vec<[u64; 2]>, u64)>,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

/// Reference-cell tables shared by all cells of one assembly.
pub(crate) struct ReferenceElement {
    pub degree: usize,
    pub rule: GaussLegendre,
    pub tab: Tabulation,
}

impl ReferenceElement {
    pub fn new(degree: usize, points: usize) -> Self {
        let rule = GaussLegendre::new(points);
        let tab = LagrangeBasis::new(degree).tabulate(&rule.points);
        ReferenceElement { degree, rule, tab }
    }

    pub fn n1(&self) -> usize {
        self.degree + 1
    }

    /// `∫∇φ_i·∇φ_j` on a square cell; independent of the side length in 2D.
    pub fn stiffness(&self) -> Vec<f64> {
        let n1 = self.n1();
        let npc = n1 * n1;
        let nq = self.rule.len();
        let mut k = vec![0.0; npc * npc];
        for qy in 0..nq {
            for qx in 0..nq {
                let w = self.rule.weights[qx] * self.rule.weights[qy];
                for i in 0..npc {
                    let (ia, ib) = (i % n1, i / n1);
                    let gi = [
                        self.tab.derivative(qx, ia) * self.tab.value(qy, ib),
                        self.tab.value(qx, ia) * self.tab.derivative(qy, ib),
                    ];
                    for j in 0..npc {
                        let (ja, jb) = (j % n1, j / n1);
                        let gj = [
                            self.tab.derivative(qx, ja) * self.tab.value(qy, jb),
                            self.tab.value(qx, ja) * self.tab.derivative(qy, jb),
                        ];
                        k[i * npc + j] += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    }
                }
            }
        }
        k
    }
}

/// Builds the condensed system for `spec` on `mesh`.
pub fn assemble(spec: &ProblemSpec, mesh: &QuadMesh, dofs: &DofMap) -> Result<LinearSystem> {
    let p = spec.degree;
    if dofs.degree() != p {
        return Err(Error::invalid(format!("dof map has degree {}, problem has degree {p}", dofs.degree())));
    }
    if spec.quadrature_points < p + 1 {
        return Err(Error::Config(format!(
            "{} Gauss points per direction cannot integrate degree-{p} stiffness; need at least {}",
            spec.quadrature_points,
            p + 1
        )));
    }
    let refe = ReferenceElement::new(p, spec.quadrature_points);
    let kref = refe.stiffness();
    let n1 = refe.n1();
    let npc = n1 * n1;
    let nq = refe.rule.len();
    let n_free = dofs.n_free();

    // Node → (free unknowns, constant) through the expansion.
    let dirichlet_value: Vec<f64> = (0..dofs.n_nodes())
        .map(|n| match dofs.role(n) {
            NodeRole::Dirichlet => spec.dirichlet(dofs.node_position(n)),
            _ => 0.0,
        })
        .collect();
    let local_map = |node: usize, free: &mut Vec<(usize, f64)>| -> f64 {
        free.clear();
        let mut constant = 0.0;
        for &(m, w) in dofs.expansion(node) {
            match dofs.role(m) {
                NodeRole::Free(k) => free.push((k, w)),
                NodeRole::Dirichlet => constant += w * dirichlet_value[m],
                NodeRole::Hanging => unreachable!("expansions never reference hanging nodes"),
            }
        }
        constant
    };

    let mut local_free: Vec<Vec<(usize, f64)>> = vec![Vec::new(); npc];
    let mut local_const = vec![0.0; npc];

    // Sparsity pattern: lower triangle per row.
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_free];
    let mut touched: Vec<usize> = Vec::new();
    for slot in 0..dofs.active_cells().len() {
        touched.clear();
        for &node in dofs.cell_nodes(slot) {
            for &(m, _) in dofs.expansion(node) {
                if let NodeRole::Free(k) = dofs.role(m) {
                    touched.push(k);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for (a, &i) in touched.iter().enumerate() {
            rows[i].extend_from_slice(&touched[..=a]);
        }
    }
    let mut row_ptr = Vec::with_capacity(n_free + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    for row in &mut rows {
        row.sort_unstable();
        row.dedup();
        cols.extend_from_slice(row);
        row_ptr.push(cols.len());
        *row = Vec::new();
    }
    drop(rows);
    let mut vals = vec![0.0; cols.len()];
    let mut rhs = vec![0.0; n_free];

    let mut load = vec![0.0; npc];
    let mut block: Vec<f64> = Vec::new();
    let mut block_rhs: Vec<f64> = Vec::new();
    for (slot, &id) in dofs.active_cells().iter().enumerate() {
        let cell = mesh.cell(id);
        let h = cell.side;
        let nodes = dofs.cell_nodes(slot);
        for (l, &node) in nodes.iter().enumerate() {
            local_const[l] = local_map(node, &mut local_free[l]);
        }

        // Load: volume source plus Neumann faces on x = 0 and x = 1.
        load.iter_mut().for_each(|v| *v = 0.0);
        for qy in 0..nq {
            for qx in 0..nq {
                let x = [cell.origin[0] + h * refe.rule.points[qx], cell.origin[1] + h * refe.rule.points[qy]];
                let wf = refe.rule.weights[qx] * refe.rule.weights[qy] * h * h * spec.source(x);
                for (l, v) in load.iter_mut().enumerate() {
                    *v += wf * refe.tab.value(qx, l % n1) * refe.tab.value(qy, l / n1);
                }
            }
        }
        for face in [Face::West, Face::East] {
            let on_boundary = match face {
                Face::West => cell.index[0] == 0,
                _ => cell.origin[0] + h == 1.0,
            };
            if !on_boundary {
                continue;
            }
            let a = if face == Face::West { 0 } else { p };
            let xf = if face == Face::West { cell.origin[0] } else { cell.origin[0] + h };
            for q in 0..nq {
                let x = [xf, cell.origin[1] + h * refe.rule.points[q]];
                let wg = refe.rule.weights[q] * h * spec.neumann(x, face.outward_normal());
                for b in 0..n1 {
                    load[a + n1 * b] += wg * refe.tab.value(q, b);
                }
            }
        }

        // Condense into the cell's dense block over the touched unknowns,
        // then scatter row by row with a merge walk over the pattern.
        touched.clear();
        for lf in &local_free {
            touched.extend(lf.iter().map(|&(k, _)| k));
        }
        touched.sort_unstable();
        touched.dedup();
        let t = touched.len();
        block.clear();
        block.resize(t * t, 0.0);
        block_rhs.clear();
        block_rhs.resize(t, 0.0);
        for lf in local_free.iter_mut() {
            for e in lf.iter_mut() {
                e.0 = touched.binary_search(&e.0).unwrap();
            }
        }
        for a in 0..npc {
            if local_free[a].is_empty() {
                continue;
            }
            let krow = &kref[a * npc..(a + 1) * npc];
            let mut g = load[a];
            for b in 0..npc {
                g -= krow[b] * local_const[b];
            }
            for &(ii, wa) in &local_free[a] {
                block_rhs[ii] += wa * g;
                for b in 0..npc {
                    let kab = wa * krow[b];
                    for &(jj, wb) in &local_free[b] {
                        block[ii * t + jj] += kab * wb;
                    }
                }
            }
        }
        for ii in 0..t {
            let i = touched[ii];
            rhs[i] += block_rhs[ii];
            let start = row_ptr[i];
            let row_cols = &cols[start..row_ptr[i + 1]];
            let mut r = 0;
            for jj in 0..=ii {
                let j = touched[jj];
                while row_cols[r] != j {
                    r += 1;
                }
                vals[start + r] += block[ii * t + jj];
            }
        }
    }

    let coords = dofs.free_nodes().iter().map(|&n| dofs.node_key(n)).collect();
    Ok(LinearSystem {
        matrix: SymmetricCsr::from_parts(n_free, row_ptr, cols, vals),
        rhs,
        coords: Some((coords, dofs.key_scale())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stiffness_rows_sum_to_zero_and_symmetric() {
        for p in 1..=4 {
            let refe = ReferenceElement::new(p, p + 2);
            let k = refe.stiffness();
            let npc = (p + 1) * (p + 1);
            for i in 0..npc {
                let s: f64 = k[i * npc..(i + 1) * npc].iter().sum();
                assert!(s.abs() < 1e-12);
                for j in 0..npc {
                    assert!((k[i * npc + j] - k[j * npc + i]).abs() < 1e-13);
                }
            }
        }
        // Q1 reference stiffness diagonal is 2/3.
        let k = ReferenceElement::new(1, 2).stiffness();
        assert!((k[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn insufficient_quadrature_is_a_config_error() {
        let mesh = QuadMesh::uniform(2).unwrap();
        let spec = ProblemSpec::gaussian(1.0, 3).unwrap().with_quadrature(3);
        let dofs = DofMap::new(&mesh, 3);
        assert!(matches!(assemble(&spec, &mesh, &dofs), Err(Error::Config(_))));
    }

    #[test]
    fn matrix_symmetric_with_nonzero_rows_on_adaptive_mesh() {
        let mesh = QuadMesh::graded(4, [0.5, 0.5], 3).unwrap();
        for p in 1..=3 {
            let spec = ProblemSpec::gaussian(0.01, p).unwrap();
            let dofs = DofMap::new(&mesh, p);
            let sys = assemble(&spec, &mesh, &dofs).unwrap();
            assert_eq!(sys.dim(), dofs.n_free());
            for i in 0..sys.dim() {
                assert!(sys.matrix.diagonal(i) > 0.0);
            }
        }
    }
}
