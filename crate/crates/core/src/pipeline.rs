//! Mesh → dofs → assembly → direct solve → nodal values.

use alloc::vec::Vec;

use crate::assembly::assemble;
use crate::dofs::DofMap;
use crate::error::Result;
use crate::lagrange::LagrangeBasis;
use crate::linsolve::{self, Ordering};
use crate::mesh::QuadMesh;
use crate::problem::ProblemSpec;

/// Discrete solution: values at every node of its [`DofMap`], hanging and
/// Dirichlet nodes included.
#[derive(Clone, Debug)]
pub struct FemSolution {
    pub dofs: DofMap,
    pub values: Vec<f64>,
    /// `‖b - A x‖∞ / ‖b‖∞` of the solve.
    pub residual: f64,
}

impl FemSolution {
    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn degree(&self) -> usize {
        self.dofs.degree()
    }

    /// Same discretization with every value multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        FemSolution {
            dofs: self.dofs.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            residual: self.residual,
        }
    }

    /// Local nodal values of an active slot.
    pub fn cell_values(&self, slot: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.dofs.cell_nodes(slot).iter().map(|&n| self.values[n]));
    }

    /// Nodal interpolant of `f` (constraints applied, so it is conforming).
    pub fn interpolate(mesh: &QuadMesh, degree: usize, f: impl Fn([f64; 2]) -> f64) -> Self {
        let dofs = DofMap::new(mesh, degree);
        let free: Vec<f64> = dofs.free_nodes().iter().map(|&n| f(dofs.node_position(n))).collect();
        let values = dofs.expand(&free, &f);
        FemSolution { dofs, values, residual: 0.0 }
    }

    /// `u_h` at a point inside active cell `id` (reference coordinates).
    pub fn eval_reference(&self, basis: &LagrangeBasis, slot: usize, xi: [f64; 2]) -> f64 {
        let n1 = self.degree() + 1;
        let nodes = self.dofs.cell_nodes(slot);
        let mut s = 0.0;
        for (l, &n) in nodes.iter().enumerate() {
            s += self.values[n] * basis.value(l % n1, xi[0]) * basis.value(l / n1, xi[1]);
        }
        s
    }
}

/// Solves `spec` on `mesh` with the default (nested-dissection) ordering.
pub fn solve(spec: &ProblemSpec, mesh: &QuadMesh) -> Result<FemSolution> {
    solve_with(spec, mesh, Ordering::default())
}

pub fn solve_with(spec: &ProblemSpec, mesh: &QuadMesh, ordering: Ordering) -> Result<FemSolution> {
    let dofs = DofMap::new(mesh, spec.degree);
    let system = assemble(spec, mesh, &dofs)?;
    let x = linsolve::solve_with(&system, ordering)?;
    let residual = system.matrix.relative_residual(&x, &system.rhs);
    let values = dofs.expand(&x, |p| spec.dirichlet(p));
    Ok(FemSolution { dofs, values, residual })
}
