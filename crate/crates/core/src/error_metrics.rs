//! Error measurement: exact `L²` errors against manufactured solutions,
//! Richardson recovery against the `h/2` solution, Kelly gradient-jump
//! indicators, and observed convergence orders.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lagrange::LagrangeBasis;
use crate::math;
use crate::mesh::{CellId, Face, Neighbor, QuadMesh};
use crate::pipeline::{self, FemSolution};
use crate::problem::ProblemSpec;
use crate::quadrature::GaussLegendre;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Regular refinement: every active cell split.
    Reg,
    /// Adaptive refinement of a marked fraction.
    Amr,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Reg => "REG",
            Strategy::Amr => "AMR",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "REG" => Some(Strategy::Reg),
            "AMR" => Some(Strategy::Amr),
            _ => None,
        }
    }
}

/// Which error component a value stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ErrorKind {
    #[default]
    Total,
    Truncation,
    Roundoff,
}

/// How the error value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ErrorSource {
    #[default]
    Exact,
    Richardson,
}

/// One row of a refinement history.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub strategy: Strategy,
    /// Refinement level `R`; 0 on the initial mesh.
    pub level: u32,
    /// Marked fraction, 1.0 for regular refinement.
    pub pct: f64,
    pub h_min: f64,
    pub n_dofs: usize,
    pub error: f64,
    pub observed_order: Option<f64>,
    /// Seconds; informational only.
    pub wall_time: f64,
    pub kind: ErrorKind,
    pub source: ErrorSource,
}

impl ConvergenceRecord {
    pub fn new(strategy: Strategy, mesh: &QuadMesh, pct: f64, n_dofs: usize, error: f64) -> Self {
        ConvergenceRecord {
            strategy,
            level: mesh.generation(),
            pct,
            h_min: mesh.min_cell_size(),
            n_dofs,
            error,
            observed_order: None,
            wall_time: 0.0,
            kind: ErrorKind::Total,
            source: ErrorSource::Exact,
        }
    }

    /// Schema checks: `E ≥ 0`, `pct ∈ (0, 1]`, positive `h`.
    pub fn validate(&self) -> Result<()> {
        if !(self.error >= 0.0) {
            return Err(Error::invalid(format!("negative or NaN error {}", self.error)));
        }
        if !(self.pct > 0.0 && self.pct <= 1.0) {
            return Err(Error::invalid(format!("pct {} outside (0, 1]", self.pct)));
        }
        if !(self.h_min > 0.0) {
            return Err(Error::invalid(format!("nonpositive h_min {}", self.h_min)));
        }
        Ok(())
    }
}

/// Fills `observed_order` of each record from its predecessor; the first
/// record gets none. Records with nonpositive errors break the chain.
pub fn fill_observed_orders(records: &mut [ConvergenceRecord]) {
    if let Some(first) = records.first_mut() {
        first.observed_order = None;
    }
    for k in 1..records.len() {
        records[k].observed_order = observed_order(records[k - 1].error, records[k].error).ok();
    }
}

/// `q_h = log(E_h / E_{h/2}) / log 2`: positive while the error decreases.
pub fn observed_order(e_h: f64, e_half: f64) -> Result<f64> {
    if !(e_h > 0.0 && e_half > 0.0) {
        return Err(Error::invalid(format!("observed order needs positive errors, got {e_h:e} and {e_half:e}")));
    }
    Ok(math::ln(e_h / e_half) / core::f64::consts::LN_2)
}

/// `‖u - u_h‖_{L²}` with `p + 3` Gauss points per direction.
pub fn l2_error_exact(spec: &ProblemSpec, mesh: &QuadMesh, solution: &FemSolution) -> f64 {
    let p = solution.degree();
    let rule = GaussLegendre::new(p + 3);
    let tab = LagrangeBasis::new(p).tabulate(&rule.points);
    let n1 = p + 1;
    let mut local = Vec::new();
    let mut sum = 0.0;
    for (slot, &id) in solution.dofs.active_cells().iter().enumerate() {
        let cell = mesh.cell(id);
        solution.cell_values(slot, &mut local);
        let mut cell_sum = 0.0;
        for (qy, &ty) in rule.points.iter().enumerate() {
            for (qx, &tx) in rule.points.iter().enumerate() {
                let mut uh = 0.0;
                for (l, v) in local.iter().enumerate() {
                    uh += v * tab.value(qx, l % n1) * tab.value(qy, l / n1);
                }
                let x = [cell.origin[0] + cell.side * tx, cell.origin[1] + cell.side * ty];
                let e = spec.exact(x) - uh;
                cell_sum += rule.weights[qx] * rule.weights[qy] * e * e;
            }
        }
        sum += cell.side * cell.side * cell_sum;
    }
    math::sqrt(sum)
}

/// `‖u_{h/2} - u_h‖_{L²}`, solving again on the regular refinement of
/// `mesh`. Returns the estimate and the fine solution.
pub fn richardson_error(
    spec: &ProblemSpec,
    mesh: &QuadMesh,
    solution: &FemSolution,
) -> Result<(f64, QuadMesh, FemSolution)> {
    let fine_mesh = mesh.refine_regular();
    let fine = pipeline::solve(spec, &fine_mesh)?;
    let e = difference_on_refinement(mesh, solution, &fine_mesh, &fine);
    Ok((e, fine_mesh, fine))
}

/// `‖u_fine - u_coarse‖` where every active fine cell is a child of an
/// active coarse cell.
pub fn difference_on_refinement(
    coarse_mesh: &QuadMesh,
    coarse: &FemSolution,
    fine_mesh: &QuadMesh,
    fine: &FemSolution,
) -> f64 {
    let p = fine.degree();
    let rule = GaussLegendre::new(p + 3);
    let basis = LagrangeBasis::new(p);
    let tab = basis.tabulate(&rule.points);
    let n1 = p + 1;
    let mut local = Vec::new();
    let mut sum = 0.0;
    for (slot, &id) in fine.dofs.active_cells().iter().enumerate() {
        let cell = fine_mesh.cell(id);
        let parent_id = cell.parent.expect("refined cells have parents");
        let parent = coarse_mesh.cell(parent_id);
        let pslot = coarse.dofs.slot(parent_id).expect("parent active on the coarse mesh");
        fine.cell_values(slot, &mut local);
        let mut cell_sum = 0.0;
        for (qy, &ty) in rule.points.iter().enumerate() {
            for (qx, &tx) in rule.points.iter().enumerate() {
                let mut uf = 0.0;
                for (l, v) in local.iter().enumerate() {
                    uf += v * tab.value(qx, l % n1) * tab.value(qy, l / n1);
                }
                let x = [cell.origin[0] + cell.side * tx, cell.origin[1] + cell.side * ty];
                let xi = [(x[0] - parent.origin[0]) / parent.side, (x[1] - parent.origin[1]) / parent.side];
                let uc = coarse.eval_reference(&basis, pslot, xi);
                cell_sum += rule.weights[qx] * rule.weights[qy] * (uf - uc) * (uf - uc);
            }
        }
        sum += cell.side * cell.side * cell_sum;
    }
    math::sqrt(sum)
}

/// Per-cell indicators in active-cell id order.
#[derive(Clone, Debug, PartialEq)]
pub struct CellIndicators {
    pub ids: Vec<CellId>,
    pub values: Vec<f64>,
}

impl CellIndicators {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn argmax(&self) -> Option<CellId> {
        let mut best: Option<(CellId, f64)> = None;
        for (&id, &v) in self.ids.iter().zip(&self.values) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((id, v));
            }
        }
        best.map(|(id, _)| id)
    }
}

/// Kelly indicators `η_K² = Σ_F (h_F / 24) ∫_F [∂u_h/∂n]²`.
///
/// Interior faces use the jump of the normal derivative (split into halves
/// against finer neighbors), Neumann faces the mismatch `g_N - ∂u_h/∂n`, and
/// Dirichlet faces contribute nothing.
pub fn kelly_indicators(spec: &ProblemSpec, mesh: &QuadMesh, solution: &FemSolution) -> CellIndicators {
    let p = solution.degree();
    let basis = LagrangeBasis::new(p);
    let rule = GaussLegendre::new(p + 2);
    let dofs = &solution.dofs;
    let mut values = Vec::with_capacity(dofs.active_cells().len());
    for (slot, &id) in dofs.active_cells().iter().enumerate() {
        let cell = mesh.cell(id);
        let mut eta2 = 0.0;
        for face in Face::ALL {
            let axis = face.axis();
            let along = 1 - axis;
            let normal = face.outward_normal();
            let fixed = if face.is_upper() { cell.origin[axis] + cell.side } else { cell.origin[axis] };
            // Face segments [start, start+len) along the face with the
            // neighbor slot on the far side.
            let segments: Vec<(f64, f64, Option<usize>)> = match mesh.neighbor(id, face) {
                Neighbor::Boundary => {
                    if axis == 0 {
                        vec![(cell.origin[along], cell.side, None)]
                    } else {
                        continue;
                    }
                }
                Neighbor::Same(n) | Neighbor::Coarser(n) => {
                    vec![(cell.origin[along], cell.side, dofs.slot(n))]
                }
                Neighbor::Finer(pair) => pair
                    .iter()
                    .map(|&n| {
                        let c = mesh.cell(n);
                        (c.origin[along], c.side, dofs.slot(n))
                    })
                    .collect(),
            };
            for (start, len, other) in segments {
                let mut integral = 0.0;
                for (t, w) in rule.iter() {
                    let mut x = [0.0; 2];
                    x[axis] = fixed;
                    x[along] = start + len * t;
                    let g_here = gradient_at(solution, &basis, mesh, slot, id, x);
                    let dn_here = g_here[0] * normal[0] + g_here[1] * normal[1];
                    let jump = match other {
                        Some(oslot) => {
                            let oid = dofs.active_cells()[oslot];
                            let g_there = gradient_at(solution, &basis, mesh, oslot, oid, x);
                            dn_here - (g_there[0] * normal[0] + g_there[1] * normal[1])
                        }
                        None => spec.neumann(x, normal) - dn_here,
                    };
                    integral += w * len * jump * jump;
                }
                eta2 += len / 24.0 * integral;
            }
        }
        values.push(math::sqrt(eta2));
    }
    CellIndicators { ids: dofs.active_cells().to_vec(), values }
}

fn gradient_at(
    solution: &FemSolution,
    basis: &LagrangeBasis,
    mesh: &QuadMesh,
    slot: usize,
    id: CellId,
    x: [f64; 2],
) -> [f64; 2] {
    let cell = mesh.cell(id);
    let n1 = solution.degree() + 1;
    let xi = [(x[0] - cell.origin[0]) / cell.side, (x[1] - cell.origin[1]) / cell.side];
    let mut vx = [0.0; 8];
    let mut dx = [0.0; 8];
    let mut vy = [0.0; 8];
    let mut dy = [0.0; 8];
    for a in 0..n1 {
        vx[a] = basis.value(a, xi[0]);
        dx[a] = basis.derivative(a, xi[0]);
        vy[a] = basis.value(a, xi[1]);
        dy[a] = basis.derivative(a, xi[1]);
    }
    let mut g = [0.0; 2];
    for (l, &n) in solution.dofs.cell_nodes(slot).iter().enumerate() {
        let (a, b) = (l % n1, l / n1);
        let u = solution.values[n];
        g[0] += u * dx[a] * vy[b];
        g[1] += u * vx[a] * dy[b];
    }
    [g[0] / cell.side, g[1] / cell.side]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ExactSolution;

    #[test]
    fn observed_order_values() {
        assert!((observed_order(1e-2, 2.5e-3).unwrap() - 2.0).abs() < 1e-12);
        assert!((observed_order(8e-4, 1e-4).unwrap() - 3.0).abs() < 1e-12);
        assert!((observed_order(1e-6, 2e-6).unwrap() + 1.0).abs() < 1e-12);
        assert!(observed_order(0.0, 1.0).is_err());
        assert!(observed_order(1.0, -1.0).is_err());
    }

    #[test]
    fn observed_order_recovers_exact_power_laws() {
        for q in [1.0, 2.0, 3.5, 4.0] {
            let c = 0.7;
            for k in 0..8 {
                let h = 0.5f64.powi(k);
                let q_h = observed_order(c * h.powf(q), c * (h / 2.0).powf(q)).unwrap();
                assert!((q_h - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolant_of_constant_has_zero_error() {
        let mesh = QuadMesh::graded(4, [0.5, 0.5], 2).unwrap();
        let spec = ProblemSpec::constant(2).unwrap();
        let sol = FemSolution::interpolate(&mesh, 2, |_| 1.0);
        assert!(l2_error_exact(&spec, &mesh, &sol) < 1e-15);
    }

    #[test]
    fn linear_patch_error_vanishes() {
        let mesh = QuadMesh::uniform(4).unwrap();
        let spec = ProblemSpec::new(ExactSolution::linear_y(), 1).unwrap();
        let sol = pipeline::solve(&spec, &mesh).unwrap();
        assert!(l2_error_exact(&spec, &mesh, &sol) <= 1e-12);
    }

    #[test]
    fn gaussian_q1_error_ratio_tends_to_four() {
        let spec = ProblemSpec::gaussian(1.0, 1).unwrap();
        let mut mesh = QuadMesh::uniform(4).unwrap();
        let mut errors = Vec::new();
        for _ in 0..5 {
            let sol = pipeline::solve(&spec, &mesh).unwrap();
            errors.push(l2_error_exact(&spec, &mesh, &sol));
            mesh = mesh.refine_regular();
        }
        assert!(errors.windows(2).all(|w| w[1] < w[0]));
        let ratio = errors[3] / errors[4];
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn kelly_zero_for_globally_linear_solution() {
        let mesh = QuadMesh::uniform(4).unwrap();
        let spec = ProblemSpec::new(ExactSolution::linear_y(), 1).unwrap();
        let sol = pipeline::solve(&spec, &mesh).unwrap();
        let eta = kelly_indicators(&spec, &mesh, &sol);
        assert!(eta.values.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn kelly_peaks_at_sharp_bump_and_scales_linearly() {
        let mesh = QuadMesh::uniform(8).unwrap();
        let spec = ProblemSpec::gaussian(1e-5, 1).unwrap();
        let sol = pipeline::solve(&spec, &mesh).unwrap();
        let eta = kelly_indicators(&spec, &mesh, &sol);
        let best = mesh.cell(eta.argmax().unwrap());
        assert!(best.contains([0.5, 0.5]));
        // g_N vanishes to machine precision for c = 1e-5, so the map is linear.
        let scaled = kelly_indicators(&spec, &mesh, &sol.scaled(-3.0));
        for (a, b) in eta.values.iter().zip(&scaled.values) {
            assert!((3.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn richardson_estimate_tracks_true_error() {
        let spec = ProblemSpec::gaussian(1.0, 1).unwrap();
        let mesh = QuadMesh::uniform(16).unwrap();
        let sol = pipeline::solve(&spec, &mesh).unwrap();
        let (est, _, _) = richardson_error(&spec, &mesh, &sol).unwrap();
        let exact = l2_error_exact(&spec, &mesh, &sol);
        let expect = 1.0 - 0.5f64.powi(2);
        let ratio = est / exact;
        assert!((ratio / expect - 1.0).abs() < 0.3, "ratio {ratio}");

        let spec = ProblemSpec::constant(2).unwrap();
        let mesh = QuadMesh::uniform(4).unwrap();
        let sol = pipeline::solve(&spec, &mesh).unwrap();
        assert!(richardson_error(&spec, &mesh, &sol).unwrap().0 < 1e-13);
    }

    #[test]
    fn record_validation() {
        let mesh = QuadMesh::uniform(2).unwrap();
        let mut r = ConvergenceRecord::new(Strategy::Reg, &mesh, 1.0, 9, 0.1);
        assert!(r.validate().is_ok());
        r.pct = 0.0;
        assert!(r.validate().is_err());
    }
}
