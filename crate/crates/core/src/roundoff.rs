//! Round-off measurement with the `u ≡ 1` manufactured solution and the
//! power-law fit `E_R = α_R·N^β_R`.
//!
//! A constant lies in every discrete space, so the whole computed error of
//! that problem is accumulated floating-point error.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::error_metrics::{self, ConvergenceRecord, ErrorKind, Strategy};
use crate::math;
use crate::mesh::QuadMesh;
use crate::pipeline;
use crate::problem::ProblemSpec;
use crate::refine;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundoffFit {
    pub alpha_r: f64,
    pub beta_r: f64,
    /// RMS of the fit residuals in natural-log space.
    pub residual: f64,
    pub points_used: usize,
}

impl RoundoffFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.alpha_r * math::powf(n, self.beta_r)
    }
}

/// Least-squares line through `(ln N, ln E)`.
pub fn fit_roundoff(points: &[(f64, f64)]) -> Result<RoundoffFit> {
    if points.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 points to fit, got {}", points.len())));
    }
    if let Some(&(n, e)) = points.iter().find(|&&(n, e)| !(n > 0.0 && e > 0.0)) {
        return Err(Error::invalid(format!("fit needs positive N and E, got ({n:e}, {e:e})")));
    }
    // Sum in sorted order so the result does not depend on input order.
    let mut logs: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (math::ln(n), math::ln(e))).collect();
    logs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("all points share one N; slope undefined"));
    }
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let ss: f64 = logs
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + beta * p.0);
            r * r
        })
        .sum();
    Ok(RoundoffFit {
        alpha_r: math::exp(intercept),
        beta_r: beta,
        residual: math::sqrt(ss / m),
        points_used: logs.len(),
    })
}

/// Drops points whose error sits below `10·ε·‖u‖`, where the measurement
/// carries no information.
pub fn significant_points(points: &[(f64, f64)], u_norm: f64) -> Vec<(f64, f64)> {
    let floor = 10.0 * f64::EPSILON * u_norm;
    points.iter().copied().filter(|&(_, e)| e >= floor).collect()
}

/// The `u ≡ 1` problem with `Q_p` elements.
pub fn constant_problem(p: usize) -> Result<ProblemSpec> {
    ProblemSpec::constant(p)
}

/// Solves the `u ≡ 1` problem on every mesh; returns `(N, E_R)`.
pub fn measure_roundoff_series(p: usize, meshes: &[QuadMesh]) -> Result<Vec<(usize, f64)>> {
    let spec = constant_problem(p)?;
    meshes
        .iter()
        .map(|mesh| {
            let sol = pipeline::solve(&spec, mesh)?;
            Ok((sol.n_dofs(), error_metrics::l2_error_exact(&spec, mesh, &sol)))
        })
        .collect()
}

/// Single cell refined `level` times.
pub fn regular_mesh(level: u32) -> QuadMesh {
    let mut mesh = QuadMesh::uniform(1).expect("one cell is a valid mesh");
    for _ in 0..level {
        mesh = mesh.refine_regular();
    }
    mesh
}

/// One round-off sample of an adaptive experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundoffPoint {
    pub strategy: Strategy,
    /// Regular level of the base mesh.
    pub base_level: u32,
    pub pct: f64,
    pub n_dofs: usize,
    pub error: f64,
    pub h_min: f64,
    /// Refinement steps applied on top of the base mesh.
    pub step: u32,
}

impl RoundoffPoint {
    pub fn record(&self) -> ConvergenceRecord {
        ConvergenceRecord {
            strategy: self.strategy,
            level: self.base_level + self.step,
            pct: self.pct,
            h_min: self.h_min,
            n_dofs: self.n_dofs,
            error: self.error,
            observed_order: None,
            wall_time: 0.0,
            kind: ErrorKind::Roundoff,
            source: error_metrics::ErrorSource::Exact,
        }
    }
}

/// One adaptive refinement of the regular level-`base_level` mesh per
/// fraction, marked by the Kelly ranking of the `u ≡ 1` solution.
pub fn scenario_a(p: usize, base_level: u32, pcts: &[f64]) -> Result<Vec<RoundoffPoint>> {
    let spec = constant_problem(p)?;
    let base = regular_mesh(base_level);
    let sol = pipeline::solve(&spec, &base)?;
    let indicators = error_metrics::kelly_indicators(&spec, &base, &sol);
    pcts.iter()
        .map(|&pct| {
            let trial = refine::run_trial(&spec, &base, &indicators, pct, error_metrics::ErrorSource::Exact)?;
            Ok(RoundoffPoint {
                strategy: if pct >= 1.0 { Strategy::Reg } else { Strategy::Amr },
                base_level,
                pct,
                n_dofs: trial.solution.n_dofs(),
                error: trial.error,
                h_min: trial.mesh.min_cell_size(),
                step: 1,
            })
        })
        .collect()
}

/// Repeated refinement at a constant fraction from the regular
/// level-`base_level` mesh while `N` stays within `max_dofs`. The base mesh
/// is the first point. `pct = 1` gives the regular series.
pub fn scenario_b(p: usize, base_level: u32, pct: f64, max_dofs: usize) -> Result<Vec<RoundoffPoint>> {
    let spec = constant_problem(p)?;
    let strategy = if pct >= 1.0 { Strategy::Reg } else { Strategy::Amr };
    let mut mesh = regular_mesh(base_level);
    let mut sol = pipeline::solve(&spec, &mesh)?;
    let mut out = Vec::new();
    let mut step = 0;
    loop {
        out.push(RoundoffPoint {
            strategy,
            base_level,
            pct,
            n_dofs: sol.n_dofs(),
            error: error_metrics::l2_error_exact(&spec, &mesh, &sol),
            h_min: mesh.min_cell_size(),
            step,
        });
        let indicators = error_metrics::kelly_indicators(&spec, &mesh, &sol);
        let next = mesh.refine_cells(&refine::mark_fixed_fraction(&indicators, pct)?)?;
        if crate::dofs::DofMap::new(&next, p).n_dofs() > max_dofs {
            return Ok(out);
        }
        sol = pipeline::solve(&spec, &next)?;
        mesh = next;
        step += 1;
    }
}

/// `(N, E)` pairs of a sample list.
pub fn points_of(samples: &[RoundoffPoint]) -> Vec<(f64, f64)> {
    samples.iter().map(|s| (s.n_dofs as f64, s.error)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let pts: Vec<(f64, f64)> = (1..8)
            .map(|k| {
                let n = 10f64.powi(k);
                (n, 1e-16 * n)
            })
            .collect();
        let fit = fit_roundoff(&pts).unwrap();
        assert!((fit.alpha_r / 1e-16 - 1.0).abs() < 1e-12);
        assert!((fit.beta_r - 1.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.points_used, 7);
    }

    #[test]
    fn two_point_line() {
        let fit = fit_roundoff(&[(1e2, 1e-15), (1e4, 1e-13)]).unwrap();
        assert!((fit.beta_r - 1.0).abs() < 1e-12);
        assert!((fit.alpha_r / 1e-17 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_roundoff(&[(1e2, 1e-15)]).is_err());
        assert!(fit_roundoff(&[(1e2, 1e-15), (1e3, 0.0)]).is_err());
        assert!(fit_roundoff(&[(1e2, 1e-15), (1e2, 1e-14)]).is_err());
    }

    #[test]
    fn filter_drops_sub_resolution_points() {
        let pts = [(10.0, 1e-17), (100.0, 1e-14), (1000.0, 1e-13)];
        assert_eq!(significant_points(&pts, 1.0), alloc::vec![(100.0, 1e-14), (1000.0, 1e-13)]);
    }

    #[test]
    fn constant_problem_error_is_round_off_scale() {
        let series = measure_roundoff_series(2, &[regular_mesh(1), regular_mesh(3)]).unwrap();
        assert_eq!(series[0].0, 25);
        assert_eq!(series[1].0, 289);
        assert!(series.iter().all(|&(_, e)| e < 1e-13));
    }

    #[test]
    fn scenario_b_stays_under_budget() {
        let pts = scenario_b(2, 2, 0.3, 2000).unwrap();
        assert!(pts.len() >= 3);
        assert!(pts.windows(2).all(|w| w[1].n_dofs > w[0].n_dofs));
        assert!(pts.iter().all(|s| s.n_dofs <= 2000));
    }
}
