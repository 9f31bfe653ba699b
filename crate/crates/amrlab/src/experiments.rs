//! Experiment drivers behind the CLI subcommands. Each returns its data;
//! file output lives in [`crate::output`].

use amrlab_core::error_metrics::{self, fill_observed_orders, kelly_indicators, ConvergenceRecord, Strategy};
use amrlab_core::predictor::{self, ErrorModel, Optimum, TolPrediction};
use amrlab_core::refine::{self, EoamrConfig, EoamrRun, Executor};
use amrlab_core::roundoff::{self, RoundoffFit, RoundoffPoint};
use amrlab_core::{pipeline, Error, ProblemSpec, QuadMesh, Result};

use crate::config::{Config, PctPolicy, ProblemKind};

/// Gaussian `c = 1`, `p = 1` on a uniform 4×4 mesh, six regular levels.
pub fn converge_defaults() -> Config {
    Config {
        problem: Some(ProblemKind::Gaussian),
        c: Some(1.0),
        p: Some(1),
        n0: Some(4),
        grade_depth: Some(0),
        max_r: Some(6),
        ..Default::default()
    }
}

/// Sharp bump `c = 1e-5`, `p = 1`, on a 64×64 background refined once more
/// around the bump, searching the marking fraction each step.
pub fn eoamr_defaults() -> Config {
    Config {
        problem: Some(ProblemKind::Gaussian),
        c: Some(1e-5),
        p: Some(1),
        n0: Some(64),
        grade_depth: Some(1),
        pct: Some(PctPolicy::Eoamr),
        delta: Some(0.10),
        max_r: Some(12),
        ..Default::default()
    }
}

/// `u ≡ 1`, `p = 2`, up to about 3·10⁵ unknowns.
pub fn roundoff_defaults() -> Config {
    Config {
        problem: Some(ProblemKind::Constant),
        p: Some(2),
        pct: Some(PctPolicy::Fixed(0.3)),
        max_dofs: Some(300_000),
        ..Default::default()
    }
}

/// Initial mesh from `n0` and `grade_depth` (grading around the bump
/// center).
pub fn initial_mesh(cfg: &Config) -> Result<QuadMesh> {
    QuadMesh::graded(cfg.n0.unwrap_or(4), [0.5, 0.5], cfg.grade_depth.unwrap_or(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    /// Two consecutive negative observed orders.
    RoundoffFloor,
    MaxLevel,
}

#[derive(Clone, Debug)]
pub struct ConvergeOutcome {
    pub records: Vec<ConvergenceRecord>,
    pub stop: StopReason,
}

/// Regular refinement from `initial` until the error meets `tol`, the
/// round-off floor shows, or `max_r` refinements were made.
pub fn converge(
    spec: &ProblemSpec,
    initial: &QuadMesh,
    max_r: u32,
    tol: Option<f64>,
    exec: &dyn Executor,
) -> Result<ConvergeOutcome> {
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let mut mesh = initial.clone();
    let mut negative = 0;
    loop {
        let t0 = exec.now();
        let sol = pipeline::solve(spec, &mesh)?;
        let error = error_metrics::l2_error_exact(spec, &mesh, &sol);
        let mut rec = ConvergenceRecord::new(Strategy::Reg, &mesh, 1.0, sol.n_dofs(), error);
        rec.wall_time = exec.now() - t0;
        if let Some(prev) = records.last() {
            rec.observed_order = error_metrics::observed_order(prev.error, error).ok();
        }
        negative = if rec.observed_order.is_some_and(|q| q < 0.0) { negative + 1 } else { 0 };
        records.push(rec);
        let stop = if tol.is_some_and(|t| error <= t) {
            Some(StopReason::Tolerance)
        } else if negative >= 2 {
            Some(StopReason::RoundoffFloor)
        } else if mesh.generation() >= max_r {
            Some(StopReason::MaxLevel)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(ConvergeOutcome { records, stop });
        }
        mesh = mesh.refine_regular();
    }
}

/// Adaptive refinement at a constant fraction for `steps` steps.
pub fn fixed_fraction_run(
    spec: &ProblemSpec,
    initial: &QuadMesh,
    pct: f64,
    steps: u32,
    exec: &dyn Executor,
) -> Result<Vec<ConvergenceRecord>> {
    let mut mesh = initial.clone();
    let mut records = Vec::new();
    loop {
        let t0 = exec.now();
        let sol = pipeline::solve(spec, &mesh)?;
        let error = error_metrics::l2_error_exact(spec, &mesh, &sol);
        let strategy = if records.is_empty() { Strategy::Reg } else { Strategy::Amr };
        let used = if records.is_empty() { 1.0 } else { pct };
        let mut rec = ConvergenceRecord::new(strategy, &mesh, used, sol.n_dofs(), error);
        rec.wall_time = exec.now() - t0;
        records.push(rec);
        if mesh.generation() >= steps {
            break;
        }
        let marked = refine::mark_fixed_fraction(&kelly_indicators(spec, &mesh, &sol), pct)?;
        mesh = mesh.refine_cells(&marked)?;
    }
    fill_observed_orders(&mut records);
    Ok(records)
}

/// EOAMR campaign with the settings of `cfg`.
pub fn eoamr(cfg: &Config, exec: &dyn Executor) -> Result<EoamrRun> {
    let spec = cfg.problem_spec().map_err(|e| Error::Config(e.to_string()))?;
    let initial = initial_mesh(cfg)?;
    let eo = EoamrConfig { delta: cfg.delta.unwrap_or(0.10), ..Default::default() };
    refine::run_eoamr(&spec, &initial, cfg.max_r.unwrap_or(12) as usize, &eo, exec)
}

/// Errors of one adaptive step per fraction on each regular base level,
/// with the next regular level for comparison.
#[derive(Clone, Debug)]
pub struct ScenarioA {
    pub base_level: u32,
    pub points: Vec<RoundoffPoint>,
    /// `(N, E)` of the regular level `base_level + 1`.
    pub next_reg: (usize, f64),
}

pub fn roundoff_scenario_a(p: usize, base_levels: &[u32], pcts: &[f64]) -> Result<Vec<ScenarioA>> {
    base_levels
        .iter()
        .map(|&base| {
            let points = roundoff::scenario_a(p, base, pcts)?;
            let next = roundoff::measure_roundoff_series(p, &[roundoff::regular_mesh(base + 1)])?[0];
            Ok(ScenarioA { base_level: base, points, next_reg: next })
        })
        .collect()
}

/// Constant-fraction and regular series from the same base with their
/// fits (sub-resolution points dropped).
#[derive(Clone, Debug)]
pub struct ScenarioB {
    pub amr: Vec<RoundoffPoint>,
    pub reg: Vec<RoundoffPoint>,
    pub amr_fit: RoundoffFit,
    pub reg_fit: RoundoffFit,
}

impl ScenarioB {
    /// `|β_amr - β_reg| / |β_reg|`.
    pub fn beta_mismatch(&self) -> f64 {
        (self.amr_fit.beta_r - self.reg_fit.beta_r).abs() / self.reg_fit.beta_r.abs()
    }
}

pub fn fit_samples(samples: &[RoundoffPoint]) -> Result<RoundoffFit> {
    roundoff::fit_roundoff(&roundoff::significant_points(&roundoff::points_of(samples), 1.0))
}

pub fn roundoff_scenario_b(p: usize, base_level: u32, pct: f64, max_dofs: usize) -> Result<ScenarioB> {
    let amr = roundoff::scenario_b(p, base_level, pct, max_dofs)?;
    let reg = if pct >= 1.0 { amr.clone() } else { roundoff::scenario_b(p, base_level, 1.0, max_dofs)? };
    Ok(ScenarioB { amr_fit: fit_samples(&amr)?, reg_fit: fit_samples(&reg)?, amr, reg })
}

/// Model, optimum, tolerance verdict and the brute-force comparison.
#[derive(Clone, Debug)]
pub struct PredictReport {
    pub model: ErrorModel,
    pub optimum: Optimum,
    pub tol: Option<TolPrediction>,
    /// Smallest error in the supplied history.
    pub e_min_bf: Option<f64>,
    pub h_current: f64,
}

pub fn predict(
    history: &[ConvergenceRecord],
    p: usize,
    fit: &RoundoffFit,
    tol: Option<f64>,
    tol_q: f64,
) -> Result<PredictReport> {
    let reg: Vec<ConvergenceRecord> = history.iter().filter(|r| r.strategy == Strategy::Reg).cloned().collect();
    if reg.len() < 2 {
        return Err(Error::InvalidArgument("prediction needs at least two REG records".into()));
    }
    let model = ErrorModel::from_history(&reg, p, fit, tol_q)?;
    let optimum = predictor::predict_optimum(&model)?;
    let h_current = reg.last().map(|r| r.h_min).unwrap_or(1.0);
    let tol = tol.map(|t| predictor::predict_h_tol(&model, t, h_current)).transpose()?;
    Ok(PredictReport { model, optimum, tol, e_min_bf: predictor::brute_force_min(&reg).map(|(_, e)| e), h_current })
}
