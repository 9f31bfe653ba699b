//! Fixed-fraction marking and the `E_ref`-oriented search for the smallest
//! marking fraction (EOAMR).
//!
//! One EOAMR step on a mesh `M0` solves once on the regular refinement of
//! `M0` to get the target error `E_ref`, then tries fractions
//! `pct_init, pct_init + 0.1, ...` on fresh copies of `M0` and accepts the
//! first trial whose error is within `(1 + δ)·E_ref`. Without an acceptance
//! below 95% the step falls back to the regular mesh, and an accepted
//! fraction above 85% switches the rest of the run to regular refinement.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::error_metrics::{self, fill_observed_orders, CellIndicators, ConvergenceRecord, ErrorSource, Strategy};
use crate::math;
use crate::mesh::{CellId, QuadMesh};
use crate::pipeline::{self, FemSolution};
use crate::problem::ProblemSpec;

/// Guards fraction comparisons against `0.05 + 0.1·k` rounding.
const PCT_EPS: f64 = 1e-9;

/// The `⌈pct·n⌉` cells with the largest indicators, ties going to the
/// smaller id. Returned sorted by id.
pub fn mark_fixed_fraction(indicators: &CellIndicators, pct: f64) -> Result<Vec<CellId>> {
    let n = indicators.len();
    if n == 0 {
        return Err(Error::invalid("no indicators to mark"));
    }
    if !(pct > 0.0 && pct <= 1.0) {
        return Err(Error::invalid(format!("marking fraction {pct} outside (0, 1]")));
    }
    let count = (math::ceil(pct * n as f64 - PCT_EPS) as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        indicators.values[b].total_cmp(&indicators.values[a]).then(indicators.ids[a].cmp(&indicators.ids[b]))
    });
    let mut marked: Vec<CellId> = order[..count].iter().map(|&k| indicators.ids[k]).collect();
    marked.sort_unstable();
    Ok(marked)
}

/// First trial fraction of a round: 5% in the first round, then 70% of the
/// previous accepted fraction, never below 5%.
pub fn pct_init_rule(pct_prev: Option<f64>) -> f64 {
    match pct_prev {
        None => 0.05,
        Some(prev) => (0.7 * prev).max(0.05),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EoamrConfig {
    /// Relative slack of the acceptance test `E_tst ≤ (1 + δ)·E_ref`.
    pub delta: f64,
    /// Increment between consecutive trial fractions.
    pub step: f64,
    /// Trials stop (and fall back to REG) once `pct_tst` reaches this.
    pub fallback_pct: f64,
    /// Accepted fractions above this switch the run to REG for good.
    pub switch_pct: f64,
    /// How trial and reference errors are measured.
    pub error_source: ErrorSource,
}

impl Default for EoamrConfig {
    fn default() -> Self {
        EoamrConfig { delta: 0.10, step: 0.10, fallback_pct: 0.95, switch_pct: 0.85, error_source: ErrorSource::Exact }
    }
}

impl EoamrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config(format!("pct step must be positive, got {}", self.step)));
        }
        if !(self.switch_pct > 0.0 && self.switch_pct <= self.fallback_pct && self.fallback_pct <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < switch_pct ≤ fallback_pct ≤ 1, got {} and {}",
                self.switch_pct, self.fallback_pct
            )));
        }
        Ok(())
    }

    /// Trial fractions of one round, starting at `pct_init`.
    pub fn trial_pcts(&self, pct_init: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let pct = pct_init + self.step * k as f64;
            if pct >= self.fallback_pct - PCT_EPS {
                return out;
            }
            out.push(pct.min(1.0));
            k += 1;
        }
    }

    pub fn accepts(&self, e_tst: f64, e_ref: f64) -> bool {
        e_tst <= (1.0 + self.delta) * e_ref
    }
}

/// A refined mesh with its solution and measured error.
#[derive(Clone, Debug)]
pub struct Trial {
    pub pct: f64,
    pub mesh: QuadMesh,
    pub solution: FemSolution,
    pub error: f64,
    pub wall_time: f64,
}

impl Trial {
    pub fn record(&self, strategy: Strategy, source: ErrorSource) -> ConvergenceRecord {
        let mut r = ConvergenceRecord::new(strategy, &self.mesh, self.pct, self.solution.n_dofs(), self.error);
        r.wall_time = self.wall_time;
        r.source = source;
        r
    }
}

pub type TrialJob<'a> = dyn Fn(f64) -> Result<Trial> + Sync + 'a;

/// Runs batches of independent trials and supplies a clock.
pub trait Executor: Sync {
    /// Trials handed to [`Executor::run`] at once.
    fn batch_size(&self) -> usize {
        1
    }

    /// Runs `job` for every fraction, results in input order.
    fn run(&self, job: &TrialJob<'_>, pcts: &[f64]) -> Vec<Result<Trial>> {
        pcts.iter().map(|&p| job(p)).collect()
    }

    /// Seconds since an arbitrary origin; the default clock is frozen at 0.
    fn now(&self) -> f64 {
        0.0
    }
}

/// One trial at a time, zero timings.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AcceptedPct {
    Fraction(f64),
    /// No trial below the fallback fraction passed.
    Reg,
}

impl AcceptedPct {
    pub fn fraction(self) -> Option<f64> {
        match self {
            AcceptedPct::Fraction(p) => Some(p),
            AcceptedPct::Reg => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RefinementOutcome {
    pub mesh: QuadMesh,
    pub solution: FemSolution,
    pub error: f64,
    pub accepted: AcceptedPct,
    pub e_ref: f64,
    /// The REG reference row followed by one row per trial, in trial order.
    pub records: Vec<ConvergenceRecord>,
    /// Linear solves spent: one for `E_ref` plus one per trial.
    pub solves: usize,
    /// Set when this and all later steps use regular refinement.
    pub switch_to_reg: bool,
}

/// Measures the error of `solution` on `mesh` the way `source` says.
pub fn measure_error(spec: &ProblemSpec, mesh: &QuadMesh, solution: &FemSolution, source: ErrorSource) -> Result<f64> {
    match source {
        ErrorSource::Exact => Ok(error_metrics::l2_error_exact(spec, mesh, solution)),
        ErrorSource::Richardson => Ok(error_metrics::richardson_error(spec, mesh, solution)?.0),
    }
}

/// Refines a copy of `m0` by marking `pct` of `indicators`, solves and
/// measures. Errors carry the fraction.
pub fn run_trial(
    spec: &ProblemSpec,
    m0: &QuadMesh,
    indicators: &CellIndicators,
    pct: f64,
    source: ErrorSource,
) -> Result<Trial> {
    let attach = |e: Error| Error::Trial { pct, source: Box::new(e) };
    let marked = mark_fixed_fraction(indicators, pct).map_err(attach)?;
    let mesh = m0.refine_cells(&marked).map_err(attach)?;
    let solution = pipeline::solve(spec, &mesh).map_err(attach)?;
    let error = measure_error(spec, &mesh, &solution, source).map_err(attach)?;
    Ok(Trial { pct, mesh, solution, error, wall_time: 0.0 })
}

/// Regular refinement of `m0` with its solve.
pub fn regular_step(spec: &ProblemSpec, m0: &QuadMesh, source: ErrorSource, exec: &dyn Executor) -> Result<Trial> {
    let t0 = exec.now();
    let mesh = m0.refine_regular();
    let solution = pipeline::solve(spec, &mesh)?;
    let error = measure_error(spec, &mesh, &solution, source)?;
    Ok(Trial { pct: 1.0, mesh, solution, error, wall_time: exec.now() - t0 })
}

/// Escalating marking fractions on `m0` until one matches `e_ref`.
///
/// `m0_solution` supplies the indicators; `reg` is the already computed
/// regular refinement returned on fallback. Trials are dispatched in
/// batches, and the smallest passing fraction of a batch wins, so the
/// outcome matches a one-by-one search.
pub fn seek_pct_opt(
    spec: &ProblemSpec,
    m0: &QuadMesh,
    m0_solution: &FemSolution,
    reg: &Trial,
    pct_prev: Option<f64>,
    cfg: &EoamrConfig,
    exec: &dyn Executor,
) -> Result<RefinementOutcome> {
    cfg.validate()?;
    let e_ref = reg.error;
    let indicators = error_metrics::kelly_indicators(spec, m0, m0_solution);
    let pcts = cfg.trial_pcts(pct_init_rule(pct_prev));
    let mut records = alloc::vec![reg.record(Strategy::Reg, cfg.error_source)];
    let mut solves = 1;
    let job = |pct: f64| -> Result<Trial> {
        let t0 = exec.now();
        let mut trial = run_trial(spec, m0, &indicators, pct, cfg.error_source)?;
        trial.wall_time = exec.now() - t0;
        Ok(trial)
    };
    for batch in pcts.chunks(exec.batch_size().max(1)) {
        let results = exec.run(&job, batch);
        for result in results {
            let trial = result?;
            solves += 1;
            records.push(trial.record(Strategy::Amr, cfg.error_source));
            if cfg.accepts(trial.error, e_ref) {
                assert!(trial.error <= (1.0 + cfg.delta) * e_ref);
                let switch_to_reg = trial.pct > cfg.switch_pct + PCT_EPS;
                return Ok(RefinementOutcome {
                    accepted: AcceptedPct::Fraction(trial.pct),
                    e_ref,
                    records,
                    solves,
                    switch_to_reg,
                    mesh: trial.mesh,
                    solution: trial.solution,
                    error: trial.error,
                });
            }
        }
    }
    Ok(RefinementOutcome {
        accepted: AcceptedPct::Reg,
        e_ref,
        records,
        solves,
        switch_to_reg: true,
        error: reg.error,
        mesh: reg.mesh.clone(),
        solution: reg.solution.clone(),
    })
}

/// One EOAMR step: `E_ref` from the regular refinement of `m0`, then the
/// search. An accepted fraction above the switch threshold hands back the
/// regular mesh instead of the adaptive one.
pub fn eoamr_step(
    spec: &ProblemSpec,
    m0: &QuadMesh,
    m0_solution: &FemSolution,
    pct_prev: Option<f64>,
    cfg: &EoamrConfig,
    exec: &dyn Executor,
) -> Result<RefinementOutcome> {
    let reg = regular_step(spec, m0, cfg.error_source, exec)?;
    let mut outcome = seek_pct_opt(spec, m0, m0_solution, &reg, pct_prev, cfg, exec)?;
    if outcome.switch_to_reg && outcome.accepted != AcceptedPct::Reg {
        outcome.mesh = reg.mesh;
        outcome.solution = reg.solution;
        outcome.error = reg.error;
    }
    Ok(outcome)
}

/// Accepted-step history and every trial of an EOAMR run.
#[derive(Clone, Debug, Default)]
pub struct EoamrRun {
    /// Initial mesh row followed by one row per step (the mesh carried on).
    pub history: Vec<ConvergenceRecord>,
    /// Per step: reference and trial rows.
    pub trials: Vec<Vec<ConvergenceRecord>>,
    /// Accepted fraction of every step.
    pub accepted: Vec<AcceptedPct>,
    pub solves: usize,
    pub switched_to_reg: bool,
}

impl EoamrRun {
    /// Accepted fractions up to (excluding) the first REG fallback.
    pub fn pct_opt_trajectory(&self) -> Vec<f64> {
        self.accepted.iter().map_while(|a| a.fraction()).collect()
    }
}

/// Repeats [`eoamr_step`] from `initial` until the REG switch or
/// `max_steps`.
pub fn run_eoamr(
    spec: &ProblemSpec,
    initial: &QuadMesh,
    max_steps: usize,
    cfg: &EoamrConfig,
    exec: &dyn Executor,
) -> Result<EoamrRun> {
    cfg.validate()?;
    let t0 = exec.now();
    let mut mesh = initial.clone();
    let mut solution = pipeline::solve(spec, &mesh)?;
    let error = measure_error(spec, &mesh, &solution, cfg.error_source)?;
    let mut first = ConvergenceRecord::new(Strategy::Reg, &mesh, 1.0, solution.n_dofs(), error);
    first.wall_time = exec.now() - t0;
    first.source = cfg.error_source;
    let mut run = EoamrRun { history: alloc::vec![first], solves: 1, ..Default::default() };
    let mut pct_prev = None;
    for _ in 0..max_steps {
        let t0 = exec.now();
        let outcome = eoamr_step(spec, &mesh, &solution, pct_prev, cfg, exec)?;
        let strategy = if outcome.switch_to_reg { Strategy::Reg } else { Strategy::Amr };
        let pct = match (strategy, outcome.accepted) {
            (Strategy::Amr, AcceptedPct::Fraction(p)) => p,
            _ => 1.0,
        };
        let mut row = ConvergenceRecord::new(strategy, &outcome.mesh, pct, outcome.solution.n_dofs(), outcome.error);
        row.wall_time = exec.now() - t0;
        row.source = cfg.error_source;
        run.history.push(row);
        run.trials.push(outcome.records);
        run.accepted.push(outcome.accepted);
        run.solves += outcome.solves;
        pct_prev = outcome.accepted.fraction();
        mesh = outcome.mesh;
        solution = outcome.solution;
        if outcome.switch_to_reg {
            run.switched_to_reg = true;
            break;
        }
    }
    fill_observed_orders(&mut run.history);
    Ok(run)
}
