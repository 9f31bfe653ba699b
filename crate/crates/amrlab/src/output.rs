//! Output directory layout and the files each command leaves behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use amrlab_core::refine::{AcceptedPct, EoamrRun};
use amrlab_core::ConvergenceRecord;

use crate::config::Config;
use crate::experiments::{PredictReport, ScenarioA, ScenarioB};
use crate::history::{save_history, HistoryError};
use crate::plot::{write_plots, Series};

/// Environment variable naming the output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "AMRLAB_OUT_DIR";

/// `flag`, else `$AMRLAB_OUT_DIR`, else `./amrlab-out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("amrlab-out"))
}

#[derive(Debug)]
pub struct Output {
    pub dir: PathBuf,
    pub deterministic: bool,
}

impl Output {
    pub fn new(dir: PathBuf, deterministic: bool) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Output { dir, deterministic })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn history(&self, name: &str, records: &[ConvergenceRecord]) -> Result<PathBuf, HistoryError> {
        let path = self.path(name);
        save_history(&path, records, self.deterministic)?;
        Ok(path)
    }

    /// Effective settings of a command, readable as a config file.
    pub fn config(&self, command: &str, cfg: &Config) -> std::io::Result<PathBuf> {
        let path = self.path(&format!("{command}.config"));
        std::fs::write(&path, format!("# amrlab {command}\n{}", cfg.to_text()))?;
        Ok(path)
    }

    pub fn plots(&self, series: &[Series]) -> std::io::Result<Vec<PathBuf>> {
        write_plots(&self.path("plots"), series)
    }
}

fn n_error(records: &[ConvergenceRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.n_dofs as f64, r.error)).collect()
}

fn h_error(records: &[ConvergenceRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.h_min, r.error)).collect()
}

pub fn converge_plots(records: &[ConvergenceRecord]) -> Vec<Series> {
    vec![
        Series::new("converge_h_E", "h_min", "E", h_error(records)),
        Series::new("converge_N_E", "N", "E", n_error(records)),
    ]
}

pub fn eoamr_plots(run: &EoamrRun) -> Vec<Series> {
    let pct: Vec<(f64, f64)> =
        run.accepted.iter().enumerate().filter_map(|(k, a)| a.fraction().map(|p| ((k + 1) as f64, p))).collect();
    vec![
        Series::new("eoamr_step_pct", "step", "pct_opt", pct),
        Series::new("eoamr_N_E", "N", "E", n_error(&run.history)),
    ]
}

/// Every trial row of a run, steps in order.
pub fn eoamr_trials(run: &EoamrRun) -> Vec<ConvergenceRecord> {
    run.trials.iter().flatten().cloned().collect()
}

pub fn eoamr_summary(run: &EoamrRun) -> String {
    let mut s = String::new();
    for (k, a) in run.accepted.iter().enumerate() {
        let row = &run.history[k + 1];
        let label = match a {
            AcceptedPct::Fraction(p) => format!("{:.4}", p),
            AcceptedPct::Reg => "REG".to_string(),
        };
        let _ = writeln!(s, "step {:>2}  pct_opt {label:>6}  N {:>8}  E {:.6e}", k + 1, row.n_dofs, row.error);
    }
    let _ = writeln!(s, "solves {}  switched_to_reg {}", run.solves, run.switched_to_reg);
    s
}

pub fn scenario_a_records(results: &[ScenarioA]) -> Vec<ConvergenceRecord> {
    results.iter().flat_map(|r| r.points.iter().map(|p| p.record())).collect()
}

pub fn scenario_a_plots(results: &[ScenarioA]) -> Vec<Series> {
    results
        .iter()
        .map(|r| {
            let pts = r.points.iter().map(|p| (p.pct, p.error)).collect();
            Series::new(&format!("roundoff_A_R{}_pct_E", r.base_level), "pct", "E", pts)
        })
        .collect()
}

pub fn scenario_b_plots(b: &ScenarioB) -> Vec<Series> {
    let pts = |s: &[amrlab_core::roundoff::RoundoffPoint]| s.iter().map(|p| (p.n_dofs as f64, p.error)).collect();
    vec![
        Series::new("roundoff_B_amr_N_E", "N", "E", pts(&b.amr)),
        Series::new("roundoff_B_reg_N_E", "N", "E", pts(&b.reg)),
    ]
}

/// `key=value` lines, one quantity each.
pub fn predict_kv(r: &PredictReport) -> String {
    let mut s = String::new();
    let m = &r.model;
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("p", m.degree.to_string());
    kv("q", format!("{:e}", m.q));
    kv("C_T", format!("{:e}", m.c_t));
    kv("alpha_R", format!("{:e}", m.alpha_r));
    kv("beta_R", format!("{:e}", m.beta_r));
    kv("C_R", format!("{:e}", m.c_r));
    kv("D_R", format!("{:e}", m.d_r));
    if let Some(e) = &m.entry {
        kv("R_c", e.level.to_string());
        kv("E_c", format!("{:e}", e.error));
        kv("h_c", format!("{:e}", e.h));
        kv("N_c", e.n_dofs.to_string());
    }
    kv("h_opt", format!("{:e}", r.optimum.h_opt));
    kv("E_min", format!("{:e}", r.optimum.e_min));
    if let Some(bf) = r.e_min_bf {
        kv("E_min_BF", format!("{bf:e}"));
    }
    if let Some(t) = &r.tol {
        kv("tol", format!("{:e}", t.tol));
        kv("reachable", t.reachable.to_string());
        if let (Some(h), Some(n), Some(levels)) = (t.h_tol, t.n_tol, t.r_tol) {
            kv("h_tol", format!("{h:e}"));
            kv("N_tol", format!("{n:e}"));
            kv("R_tol", levels.to_string());
        }
    }
    s
}

pub fn predict_text(r: &PredictReport) -> String {
    let m = &r.model;
    let mut s = String::new();
    let _ = writeln!(s, "model     E(h) = {:.4e}·h^{} + {:.4e}·h^{:.4}", m.c_t, m.q, m.c_r, m.d_r);
    let _ = writeln!(s, "round-off alpha_R = {:.4e}, beta_R = {:.4}", m.alpha_r, m.beta_r);
    if let Some(e) = &m.entry {
        let _ = writeln!(
            s,
            "regime    R_c = {}, h_c = {:.4e}, E_c = {:.4e}, q_h = {:.4}",
            e.level, e.h, e.error, e.observed_order
        );
    }
    let _ = writeln!(s, "optimum   h_opt = {:.4e}, E_min = {:.4e}", r.optimum.h_opt, r.optimum.e_min);
    if let Some(bf) = r.e_min_bf {
        let _ = writeln!(s, "history   smallest error {bf:.4e}");
    }
    if let Some(t) = &r.tol {
        match (t.h_tol, t.n_tol, t.r_tol) {
            (Some(h), Some(n), Some(levels)) => {
                let _ = writeln!(
                    s,
                    "tol {:.3e} reachable: h_tol = {h:.4e}, N_tol = {n:.4e}, {levels} more regular refinements from h = {:.4e}",
                    t.tol, r.h_current
                );
            }
            _ => {
                let _ = writeln!(s, "tol {:.3e} unreachable: below E_min, stop refining", t.tol);
            }
        }
    }
    s
}
