use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use amrlab::config::{Config, PctPolicy, ProblemKind};
use amrlab::exec::Runner;
use amrlab::experiments::{self, StopReason};
use amrlab::history::{dof_error_points, load_history};
use amrlab::mesh_io::write_mesh;
use amrlab::output::{self, resolve_out_dir, Output};
use amrlab_core::error_metrics::l2_error_exact;
use amrlab_core::pipeline;
use amrlab_core::roundoff::{fit_roundoff, significant_points, RoundoffFit};

const EXIT_UNREACHABLE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "amrlab",
    version,
    about = "Adaptive finite-element experiments for the Poisson problem on the unit square"
)]
struct Cli {
    /// Output directory (default: $AMRLAB_OUT_DIR, then ./amrlab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trials solved concurrently during EOAMR searches.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Sequential execution and zero wall times: identical runs write identical files.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ProblemArgs {
    /// Flat key = value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemKind>,
    /// Bump sharpness in exp(-r²/c).
    #[arg(long)]
    c: Option<f64>,
    /// Element degree, 1 to 4.
    #[arg(long)]
    p: Option<usize>,
    /// Cells per side of the initial mesh (power of two).
    #[arg(long)]
    n0: Option<usize>,
    /// Extra refinements of the cells at the domain center.
    #[arg(long)]
    grade_depth: Option<u32>,
    /// Maximum refinement level (converge) or step count (eoamr).
    #[arg(long = "max-r")]
    max_r: Option<u32>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_dofs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ProblemArgs {
    fn resolve(&self, defaults: Config, extra: Config) -> anyhow::Result<Config> {
        let file = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let flags = Config {
            problem: self.problem,
            c: self.c,
            p: self.p,
            n0: self.n0,
            grade_depth: self.grade_depth,
            max_r: self.max_r,
            tol: self.tol,
            max_dofs: self.max_dofs,
            seed: self.seed,
            ..extra
        };
        Ok(file.overlay(&flags).with_defaults(&defaults))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Clone, Copy, Debug, ValueEnum, Default)]
enum Format {
    #[default]
    Text,
    Kv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once and report N and the exact L2 error.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Write the mesh as `id level x y side active` lines.
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
    },
    /// Regular refinement study.
    Converge {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// E_ref-oriented adaptive refinement campaign.
    Eoamr {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Acceptance slack: E_tst <= (1 + delta) E_ref.
        #[arg(long)]
        delta: Option<f64>,
        /// `eoamr` or a constant fraction in (0, 1].
        #[arg(long)]
        pct: Option<PctPolicy>,
    },
    /// Round-off measurement with u = 1.
    Roundoff {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum)]
        scenario: Scenario,
        /// Scenario B fraction.
        #[arg(long)]
        pct: Option<f64>,
        /// Scenario A fractions.
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.15,0.25,0.35,0.45,0.55,0.65,0.75,0.85,1")]
        pct_list: Vec<f64>,
        /// Scenario A base levels.
        #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
        base_levels: Vec<u32>,
        /// Scenario B base level.
        #[arg(long, default_value_t = 2)]
        base_level: u32,
    },
    /// Total-error model prediction from a regular history.
    Predict {
        /// History CSV of a regular refinement study.
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        tol: Option<f64>,
        /// History CSV of u = 1 runs to fit the round-off law from.
        #[arg(long, conflicts_with_all = ["alpha_r", "beta_r"])]
        roundoff: Option<PathBuf>,
        #[arg(long, requires = "beta_r")]
        alpha_r: Option<f64>,
        #[arg(long, requires = "alpha_r")]
        beta_r: Option<f64>,
        /// Regime tolerance on |q_h - (p + 1)|.
        #[arg(long, default_value_t = 0.1)]
        tol_q: f64,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let runner = Runner::new(cli.jobs, cli.deterministic);
    let out = || -> anyhow::Result<Output> { Ok(Output::new(resolve_out_dir(cli.out.as_deref()), cli.deterministic)?) };
    match cli.command {
        Command::Solve { problem, dump_mesh } => {
            let cfg = problem.resolve(experiments::converge_defaults(), Config::default())?;
            let spec = cfg.problem_spec()?;
            let mesh = experiments::initial_mesh(&cfg)?;
            let sol = pipeline::solve(&spec, &mesh)?;
            println!("cells {}", mesh.active_count());
            println!("N {}", sol.n_dofs());
            println!("h_min {:e}", mesh.min_cell_size());
            println!("E {:e}", l2_error_exact(&spec, &mesh, &sol));
            println!("residual {:e}", sol.residual);
            if let Some(path) = dump_mesh {
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_mesh(std::io::BufWriter::new(file), &mesh)?;
            }
            Ok(0)
        }
        Command::Converge { problem } => {
            let cfg = problem.resolve(experiments::converge_defaults(), Config::default())?;
            let spec = cfg.problem_spec()?;
            let mesh = experiments::initial_mesh(&cfg)?;
            let result = experiments::converge(&spec, &mesh, cfg.max_r.unwrap_or(6), cfg.tol, &runner)?;
            let out = out()?;
            out.config("converge", &cfg)?;
            let path = out.history("converge.csv", &result.records)?;
            out.plots(&output::converge_plots(&result.records))?;
            for r in &result.records {
                let q = r.observed_order.map(|q| format!("{q:.4}")).unwrap_or_else(|| "-".into());
                println!("R {:>2}  N {:>8}  E {:.6e}  q_h {q}", r.level, r.n_dofs, r.error);
            }
            let why = match result.stop {
                StopReason::Tolerance => "tolerance reached",
                StopReason::RoundoffFloor => "round-off floor",
                StopReason::MaxLevel => "level limit",
            };
            println!("stopped: {why}; history in {}", path.display());
            Ok(0)
        }
        Command::Eoamr { problem, delta, pct } => {
            let extra = Config { delta, pct, ..Default::default() };
            let cfg = problem.resolve(experiments::eoamr_defaults(), extra)?;
            let out = out()?;
            out.config("eoamr", &cfg)?;
            match cfg.pct.unwrap_or(PctPolicy::Eoamr) {
                PctPolicy::Eoamr => {
                    let run = experiments::eoamr(&cfg, &runner)?;
                    out.history("eoamr_history.csv", &run.history)?;
                    out.history("eoamr_trials.csv", &output::eoamr_trials(&run))?;
                    out.plots(&output::eoamr_plots(&run))?;
                    print!("{}", output::eoamr_summary(&run));
                }
                PctPolicy::Fixed(pct) => {
                    let spec = cfg.problem_spec()?;
                    let mesh = experiments::initial_mesh(&cfg)?;
                    let records = experiments::fixed_fraction_run(&spec, &mesh, pct, cfg.max_r.unwrap_or(12), &runner)?;
                    out.history("amr_history.csv", &records)?;
                    for r in &records {
                        println!("R {:>2}  N {:>8}  E {:.6e}", r.level, r.n_dofs, r.error);
                    }
                }
            }
            Ok(0)
        }
        Command::Roundoff { problem, scenario, pct, pct_list, base_levels, base_level } => {
            let extra = Config { pct: pct.map(PctPolicy::Fixed), ..Default::default() };
            let cfg = problem.resolve(experiments::roundoff_defaults(), extra)?;
            if cfg.problem != Some(ProblemKind::Constant) {
                bail!("round-off experiments use the u = 1 problem");
            }
            let p = cfg.p.unwrap_or(2);
            let out = out()?;
            out.config("roundoff", &cfg)?;
            match scenario {
                Scenario::A => {
                    let results = experiments::roundoff_scenario_a(p, &base_levels, &pct_list)?;
                    out.history("roundoff_A.csv", &output::scenario_a_records(&results))?;
                    out.plots(&output::scenario_a_plots(&results))?;
                    for r in &results {
                        println!("base R {}  (next REG: N {} E {:.4e})", r.base_level, r.next_reg.0, r.next_reg.1);
                        for s in &r.points {
                            println!("  pct {:.2}  N {:>8}  E {:.4e}", s.pct, s.n_dofs, s.error);
                        }
                    }
                }
                Scenario::B => {
                    let pct = match cfg.pct {
                        Some(PctPolicy::Fixed(v)) => v,
                        _ => 0.3,
                    };
                    let b = experiments::roundoff_scenario_b(p, base_level, pct, cfg.max_dofs.unwrap_or(300_000))?;
                    let recs =
                        |s: &[amrlab_core::roundoff::RoundoffPoint]| s.iter().map(|x| x.record()).collect::<Vec<_>>();
                    out.history("roundoff_B_amr.csv", &recs(&b.amr))?;
                    out.history("roundoff_B_reg.csv", &recs(&b.reg))?;
                    out.plots(&output::scenario_b_plots(&b))?;
                    for (name, fit) in [("AMR", &b.amr_fit), ("REG", &b.reg_fit)] {
                        println!(
                            "{name}  alpha_R {:.4e}  beta_R {:.4}  rms {:.3}  points {}",
                            fit.alpha_r, fit.beta_r, fit.residual, fit.points_used
                        );
                    }
                    println!("beta mismatch {:.1}%", 100.0 * b.beta_mismatch());
                }
            }
            Ok(0)
        }
        Command::Predict { history, p, tol, roundoff, alpha_r, beta_r, tol_q, format } => {
            let records = load_history(&history).with_context(|| format!("reading {}", history.display()))?;
            let fit = match (roundoff, alpha_r, beta_r) {
                (Some(path), _, _) => {
                    let rows = load_history(&path).with_context(|| format!("reading {}", path.display()))?;
                    fit_roundoff(&significant_points(&dof_error_points(&rows), 1.0))?
                }
                (None, Some(alpha_r), Some(beta_r)) => RoundoffFit { alpha_r, beta_r, residual: 0.0, points_used: 0 },
                _ => {
                    eprintln!("error: predict needs --roundoff FILE or both --alpha-r and --beta-r");
                    return Ok(EXIT_USAGE);
                }
            };
            let report = experiments::predict(&records, p, &fit, tol, tol_q)?;
            match format {
                Format::Text => print!("{}", output::predict_text(&report)),
                Format::Kv => print!("{}", output::predict_kv(&report)),
            }
            let unreachable = report.tol.is_some_and(|t| !t.reachable);
            Ok(if unreachable { EXIT_UNREACHABLE } else { 0 })
        }
    }
}
