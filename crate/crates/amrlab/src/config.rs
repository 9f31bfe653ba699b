//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # sharp bump, linear elements
//! problem = gaussian
//! c = 1e-5
//! p = 1
//! ```
//!
//! Blank lines and `#` comments are ignored. Command-line flags are merged
//! on top of file values with [`Config::overlay`].

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use amrlab_core::ProblemSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Gaussian,
    Constant,
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(ProblemKind::Gaussian),
            "constant" => Ok(ProblemKind::Constant),
            other => Err(format!("unknown problem '{other}' (expected gaussian or constant)")),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Gaussian => "gaussian",
            ProblemKind::Constant => "constant",
        })
    }
}

/// How AMR steps choose their marking fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PctPolicy {
    /// Search for the smallest fraction matching the regular error.
    Eoamr,
    /// The same fraction every step.
    Fixed(f64),
}

impl FromStr for PctPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "eoamr" {
            return Ok(PctPolicy::Eoamr);
        }
        let v: f64 = s.parse().map_err(|_| format!("pct must be 'eoamr' or a fraction, got '{s}'"))?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(format!("pct fraction {v} outside (0, 1]"));
        }
        Ok(PctPolicy::Fixed(v))
    }
}

impl fmt::Display for PctPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PctPolicy::Eoamr => f.write_str("eoamr"),
            PctPolicy::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Every field is optional; commands fill in their own defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub problem: Option<ProblemKind>,
    pub c: Option<f64>,
    pub p: Option<usize>,
    pub n0: Option<usize>,
    pub grade_depth: Option<u32>,
    pub pct: Option<PctPolicy>,
    pub delta: Option<f64>,
    pub tol: Option<f64>,
    pub max_r: Option<u32>,
    pub max_dofs: Option<usize>,
    /// Recorded for provenance; every experiment is deterministic.
    pub seed: Option<u64>,
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| ConfigError::Parse { line, message: format!("bad value '{value}' for {key}: {e}") })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse { line, message: format!("expected key = value, got '{content}'") });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "problem" => cfg.problem = Some(parse_value(key, value, line)?),
                "c" => cfg.c = Some(parse_value(key, value, line)?),
                "p" => cfg.p = Some(parse_value(key, value, line)?),
                "n0" => cfg.n0 = Some(parse_value(key, value, line)?),
                "grade_depth" => cfg.grade_depth = Some(parse_value(key, value, line)?),
                "pct" => cfg.pct = Some(parse_value(key, value, line)?),
                "delta" => cfg.delta = Some(parse_value(key, value, line)?),
                "tol" => cfg.tol = Some(parse_value(key, value, line)?),
                "max_R" => cfg.max_r = Some(parse_value(key, value, line)?),
                "max_dofs" => cfg.max_dofs = Some(parse_value(key, value, line)?),
                "seed" => cfg.seed = Some(parse_value(key, value, line)?),
                other => return Err(ConfigError::Parse { line, message: format!("unknown key '{other}'") }),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Values set in `top` win.
    pub fn overlay(self, top: &Config) -> Config {
        Config {
            problem: top.problem.or(self.problem),
            c: top.c.or(self.c),
            p: top.p.or(self.p),
            n0: top.n0.or(self.n0),
            grade_depth: top.grade_depth.or(self.grade_depth),
            pct: top.pct.or(self.pct),
            delta: top.delta.or(self.delta),
            tol: top.tol.or(self.tol),
            max_r: top.max_r.or(self.max_r),
            max_dofs: top.max_dofs.or(self.max_dofs),
            seed: top.seed.or(self.seed),
        }
    }

    /// Fills unset fields from `defaults`.
    pub fn with_defaults(self, defaults: &Config) -> Config {
        defaults.clone().overlay(&self)
    }

    /// Same format as [`Config::parse`] reads; unset keys are skipped.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        put("problem", self.problem.map(|v| v.to_string()));
        put("c", self.c.map(|v| format!("{v:e}")));
        put("p", self.p.map(|v| v.to_string()));
        put("n0", self.n0.map(|v| v.to_string()));
        put("grade_depth", self.grade_depth.map(|v| v.to_string()));
        put("pct", self.pct.map(|v| v.to_string()));
        put("delta", self.delta.map(|v| v.to_string()));
        put("tol", self.tol.map(|v| format!("{v:e}")));
        put("max_R", self.max_r.map(|v| v.to_string()));
        put("max_dofs", self.max_dofs.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        out
    }

    /// Problem from `problem`, `c` and `p` (gaussian, `c = 1`, `p = 1` when
    /// unset).
    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let p = self.p.unwrap_or(1);
        let spec = match self.problem.unwrap_or(ProblemKind::Gaussian) {
            ProblemKind::Gaussian => ProblemSpec::gaussian(self.c.unwrap_or(1.0), p),
            ProblemKind::Constant => ProblemSpec::constant(p),
        };
        spec.map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
