//! Total-error model `E(h) = C_T·h^q + C_R·h^D_R` and the predictions built
//! on it: the optimal mesh size, the minimum reachable error, and the mesh
//! size for a tolerance.
//!
//! The round-off term comes from `E_R = α_R·N^β_R` with `N ≈ (p/h)²`, so
//! `C_R = α_R·p^(2β_R)` and `D_R = -2β_R`.

use alloc::format;

use crate::error::{Error, Result};
use crate::error_metrics::{observed_order, ConvergenceRecord, Strategy};
use crate::math;
use crate::roundoff::RoundoffFit;

/// The level where the observed order first matches the expected one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeEntry {
    /// Position in the filtered REG history.
    pub index: usize,
    pub level: u32,
    pub error: f64,
    pub h: f64,
    pub n_dofs: usize,
    pub observed_order: f64,
}

/// First REG record whose order against its predecessor lies within
/// `tol_q` of `q_expected`. `None` while the history is pre-asymptotic.
pub fn detect_regime(history: &[ConvergenceRecord], q_expected: f64, tol_q: f64) -> Option<RegimeEntry> {
    let reg: alloc::vec::Vec<&ConvergenceRecord> = history.iter().filter(|r| r.strategy == Strategy::Reg).collect();
    for k in 1..reg.len() {
        let Ok(q_h) = observed_order(reg[k - 1].error, reg[k].error) else {
            continue;
        };
        if math::abs(q_h - q_expected) <= tol_q {
            let r = reg[k];
            return Some(RegimeEntry {
                index: k,
                level: r.level,
                error: r.error,
                h: r.h_min,
                n_dofs: r.n_dofs,
                observed_order: q_h,
            });
        }
    }
    None
}

/// `C_T = E_c / h_c^q`.
pub fn extract_ct(e_c: f64, h_c: f64, q: f64) -> Result<f64> {
    if !(e_c > 0.0 && h_c > 0.0 && q > 0.0) {
        return Err(Error::invalid(format!("C_T needs positive E_c, h_c and q, got {e_c:e}, {h_c:e}, {q}")));
    }
    Ok(e_c / math::powf(h_c, q))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorModel {
    pub c_t: f64,
    pub q: f64,
    pub alpha_r: f64,
    pub beta_r: f64,
    pub c_r: f64,
    pub d_r: f64,
    pub degree: usize,
    pub entry: Option<RegimeEntry>,
}

impl ErrorModel {
    pub fn new(c_t: f64, q: f64, alpha_r: f64, beta_r: f64, degree: usize) -> Result<Self> {
        if !(c_t > 0.0 && q > 0.0 && alpha_r > 0.0 && degree > 0) || !beta_r.is_finite() {
            return Err(Error::invalid(format!(
                "invalid model coefficients C_T={c_t:e}, q={q}, α_R={alpha_r:e}, β_R={beta_r}, p={degree}"
            )));
        }
        Ok(ErrorModel {
            c_t,
            q,
            alpha_r,
            beta_r,
            c_r: alpha_r * math::powf(degree as f64, 2.0 * beta_r),
            d_r: -2.0 * beta_r,
            degree,
            entry: None,
        })
    }

    /// Model with `q = p + 1` and `C_T` taken at the regime entry.
    pub fn from_history(history: &[ConvergenceRecord], degree: usize, fit: &RoundoffFit, tol_q: f64) -> Result<Self> {
        let q = degree as f64 + 1.0;
        let entry = detect_regime(history, q, tol_q)
            .ok_or_else(|| Error::DegenerateModel(format!("observed order never came within {tol_q} of {q}")))?;
        let mut model = Self::new(extract_ct(entry.error, entry.h, q)?, q, fit.alpha_r, fit.beta_r, degree)?;
        model.entry = Some(entry);
        Ok(model)
    }

    pub fn truncation(&self, h: f64) -> f64 {
        self.c_t * math::powf(h, self.q)
    }

    pub fn roundoff(&self, h: f64) -> f64 {
        self.c_r * math::powf(h, self.d_r)
    }

    pub fn total(&self, h: f64) -> f64 {
        self.truncation(h) + self.roundoff(h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum {
    pub h_opt: f64,
    pub e_min: f64,
}

/// Stationary point of the total error:
/// `h_opt = (-C_T·q / (C_R·D_R))^(1/(D_R - q))`.
pub fn predict_optimum(model: &ErrorModel) -> Result<Optimum> {
    if !(model.d_r < 0.0) {
        return Err(Error::DegenerateModel(format!(
            "round-off exponent D_R = {} does not grow as h shrinks; no interior optimum",
            model.d_r
        )));
    }
    let ratio = -model.c_t * model.q / (model.c_r * model.d_r);
    let h_opt = math::powf(ratio, 1.0 / (model.d_r - model.q));
    Ok(Optimum { h_opt, e_min: model.total(h_opt) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TolPrediction {
    pub tol: f64,
    pub reachable: bool,
    pub h_tol: Option<f64>,
    /// `(p / h_tol)²`.
    pub n_tol: Option<f64>,
    /// Regular refinements from the current size, never negative.
    pub r_tol: Option<u32>,
}

/// Mesh size meeting `tol` by truncation alone, `h_tol = (tol / C_T)^(1/q)`,
/// when `tol` is at least the predicted minimum error.
pub fn predict_h_tol(model: &ErrorModel, tol: f64, h_current: f64) -> Result<TolPrediction> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol:e}")));
    }
    let e_min = predict_optimum(model)?.e_min;
    if tol < e_min {
        return Ok(TolPrediction { tol, reachable: false, h_tol: None, n_tol: None, r_tol: None });
    }
    let h_tol = math::powf(tol / model.c_t, 1.0 / model.q);
    let n_tol = math::powi(model.degree as f64 / h_tol, 2);
    let levels = math::ceil(math::log2(h_current / h_tol) - 1e-12).max(0.0) as u32;
    Ok(TolPrediction { tol, reachable: true, h_tol: Some(h_tol), n_tol: Some(n_tol), r_tol: Some(levels) })
}

/// Smallest recorded error of a brute-force sweep with its index.
pub fn brute_force_min(history: &[ConvergenceRecord]) -> Option<(usize, f64)> {
    history
        .iter()
        .enumerate()
        .filter(|(_, r)| r.error > 0.0)
        .min_by(|a, b| a.1.error.total_cmp(&b.1.error))
        .map(|(i, r)| (i, r.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_metrics::{ErrorKind, ErrorSource};

    fn reg(level: u32, h: f64, e: f64) -> ConvergenceRecord {
        ConvergenceRecord {
            strategy: Strategy::Reg,
            level,
            pct: 1.0,
            h_min: h,
            n_dofs: ((1.0 / h + 1.0) * (1.0 / h + 1.0)) as usize,
            error: e,
            observed_order: None,
            wall_time: 0.0,
            kind: ErrorKind::Total,
            source: ErrorSource::Exact,
        }
    }

    #[test]
    fn ct_values() {
        assert!((extract_ct(1e-2, 0.1, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((extract_ct(8e-6, 0.05, 3.0).unwrap() - 0.064).abs() < 1e-14);
        let ct = extract_ct(3.7e-5, 0.125, 2.0).unwrap();
        assert!((ct * 0.125f64.powi(2) / 3.7e-5 - 1.0).abs() < 1e-14);
        assert!(extract_ct(0.0, 0.1, 2.0).is_err());
        assert!(extract_ct(1.0, -0.1, 2.0).is_err());
    }

    #[test]
    fn regime_on_exact_power_law() {
        let hist: alloc::vec::Vec<_> = (0..6)
            .map(|k| {
                let h = 0.5f64.powi(k + 2);
                reg(k as u32, h, h * h)
            })
            .collect();
        let entry = detect_regime(&hist, 2.0, 0.1).unwrap();
        assert_eq!(entry.level, 1);
        assert!((extract_ct(entry.error, entry.h, 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regime_not_yet() {
        let hist: alloc::vec::Vec<_> = (0..4)
            .map(|k| {
                let h = 0.5f64.powi(k + 2);
                reg(k as u32, h, h)
            })
            .collect();
        assert!(detect_regime(&hist, 2.0, 0.1).is_none());
    }

    #[test]
    fn optimum_reference_case() {
        let m = ErrorModel { c_t: 1.0, q: 2.0, c_r: 1.0, d_r: -1.0, alpha_r: 1.0, beta_r: 0.5, degree: 1, entry: None };
        let opt = predict_optimum(&m).unwrap();
        assert!((opt.h_opt - 2f64.powf(-1.0 / 3.0)).abs() < 1e-14);
        let d = 1e-6;
        let slope = (m.total(opt.h_opt + d) - m.total(opt.h_opt - d)) / (2.0 * d);
        assert!(slope.abs() < 1e-8);
    }

    #[test]
    fn degenerate_roundoff() {
        let m = ErrorModel::new(1.0, 2.0, 1e-16, 0.0, 2).unwrap();
        assert!(matches!(predict_optimum(&m), Err(Error::DegenerateModel(_))));
        let m = ErrorModel::new(1.0, 2.0, 1e-16, -0.5, 2).unwrap();
        assert!(predict_optimum(&m).is_err());
    }

    #[test]
    fn model_coefficients_follow_definitions() {
        let m = ErrorModel::new(2.0, 3.0, 1e-17, 0.8, 2).unwrap();
        assert!((m.c_r - 1e-17 * 2f64.powf(1.6)).abs() < 1e-30);
        assert_eq!(m.d_r, -1.6);
    }

    #[test]
    fn h_tol_cases() {
        let m = ErrorModel::new(1.0, 2.0, 1e-16, 0.5, 1).unwrap();
        let t = predict_h_tol(&m, 1e-4, 1.0).unwrap();
        assert!(t.reachable);
        assert!((t.h_tol.unwrap() - 1e-2).abs() < 1e-15);
        assert!((t.n_tol.unwrap() - 1e4).abs() < 1e-6);
        assert_eq!(t.r_tol, Some(7));

        let e_min = predict_optimum(&m).unwrap().e_min;
        assert!(predict_h_tol(&m, e_min, 1.0).unwrap().reachable);
        let below = predict_h_tol(&m, 0.5 * e_min, 1.0).unwrap();
        assert!(!below.reachable && below.h_tol.is_none());
        assert!(predict_h_tol(&m, 0.0, 1.0).is_err());
    }

    #[test]
    fn brute_force_picks_smallest() {
        let hist = [reg(0, 0.5, 1e-3), reg(1, 0.25, 1e-9), reg(2, 0.125, 3e-9)];
        assert_eq!(brute_force_min(&hist), Some((1, 1e-9)));
    }
}
