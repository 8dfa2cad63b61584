//! Coarse subspace estimation by batch doubling.
//!
//! Starting from a batch of two samples, the estimator spans a random batch,
//! measures the median residual of the held-out samples against that span,
//! and doubles the batch until the median residual drops below a noise-driven
//! threshold. The returned subspace has dimension `r̂ = O(r*)` and nearly
//! contains the clean subspace.

use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::datagen::{NoiseLevel, DEFAULT_T0};
use crate::error::{Error, Result};
use crate::linalg::{self, SubspaceBasis, DEFAULT_RANK_TOL};
use crate::rng::{self, streams};

/// Smallest threshold constant for which the stopping rule is analysed.
pub const MIN_THRESHOLD_CONSTANT: f64 = 2.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Config {
    /// Threshold constant `C`.
    pub c: f64,
    /// Small-ball constant `t0`.
    pub t0: f64,
    /// Absolute residual floor, as a multiple of the median column norm.
    pub eta_floor_rel: f64,
    pub rank_tol: f64,
    /// Rank used inside the threshold. When absent the current batch size is used.
    pub r_star_hint: Option<usize>,
    pub initial_b: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            c: MIN_THRESHOLD_CONSTANT,
            t0: DEFAULT_T0,
            eta_floor_rel: 1e-9,
            rank_tol: DEFAULT_RANK_TOL,
            r_star_hint: None,
            initial_b: 2,
        }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= MIN_THRESHOLD_CONSTANT) {
            return Err(Error::InvalidConfig(format!("stage1 C must be >= 2.2, got {}", self.c)));
        }
        if !(self.t0 > 0.0 && self.t0 <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stage1 t0 must lie in (0, 1], got {}",
                self.t0
            )));
        }
        if !(self.eta_floor_rel >= 0.0 && self.eta_floor_rel.is_finite()) {
            return Err(Error::InvalidConfig("stage1 eta_floor must be non-negative".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidConfig("stage1 rank_tol must lie in (0, 1)".into()));
        }
        if self.initial_b == 0 {
            return Err(Error::InvalidConfig("stage1 initial_b must be >= 1".into()));
        }
        if self.r_star_hint == Some(0) {
            return Err(Error::InvalidConfig("stage1 r_star_hint must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Threshold,
    Exhausted,
}

/// One iteration of the doubling loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedResStep {
    pub batch_size: usize,
    pub med_res: f64,
    /// `max(η_thresh, floor)` in force at this iteration.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Result {
    pub basis: SubspaceBasis,
    pub r_hat: usize,
    /// `η_thresh` at the last iteration (zero when the loop never ran).
    pub eta_thresh: f64,
    /// Absolute residual floor derived from the data scale.
    pub eta_floor: f64,
    pub medres_trace: Vec<MedResStep>,
    pub terminated_by: Termination,
}

impl Stage1Result {
    pub fn final_med_res(&self) -> Option<f64> {
        self.medres_trace.last().map(|s| s.med_res)
    }

    /// `B:MedRes` pairs joined by `;`, as written to harness audit columns.
    pub fn trace_string(&self) -> String {
        self.medres_trace
            .iter()
            .map(|s| format!("{}:{}", s.batch_size, s.med_res))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// `C·(5·√(r_eff·‖Σ_ξ‖) + √tr(Σ_ξ)) / t0`
pub fn eta_thresh(c: f64, t0: f64, r_eff: usize, noise: &NoiseLevel) -> f64 {
    c * (5.0 * (r_eff as f64 * noise.spectral_norm).sqrt() + noise.trace.sqrt()) / t0
}

/// Median residual against `span(V)` over the columns not in `batch`.
pub fn med_res(basis: &SubspaceBasis, x: &DMatrix<f64>, batch: &[usize]) -> Result<f64> {
    let n = x.ncols();
    let mut in_batch = vec![false; n];
    for &i in batch {
        if i >= n {
            return Err(Error::Shape(format!("batch index {i} out of range for n = {n}")));
        }
        in_batch[i] = true;
    }
    let held_out: Vec<usize> = (0..n).filter(|&i| !in_batch[i]).collect();
    if held_out.is_empty() {
        return Err(Error::EmptyInput("batch covers every sample; nothing to score".into()));
    }
    let rest = x.select_columns(&held_out);
    let residuals = linalg::residual_norms(&rest, basis)?;
    linalg::median(&residuals)
}

/// Median of the column norms of `x`, the scale used for the residual floor.
pub(crate) fn data_scale(x: &DMatrix<f64>) -> Result<f64> {
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    linalg::median(&norms)
}

/// Batch-doubling coarse estimate of the clean subspace.
///
/// Only the raw data matrix is consulted; no inlier information is available
/// to this function.
pub fn coarse_estimate(x: &DMatrix<f64>, noise: &NoiseLevel, config: &Stage1Config, seed: u64) -> Result<Stage1Result> {
    config.validate()?;
    let (d, n) = x.shape();
    if n < 4 {
        return Err(Error::InsufficientSamples {
            needed: 4,
            available: n,
        });
    }
    if d < 2 {
        return Err(Error::Shape(format!("stage1 needs d >= 2, got {d}")));
    }
    let eta_floor = config.eta_floor_rel * data_scale(x)?;
    let limit = d.min(n - 1);
    let mut rng = rng::stream(seed, streams::STAGE1);
    let mut trace = Vec::new();
    let mut last: Option<(SubspaceBasis, f64)> = None;

    let mut b = config.initial_b;
    while b < limit {
        let mut batch = index::sample(&mut rng, n, b).into_vec();
        batch.sort_unstable();
        let basis = linalg::orthonormal_basis(&x.select_columns(&batch), config.rank_tol)?;
        let residual = med_res(&basis, x, &batch)?;
        let eta = eta_thresh(config.c, config.t0, config.r_star_hint.unwrap_or(b), noise);
        let threshold = eta.max(eta_floor);
        trace.push(MedResStep {
            batch_size: b,
            med_res: residual,
            threshold,
        });
        if residual <= threshold {
            return Ok(Stage1Result {
                r_hat: basis.dim(),
                basis,
                eta_thresh: eta,
                eta_floor,
                medres_trace: trace,
                terminated_by: Termination::Threshold,
            });
        }
        last = Some((basis, eta));
        b *= 2;
    }

    // The search ran out of room; fall back to the last span, or to the whole
    // space when not even the first batch fit.
    let (basis, eta) = last.unwrap_or_else(|| (SubspaceBasis::identity(d), 0.0));
    Ok(Stage1Result {
        r_hat: basis.dim(),
        basis,
        eta_thresh: eta,
        eta_floor,
        medres_trace: trace,
        terminated_by: Termination::Exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn threshold_examples() {
        assert_eq!(eta_thresh(2.2, 0.25, 10, &NoiseLevel::ZERO), 0.0);
        let noise = NoiseLevel::new(0.01, 1e-4).unwrap();
        // 2.2 · (5·√(10·1e-4) + √0.01) / 0.25
        let expected = 2.2 * (5.0 * 0.001_f64.sqrt() + 0.1) / 0.25;
        let got = eta_thresh(2.2, 0.25, 10, &noise);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 2.27140).abs() < 1e-4);
        let norm_only = NoiseLevel::new(1e-4, 1e-4).unwrap();
        let strip = |r| eta_thresh(2.2, 0.25, r, &norm_only) - 2.2 * 1e-4_f64.sqrt() / 0.25;
        assert!((strip(20) / strip(10) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn med_res_hand_example() {
        let e1 = SubspaceBasis::from_axes(2, &[0]).unwrap();
        // Column 0 is the batch; the rest have residuals 0, 1, 2.
        let x = dmatrix![5.0, 1.0, 0.0, 0.0; 5.0, 0.0, 1.0, 2.0];
        assert_eq!(med_res(&e1, &x, &[0]).unwrap(), 1.0);
        let permuted = dmatrix![0.0, 0.0, 5.0, 1.0; 2.0, 1.0, 5.0, 0.0];
        assert_eq!(med_res(&e1, &permuted, &[2]).unwrap(), 1.0);
        assert!(matches!(med_res(&e1, &x, &[0, 1, 2, 3]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn med_res_of_in_span_points_is_zero() {
        let e1 = SubspaceBasis::from_axes(2, &[0]).unwrap();
        let x = dmatrix![1.0, 2.0, -3.0; 0.0, 0.0, 0.0];
        assert_eq!(med_res(&e1, &x, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        let ok = Stage1Config::default();
        assert!(ok.validate().is_ok());
        assert!(Stage1Config { c: 2.0, ..ok.clone() }.validate().is_err());
        assert!(Stage1Config { t0: 0.0, ..ok.clone() }.validate().is_err());
        assert!(Stage1Config { t0: 1.5, ..ok.clone() }.validate().is_err());
        assert!(Stage1Config { initial_b: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn too_few_samples() {
        let x = DMatrix::from_element(5, 3, 1.0);
        let err = coarse_estimate(&x, &NoiseLevel::ZERO, &Stage1Config::default(), 0).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientSamples {
                needed: 4,
                available: 3
            }
        ));
    }

    #[test]
    fn exhausted_without_iterations_returns_full_space() {
        let x = DMatrix::from_fn(2, 10, |i, j| (i + j) as f64 + 1.0);
        let out = coarse_estimate(&x, &NoiseLevel::ZERO, &Stage1Config::default(), 0).unwrap();
        assert_eq!(out.terminated_by, Termination::Exhausted);
        assert!(out.medres_trace.is_empty());
        assert_eq!(out.r_hat, 2);
    }
}
