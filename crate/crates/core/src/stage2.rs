//! Fine subspace estimation from repeated batch spectra.
//!
//! Working on the data projected onto the coarse basis `V`, the estimator
//! draws `T` random batches of `B` samples, records each batch's singular
//! values, and takes the per-index minimum of their squares across batches.
//! A batch made only of inliers pulls the `(r*+1)`-th minimum down to the noise
//! level while every batch keeps its first `r*` values large, so the first
//! index at which the minimum falls below `C′‖Σ_ξ‖` reveals `r*`. The output
//! subspace is spanned by the top left singular vectors of the batch that
//! attained the minimum, lifted back through `V`.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::NoiseLevel;
use crate::error::{Error, Result};
use crate::linalg::{self, SpectrumTable, SubspaceBasis};
use crate::rng::{self, streams};

pub const DEFAULT_C_PRIME: f64 = 2.5;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_T_CAP: usize = 1_000_000;
/// Upper bound accepted for the assumed corruption fraction in configs.
pub const MAX_CONFIG_EPSILON: f64 = 0.5;
/// Relative floor on the gap threshold, for noiseless data.
pub const GAP_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Config {
    /// Batch-size and gap constant `C′`.
    pub c_prime: f64,
    /// Failure probability `δ`.
    pub delta: f64,
    /// Assumed corruption fraction `ε`.
    pub epsilon: f64,
    /// Maximum number of batches.
    pub t_cap: usize,
    pub b_override: Option<usize>,
    /// Divide singular values by `√B` so their squares are batch-covariance
    /// eigenvalues, comparable with `‖Σ_ξ‖`.
    pub normalize_spectra: bool,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            c_prime: DEFAULT_C_PRIME,
            delta: DEFAULT_DELTA,
            epsilon: 0.0,
            t_cap: DEFAULT_T_CAP,
            b_override: None,
            normalize_spectra: true,
        }
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_prime > 0.0 && self.c_prime.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "stage2 C' must be positive, got {}",
                self.c_prime
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stage2 delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(0.0..=MAX_CONFIG_EPSILON).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "stage2 epsilon must lie in [0, {MAX_CONFIG_EPSILON}], got {}",
                self.epsilon
            )));
        }
        if self.t_cap == 0 {
            return Err(Error::InvalidConfig("stage2 T_cap must be >= 1".into()));
        }
        if self.b_override == Some(0) {
            return Err(Error::InvalidConfig("stage2 B override must be >= 1".into()));
        }
        Ok(())
    }
}

/// Batch size and batch count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sizing {
    pub batch_size: usize,
    pub batches: usize,
    /// True when `t_cap` replaced the formula's batch count.
    pub capped: bool,
    /// The formula's batch count before capping (may be infinite).
    pub uncapped_batches: f64,
}

/// `B = ⌈C′·max(r̂, ln((3/δ)·ln(1/δ)))⌉` and
/// `T = min(T_cap, ⌈(1/(1 − 1.1ε))^B · ln(1/δ)⌉)`.
pub fn stage2_sizing(r_hat: usize, epsilon: f64, delta: f64, c_prime: f64, t_cap: usize) -> Result<Sizing> {
    if r_hat == 0 {
        return Err(Error::InvalidConfig("stage2 needs r_hat >= 1".into()));
    }
    let log_term = ((3.0 / delta) * (1.0 / delta).ln()).ln();
    let batch_size = (c_prime * (r_hat as f64).max(log_term)).ceil() as usize;
    sizing_for_batch(batch_size, epsilon, delta, t_cap)
}

fn sizing_for_batch(batch_size: usize, epsilon: f64, delta: f64, t_cap: usize) -> Result<Sizing> {
    let survive = 1.0 - 1.1 * epsilon;
    if !(survive > 0.0) {
        return Err(Error::EpsilonTooLarge(epsilon));
    }
    let exponent = i32::try_from(batch_size).unwrap_or(i32::MAX);
    let raw = (1.0 / survive).powi(exponent) * (1.0 / delta).ln();
    let wanted = raw.ceil().max(1.0);
    let (batches, capped) = if wanted.is_finite() && wanted <= t_cap as f64 {
        (wanted as usize, false)
    } else {
        (t_cap, true)
    };
    Ok(Sizing {
        batch_size,
        batches,
        capped,
        uncapped_batches: raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankDetection {
    pub r_tilde: usize,
    pub gap_found: bool,
    /// `max(C′‖Σ_ξ‖, 1e-12·γ̂_1)`
    pub threshold: f64,
}

/// Smallest `r̃ ≥ 1` with `γ̂_{r̃+1} ≤ threshold`.
///
/// When no index qualifies `r̃ = r̂` and `gap_found` is false. When even `γ̂_1`
/// is under the threshold there is no signal above the noise; `r̃ = 1` is
/// returned with `gap_found` false.
pub fn detect_rank(gamma_hat: &[f64], c_prime: f64, noise: &NoiseLevel) -> Result<RankDetection> {
    let Some(&top) = gamma_hat.first() else {
        return Err(Error::EmptyInput("no singular values to scan".into()));
    };
    let threshold = (c_prime * noise.spectral_norm).max(GAP_FLOOR_REL * top);
    let r_hat = gamma_hat.len();
    // Zero-based: gamma_hat[r] is γ̂_{r+1}.
    let r_tilde = (1..r_hat).find(|&r| gamma_hat[r] <= threshold).unwrap_or(r_hat);
    let gap_found = r_tilde < r_hat && gamma_hat[r_tilde - 1] > threshold;
    Ok(RankDetection {
        r_tilde,
        gap_found,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Result {
    pub r_tilde: usize,
    /// Zero-based index of the batch whose top singular vectors were used.
    pub k: usize,
    pub spectrum: SpectrumTable,
    pub gamma_hat: Vec<f64>,
    pub threshold: f64,
    /// `Û_k`, a basis in `R^r̂`.
    pub fine_basis: SubspaceBasis,
    /// `VÛ_k`, a basis in `R^d`.
    pub lifted_basis: SubspaceBasis,
    pub gap_found: bool,
    pub t_used: usize,
    pub b_used: usize,
    pub capped: bool,
}

fn batch_indices(stage_seed: u64, j: usize, n: usize, b: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng::mix64(stage_seed, j as u64));
    let mut idx = index::sample(&mut rng, n, b).into_vec();
    idx.sort_unstable();
    idx
}

/// Singular values of a batch with at least as many columns as rows, from the
/// eigenvalues of its Gram matrix `XXᵀ`. Values below `√ε_mach·σ_1` come out
/// as rounding noise, far under the gap floor, so nothing downstream changes.
fn gram_spectrum(batch: &DMatrix<f64>, normalize: bool, out: &mut [f64]) {
    let mut gram = batch * batch.transpose();
    if normalize {
        gram /= batch.ncols() as f64;
    }
    let mut values: Vec<f64> = gram
        .symmetric_eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    out.copy_from_slice(&values);
}

/// Index of the smallest value, earliest index on ties.
fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, v) in values.enumerate() {
        if v < best.1 {
            best = (j, v);
        }
    }
    best.0
}

/// Fine estimate on projected data `x_hat = VᵀX` (`r̂ × n`).
///
/// Batches are independent and computed in parallel; batch `j` draws its
/// indices from a stream derived from `(seed, j)`, so the result does not
/// depend on the thread count.
pub fn fine_estimate(
    x_hat: &DMatrix<f64>,
    coarse: &SubspaceBasis,
    noise: &NoiseLevel,
    config: &Stage2Config,
    seed: u64,
) -> Result<Stage2Result> {
    config.validate()?;
    fine_estimate_unchecked_epsilon(x_hat, coarse, noise, config, config.epsilon, seed)
}

/// Same as [`fine_estimate`] but takes `epsilon` explicitly, allowing values
/// above the config bound (as produced by pairwise differencing) as long as
/// the batch-count formula stays defined.
pub(crate) fn fine_estimate_unchecked_epsilon(
    x_hat: &DMatrix<f64>,
    coarse: &SubspaceBasis,
    noise: &NoiseLevel,
    config: &Stage2Config,
    epsilon: f64,
    seed: u64,
) -> Result<Stage2Result> {
    let (r_hat, n) = x_hat.shape();
    if r_hat != coarse.dim() {
        return Err(Error::Shape(format!(
            "projected data has {r_hat} rows but the coarse basis has {} columns",
            coarse.dim()
        )));
    }
    let sizing = match config.b_override {
        Some(b) => sizing_for_batch(b, epsilon, config.delta, config.t_cap)?,
        None => stage2_sizing(r_hat, epsilon, config.delta, config.c_prime, config.t_cap)?,
    };
    let b = sizing.batch_size;
    if b < r_hat {
        return Err(Error::InvalidConfig(format!(
            "stage2 batch size {b} is smaller than r_hat = {r_hat}"
        )));
    }
    if n < b {
        return Err(Error::InsufficientSamples {
            needed: b,
            available: n,
        });
    }
    let t = sizing.batches;
    let stage_seed = rng::mix64(seed, streams::STAGE2);

    let mut flat = vec![0.0; t * r_hat];
    flat.par_chunks_mut(r_hat)
        .enumerate()
        .try_for_each(|(j, row)| -> Result<()> {
            let batch = x_hat.select_columns(&batch_indices(stage_seed, j, n, b));
            gram_spectrum(&batch, config.normalize_spectra, row);
            Ok(())
        })?;
    let spectrum = SpectrumTable::from_flat(r_hat, flat, config.normalize_spectra)?;
    let gamma_hat = spectrum.min_squared();
    let detection = detect_rank(&gamma_hat, config.c_prime, noise)?;
    let r_tilde = detection.r_tilde;

    let k = if r_tilde < r_hat {
        argmin_first(spectrum.rows().map(|row| row[r_tilde]))
    } else {
        0
    };
    let batch = x_hat.select_columns(&batch_indices(stage_seed, k, n, b));
    let (_, vectors) = linalg::sorted_left_singular_pairs(&batch);
    let fine_basis = SubspaceBasis::new(vectors.columns(0, r_tilde).into_owned())?;
    let lifted_basis = coarse.lift(&fine_basis)?;

    Ok(Stage2Result {
        r_tilde,
        k,
        spectrum,
        gamma_hat,
        threshold: detection.threshold,
        fine_basis,
        lifted_basis,
        gap_found: detection.gap_found,
        t_used: t,
        b_used: b,
        capped: sizing.capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_examples() {
        let s = stage2_sizing(20, 0.0, 0.05, 4.0, 20_000).unwrap();
        assert_eq!(s.batch_size, 80);
        let s = stage2_sizing(3, 0.0, 0.05, 4.0, 20_000).unwrap();
        // ln(1/0.05) = 2.9957… rounds up to 3 batches.
        assert_eq!(s.batches, 3);
        assert!(!s.capped);
        let s = sizing_for_batch(80, 0.2, 0.05, 20_000).unwrap();
        assert!(s.capped);
        assert_eq!(s.batches, 20_000);
        assert!(
            (s.uncapped_batches / 1.29e9 - 1.0).abs() < 0.01,
            "{}",
            s.uncapped_batches
        );
        // Small r_hat is dominated by the logarithmic term: ⌈4·5.19⌉ = 21.
        assert_eq!(stage2_sizing(1, 0.0, 0.05, 4.0, 10).unwrap().batch_size, 21);
    }

    #[test]
    fn sizing_rejects_large_epsilon() {
        assert!(matches!(
            stage2_sizing(5, 0.95, 0.05, 4.0, 10),
            Err(Error::EpsilonTooLarge(_))
        ));
        assert!(stage2_sizing(5, 0.9, 0.05, 4.0, 10).is_ok());
    }

    #[test]
    fn detect_noiseless_gap() {
        let d = detect_rank(&[1.0, 0.9, 1e-6 * 1e-7], 4.0, &NoiseLevel::ZERO).unwrap();
        assert_eq!(d.r_tilde, 2);
        assert!(d.gap_found);
        let d = detect_rank(&[1.0, 0.9, 1e-13], 4.0, &NoiseLevel::ZERO).unwrap();
        assert_eq!(d.r_tilde, 2);
    }

    #[test]
    fn detect_with_noise_threshold() {
        let noise = NoiseLevel::new(0.1, 0.01).unwrap();
        // threshold = 4 · 0.01 = 0.04
        let d = detect_rank(&[1.0, 0.5, 0.03, 0.01], 4.0, &noise).unwrap();
        assert_eq!((d.r_tilde, d.gap_found), (2, true));
        let d = detect_rank(&[1.0, 0.5, 0.3], 4.0, &noise).unwrap();
        assert_eq!((d.r_tilde, d.gap_found), (3, false));
        let d = detect_rank(&[0.01, 0.005], 4.0, &noise).unwrap();
        assert_eq!((d.r_tilde, d.gap_found), (1, false));
        assert!(detect_rank(&[], 4.0, &noise).is_err());
    }

    #[test]
    fn gram_spectrum_matches_svd() {
        let m = DMatrix::from_fn(4, 9, |i, j| ((3 * i + 5 * j) % 7) as f64 - 3.0 + 0.1 * j as f64);
        for normalize in [false, true] {
            let mut fast = vec![0.0; 4];
            gram_spectrum(&m, normalize, &mut fast);
            let svd = linalg::batch_singular_values(&m, normalize).unwrap();
            for (a, b) in fast.iter().zip(&svd) {
                assert!((a - b).abs() < 1e-10 * svd[0], "{fast:?} vs {svd:?}");
            }
        }
    }

    #[test]
    fn argmin_prefers_earliest() {
        assert_eq!(argmin_first([3.0, 1.0, 1.0, 2.0].into_iter()), 1);
        assert_eq!(argmin_first([0.0, 0.0].into_iter()), 0);
    }

    #[test]
    fn config_validation() {
        let ok = Stage2Config::default();
        assert!(ok.validate().is_ok());
        assert!(Stage2Config {
            epsilon: 0.7,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(Stage2Config {
            delta: 1.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(Stage2Config { t_cap: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn insufficient_samples() {
        let v = SubspaceBasis::identity(3);
        let x = DMatrix::from_element(3, 10, 1.0);
        let err = fine_estimate(&x, &v, &NoiseLevel::ZERO, &Stage2Config::default(), 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { .. }));
    }
}
