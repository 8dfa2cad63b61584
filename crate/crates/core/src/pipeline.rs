//! The two-stage estimator end to end.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, NoiseLevel};
use crate::error::{Error, Result};
use crate::linalg::{self, SubspaceBasis};
use crate::rng::{self, streams};
use crate::stage1::{self, Stage1Config, Stage1Result};
use crate::stage2::{self, Stage2Config, Stage2Result};

/// Optional preprocessing for data with an unknown mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    #[default]
    None,
    /// Replace the samples by differences of consecutive pairs. This doubles
    /// both the corruption fraction and the noise covariance.
    PairwiseDifference,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RansacPlusConfig {
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub center: Centering,
}

impl RansacPlusConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        let mut config = RansacPlusConfig::default();
        config.stage2.epsilon = epsilon;
        config
    }

    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.stage2.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Timings {
    pub stage1: Duration,
    pub stage2: Duration,
    pub total: Duration,
}

/// Milliseconds as a float, the unit of harness output.
pub fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Estimated subspace, `d × r̃`.
    pub basis: SubspaceBasis,
    pub r_hat: usize,
    pub r_tilde: usize,
    pub stage1: Stage1Result,
    pub stage2: Stage2Result,
    pub timings: Timings,
}

fn differenced_data(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() % 2 != 0 {
        return Err(Error::OddSampleCount(x.ncols()));
    }
    Ok(datagen::difference_pairs(x))
}

/// The first stage exactly as [`ransac_plus`] runs it for the same inputs,
/// without the second stage. Useful when only `r̂` is of interest.
pub fn coarse_stage(
    x: &DMatrix<f64>,
    noise: &NoiseLevel,
    config: &RansacPlusConfig,
    seed: u64,
) -> Result<Stage1Result> {
    config.validate()?;
    let seed = rng::mix64(seed, streams::STAGE1);
    match config.center {
        Centering::None => stage1::coarse_estimate(x, noise, &config.stage1, seed),
        Centering::PairwiseDifference => {
            stage1::coarse_estimate(&differenced_data(x)?, &noise.scaled(2.0), &config.stage1, seed)
        }
    }
}

/// Coarse estimate, projection, fine estimate.
///
/// `noise` describes the data as given; when pairwise differencing is enabled
/// the doubled covariance and corruption fraction are used internally.
pub fn ransac_plus(
    x: &DMatrix<f64>,
    noise: &NoiseLevel,
    config: &RansacPlusConfig,
    seed: u64,
) -> Result<RecoveryResult> {
    config.validate()?;
    let start = Instant::now();

    let differenced;
    let (data, noise, epsilon) = match config.center {
        Centering::None => (x, *noise, config.stage2.epsilon),
        Centering::PairwiseDifference => {
            differenced = differenced_data(x)?;
            (&differenced, noise.scaled(2.0), (2.0 * config.stage2.epsilon).min(1.0))
        }
    };

    let coarse = stage1::coarse_estimate(data, &noise, &config.stage1, rng::mix64(seed, streams::STAGE1))?;
    let stage1_time = start.elapsed();

    let second = Instant::now();
    let projected = linalg::project(data, &coarse.basis)?;
    let fine = stage2::fine_estimate_unchecked_epsilon(
        &projected,
        &coarse.basis,
        &noise,
        &config.stage2,
        epsilon,
        rng::mix64(seed, streams::STAGE2),
    )?;
    let stage2_time = second.elapsed();

    Ok(RecoveryResult {
        basis: fine.lifted_basis.clone(),
        r_hat: coarse.r_hat,
        r_tilde: fine.r_tilde,
        stage1: coarse,
        stage2: fine,
        timings: Timings {
            stage1: stage1_time,
            stage2: stage2_time,
            total: start.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_sample_count_rejected_when_differencing() {
        let x = DMatrix::from_element(4, 7, 1.0);
        let config = RansacPlusConfig {
            center: Centering::PairwiseDifference,
            ..Default::default()
        };
        assert!(matches!(
            ransac_plus(&x, &NoiseLevel::ZERO, &config, 0),
            Err(Error::OddSampleCount(7))
        ));
    }

    #[test]
    fn invalid_config_rejected_early() {
        let x = DMatrix::from_element(4, 8, 1.0);
        let config = RansacPlusConfig::with_epsilon(0.9);
        assert!(matches!(
            ransac_plus(&x, &NoiseLevel::ZERO, &config, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn millis_keeps_fraction() {
        assert_eq!(millis(Duration::from_micros(2500)), 2.5);
    }
}
