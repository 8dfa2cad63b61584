//! Reference estimators: classic RANSAC and oracle PCA.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::NoiseLevel;
use crate::error::{Error, Result};
use crate::linalg::{self, SubspaceBasis, DEFAULT_RANK_TOL};
use crate::rng;

pub const DEFAULT_CONSENSUS_FRACTION: f64 = 0.5;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
/// Per-attempt draw cap, as a multiple of the target dimension.
pub const DRAW_CAP_FACTOR: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicRansacConfig {
    /// Target dimension; must be known in advance.
    pub r: usize,
    pub dist_threshold: f64,
    pub consensus_fraction: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl ClassicRansacConfig {
    /// Defaults for `x` under the given noise level.
    pub fn for_data(r: usize, x: &DMatrix<f64>, noise: &NoiseLevel, seed: u64) -> Result<Self> {
        Ok(ClassicRansacConfig {
            r,
            dist_threshold: default_dist_threshold(x, noise, 1e-9)?,
            consensus_fraction: DEFAULT_CONSENSUS_FRACTION,
            max_iters: DEFAULT_MAX_ITERS,
            seed,
        })
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.r == 0 || self.r >= d {
            return Err(Error::InvalidConfig(format!(
                "classic RANSAC needs 1 <= r < d, got r = {}, d = {d}",
                self.r
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("classic RANSAC needs max_iters >= 1".into()));
        }
        if !(self.consensus_fraction > 0.0 && self.consensus_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "consensus_fraction must lie in (0, 1], got {}",
                self.consensus_fraction
            )));
        }
        if !(self.dist_threshold >= 0.0 && self.dist_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid dist_threshold {}",
                self.dist_threshold
            )));
        }
        Ok(())
    }
}

/// `max(floor_rel·median column norm, √tr(Σ_ξ) + 5√‖Σ_ξ‖)`
pub fn default_dist_threshold(x: &DMatrix<f64>, noise: &NoiseLevel, floor_rel: f64) -> Result<f64> {
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    Ok((floor_rel * linalg::median(&norms)?).max(noise.norm_bound()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicRansacResult {
    pub basis: SubspaceBasis,
    pub consensus_count: usize,
    /// Iterations performed, including the one that returned early.
    pub iterations: usize,
    /// Iterations whose draws never reached rank `r`.
    pub degenerate_attempts: usize,
}

/// Draws columns without replacement until their span has dimension `r`,
/// growing an orthonormal basis by twice-applied Gram–Schmidt.
fn sample_span<R: Rng>(x: &DMatrix<f64>, r: usize, rank_tol: f64, rng: &mut R) -> Option<DMatrix<f64>> {
    let (d, n) = x.shape();
    let cap = n.min(DRAW_CAP_FACTOR * r);
    let draws = rand::seq::index::sample(rng, n, cap);
    let mut basis = DMatrix::<f64>::zeros(d, r);
    let mut found = 0;
    for i in draws.iter() {
        let col = x.column(i);
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v: DVector<f64> = col.into_owned();
        for _ in 0..2 {
            let current = basis.columns(0, found);
            let coeffs = current.tr_mul(&v);
            v -= current * coeffs;
        }
        let left = v.norm();
        if left > rank_tol * norm {
            basis.set_column(found, &(v / left));
            found += 1;
            if found == r {
                return Some(basis);
            }
        }
    }
    None
}

/// Classic RANSAC: span random minimal samples and keep the subspace with the
/// largest consensus set.
pub fn classic_ransac(x: &DMatrix<f64>, config: &ClassicRansacConfig) -> Result<ClassicRansacResult> {
    let (d, n) = x.shape();
    config.validate(d)?;
    if n <= config.r {
        return Err(Error::InsufficientSamples {
            needed: config.r + 1,
            available: n,
        });
    }
    let target = config.consensus_fraction * n as f64;
    let mut best: Option<(SubspaceBasis, usize)> = None;
    let mut degenerate = 0;
    for iter in 0..config.max_iters {
        let mut rng = rng::stream(config.seed, iter as u64);
        let Some(columns) = sample_span(x, config.r, DEFAULT_RANK_TOL, &mut rng) else {
            degenerate += 1;
            continue;
        };
        let basis = SubspaceBasis::new(columns)?;
        let count = linalg::residual_norms(x, &basis)?
            .into_iter()
            .filter(|&res| res <= config.dist_threshold)
            .count();
        if count as f64 >= target {
            return Ok(ClassicRansacResult {
                basis,
                consensus_count: count,
                iterations: iter + 1,
                degenerate_attempts: degenerate,
            });
        }
        if best.as_ref().map_or(true, |(_, c)| count > *c) {
            best = Some((basis, count));
        }
    }
    match best {
        Some((basis, consensus_count)) => Ok(ClassicRansacResult {
            basis,
            consensus_count,
            iterations: config.max_iters,
            degenerate_attempts: degenerate,
        }),
        None => Err(Error::DegenerateData(format!(
            "no sample reached rank {} in {} attempts",
            config.r, config.max_iters
        ))),
    }
}

/// Top-`r` principal directions of the inlier columns (uncentered).
pub fn oracle_pca(x: &DMatrix<f64>, inlier_mask: &[bool], r: usize) -> Result<SubspaceBasis> {
    if inlier_mask.len() != x.ncols() {
        return Err(Error::Shape(format!(
            "mask has {} entries for {} samples",
            inlier_mask.len(),
            x.ncols()
        )));
    }
    if r == 0 || r > x.nrows() {
        return Err(Error::InvalidConfig(format!("oracle PCA needs 1 <= r <= d, got {r}")));
    }
    let inliers: Vec<usize> = (0..x.ncols()).filter(|&i| inlier_mask[i]).collect();
    if inliers.len() < r {
        return Err(Error::InsufficientSamples {
            needed: r,
            available: inliers.len(),
        });
    }
    let (_, vectors) = linalg::sorted_left_singular_pairs(&x.select_columns(&inliers));
    SubspaceBasis::new(vectors.columns(0, r).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn plane_data() -> DMatrix<f64> {
        // Six points in the x-y plane of R^3.
        dmatrix![1.0, 0.0, 1.0, 2.0, -1.0, 3.0;
                 0.0, 1.0, 1.0, -1.0, 2.0, 1.0;
                 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    }

    #[test]
    fn exact_on_clean_plane() {
        let x = plane_data();
        let config = ClassicRansacConfig::for_data(2, &x, &NoiseLevel::ZERO, 3).unwrap();
        let out = classic_ransac(&x, &config).unwrap();
        assert_eq!(out.consensus_count, 6);
        assert_eq!(out.iterations, 1);
        let truth = SubspaceBasis::from_axes(3, &[0, 1]).unwrap();
        assert!(linalg::subspace_distance(&out.basis, &truth).unwrap() < 1e-12);
    }

    #[test]
    fn rank_never_reached_is_degenerate() {
        let x = dmatrix![1.0, 2.0, 3.0, 4.0; 1.0, 2.0, 3.0, 4.0; 0.0, 0.0, 0.0, 0.0];
        let mut config = ClassicRansacConfig::for_data(2, &x, &NoiseLevel::ZERO, 0).unwrap();
        config.max_iters = 5;
        assert!(matches!(classic_ransac(&x, &config), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn config_checks() {
        let x = plane_data();
        let config = ClassicRansacConfig::for_data(3, &x, &NoiseLevel::ZERO, 0).unwrap();
        assert!(matches!(classic_ransac(&x, &config), Err(Error::InvalidConfig(_))));
        let config = ClassicRansacConfig {
            max_iters: 0,
            ..ClassicRansacConfig::for_data(1, &x, &NoiseLevel::ZERO, 0).unwrap()
        };
        assert!(classic_ransac(&x, &config).is_err());
    }

    #[test]
    fn threshold_uses_noise_bound() {
        let x = plane_data();
        let noise = NoiseLevel::new(0.04, 0.01).unwrap();
        let t = default_dist_threshold(&x, &noise, 1e-9).unwrap();
        assert!((t - (0.2 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_plain_pca_with_full_mask() {
        let x = plane_data();
        let all = oracle_pca(&x, &[true; 6], 2).unwrap();
        let truth = SubspaceBasis::from_axes(3, &[0, 1]).unwrap();
        assert!(linalg::subspace_distance(&all, &truth).unwrap() < 1e-12);
        assert!(matches!(
            oracle_pca(&x, &[true, false, false, false, false, false], 2),
            Err(Error::InsufficientSamples {
                needed: 2,
                available: 1
            })
        ));
        assert!(oracle_pca(&x, &[true; 5], 2).is_err());
    }
}
