//! Synthetic data under the adversarial-and-noisy contamination model.
//!
//! A dataset is produced in three steps, each driven by its own seeded
//! stream: draw clean samples from a planted low-rank Gaussian, add i.i.d.
//! Gaussian noise, then let an adversary overwrite `⌊εn⌋` uniformly chosen
//! columns. The inlier mask is kept on the dataset for metrics only; no
//! estimator in this crate takes it as input except [`crate::baselines::oracle_pca`].

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SubspaceBasis, DEFAULT_RANK_TOL};
use crate::rng::{self, streams};

/// Default small-ball constant for standard Gaussian normalized samples.
pub const DEFAULT_T0: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Gaussian,
}

/// The planted covariance `Σ* = U* D* U*ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanModel {
    basis: SubspaceBasis,
    eigenvalues: Vec<f64>,
    distribution: DistributionKind,
}

impl CleanModel {
    pub fn new(basis: SubspaceBasis, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != basis.dim() {
            return Err(Error::InvalidModel(format!(
                "{} eigenvalues for a rank-{} basis",
                eigenvalues.len(),
                basis.dim()
            )));
        }
        if eigenvalues.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidModel("eigenvalues must be positive and finite".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidModel("eigenvalues must be non-increasing".into()));
        }
        Ok(CleanModel {
            basis,
            eigenvalues,
            distribution: DistributionKind::Gaussian,
        })
    }

    /// A model whose subspace is the span of a random Gaussian `d × r*` matrix.
    pub fn random(d: usize, eigenvalues: Vec<f64>, seed: u64) -> Result<Self> {
        let r_star = eigenvalues.len();
        if r_star == 0 || r_star > d {
            return Err(Error::InvalidModel(format!(
                "need 1 <= r* <= d, got r* = {r_star}, d = {d}"
            )));
        }
        let mut rng = rng::stream(seed, streams::MODEL_BASIS);
        let basis = loop {
            let g = gaussian_matrix(&mut rng, d, r_star);
            let b = linalg::orthonormal_basis(&g, DEFAULT_RANK_TOL)?;
            if b.dim() == r_star {
                break b;
            }
        };
        CleanModel::new(basis, eigenvalues)
    }

    /// Random subspace with all nonzero eigenvalues equal to `gamma`.
    pub fn isotropic(d: usize, r_star: usize, gamma: f64, seed: u64) -> Result<Self> {
        CleanModel::random(d, vec![gamma; r_star], seed)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ambient_dim()
    }

    pub fn r_star(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn distribution(&self) -> DistributionKind {
        self.distribution
    }

    pub fn gamma_min(&self) -> f64 {
        *self.eigenvalues.last().expect("model has rank >= 1")
    }

    pub fn gamma_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `U* D*^{1/2}`, mapping normalized samples `w` to clean samples.
    pub fn factor(&self) -> DMatrix<f64> {
        let mut f = self.basis.columns().clone();
        for (j, &g) in self.eigenvalues.iter().enumerate() {
            f.column_mut(j).scale_mut(g.sqrt());
        }
        f
    }

    /// Same subspace, eigenvalues multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        CleanModel::new(
            self.basis.clone(),
            self.eigenvalues.iter().map(|g| g * factor).collect(),
        )
    }
}

/// Noise magnitudes consumed by the estimators: `tr(Σ_ξ)` and `‖Σ_ξ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub trace: f64,
    pub spectral_norm: f64,
}

impl NoiseLevel {
    pub const ZERO: NoiseLevel = NoiseLevel {
        trace: 0.0,
        spectral_norm: 0.0,
    };

    pub fn new(trace: f64, spectral_norm: f64) -> Result<Self> {
        if !(spectral_norm >= 0.0 && trace >= spectral_norm && trace.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "noise level needs trace >= spectral norm >= 0, got trace {trace}, norm {spectral_norm}"
            )));
        }
        Ok(NoiseLevel { trace, spectral_norm })
    }

    /// Bound on the norm of a noise draw that holds with high probability:
    /// `√tr(Σ_ξ) + 5√‖Σ_ξ‖`.
    pub fn norm_bound(&self) -> f64 {
        self.trace.sqrt() + 5.0 * self.spectral_norm.sqrt()
    }

    pub fn scaled(&self, factor: f64) -> NoiseLevel {
        NoiseLevel {
            trace: self.trace * factor,
            spectral_norm: self.spectral_norm * factor,
        }
    }
}

/// Gaussian noise covariance `Σ_ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Zero,
    /// `Σ_ξ = (sigma2 / d)·I_d`, so `tr(Σ_ξ) = sigma2`.
    Isotropic {
        sigma2: f64,
        d: usize,
    },
    /// `Σ_ξ = diag(variances)`.
    Diagonal {
        variances: Vec<f64>,
    },
}

impl NoiseModel {
    pub fn isotropic(sigma2: f64, d: usize) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) || d == 0 {
            return Err(Error::InvalidModel(format!(
                "invalid isotropic noise sigma2 = {sigma2}, d = {d}"
            )));
        }
        if sigma2 == 0.0 {
            return Ok(NoiseModel::Zero);
        }
        Ok(NoiseModel::Isotropic { sigma2, d })
    }

    pub fn trace(&self) -> f64 {
        match self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Isotropic { sigma2, .. } => *sigma2,
            NoiseModel::Diagonal { variances } => variances.iter().sum(),
        }
    }

    pub fn spectral_norm(&self) -> f64 {
        match self {
            NoiseModel::Zero => 0.0,
            NoiseModel::Isotropic { sigma2, d } => sigma2 / *d as f64,
            NoiseModel::Diagonal { variances } => variances.iter().copied().fold(0.0, f64::max),
        }
    }

    /// The variance parameter `σ²` (equal to the trace).
    pub fn sigma2(&self) -> f64 {
        self.trace()
    }

    pub fn level(&self) -> NoiseLevel {
        NoiseLevel {
            trace: self.trace(),
            spectral_norm: self.spectral_norm(),
        }
    }

    /// Covariance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NoiseModel {
        match self {
            NoiseModel::Zero => NoiseModel::Zero,
            NoiseModel::Isotropic { sigma2, d } => NoiseModel::Isotropic {
                sigma2: sigma2 * factor,
                d: *d,
            },
            NoiseModel::Diagonal { variances } => NoiseModel::Diagonal {
                variances: variances.iter().map(|v| v * factor).collect(),
            },
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            NoiseModel::Zero => Ok(()),
            NoiseModel::Isotropic { sigma2, d: nd } => {
                if *nd != d {
                    return Err(Error::Shape(format!("noise model is for d = {nd}, data has d = {d}")));
                }
                if !(*sigma2 >= 0.0 && sigma2.is_finite()) {
                    return Err(Error::InvalidModel(format!("invalid noise variance {sigma2}")));
                }
                Ok(())
            }
            NoiseModel::Diagonal { variances } => {
                if variances.len() != d {
                    return Err(Error::Shape(format!("{} noise variances for d = {d}", variances.len())));
                }
                if variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidModel("noise variances must be non-negative".into()));
                }
                Ok(())
            }
        }
    }
}

/// How the adversary fills the replaced columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    None,
    /// Outliers drawn from `N(0, Σ̂)` where `Σ̂` has `rank` nonzero eigenvalues,
    /// all equal to `scale`, on a random subspace orthogonal to `span(U*)`.
    OrthogonalLowRank {
        rank: usize,
        scale: f64,
    },
    /// Outliers that look like clean samples plus a Gaussian leak of standard
    /// deviation `scale` along one fixed direction orthogonal to `span(U*)`.
    InlierMimic {
        scale: f64,
    },
    /// Every outlier is `magnitude · direction`. Without an explicit direction a
    /// random unit vector orthogonal to `span(U*)` is used.
    PointMass {
        direction: Option<Vec<f64>>,
        magnitude: f64,
    },
}

impl AdversaryStrategy {
    /// The adversary of the ε-sweep experiments: rank 2, eigenvalues 10.
    pub fn orthogonal_rank2() -> Self {
        AdversaryStrategy::OrthogonalLowRank { rank: 2, scale: 10.0 }
    }
}

/// A corrupted sample matrix together with its hidden ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedDataset {
    pub x: DMatrix<f64>,
    pub epsilon: f64,
    pub inlier_mask: Vec<bool>,
    pub clean_model: CleanModel,
    pub noise_model: NoiseModel,
    pub adversary: AdversaryStrategy,
    pub seed: u64,
}

impl CorruptedDataset {
    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn d(&self) -> usize {
        self.x.nrows()
    }

    pub fn outlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&m| !m).count()
    }
}

/// `⌊εn⌋`, robust to the representation error of decimal fractions
/// (`0.29 · 100` evaluates to `28.999…` in binary floating point).
pub fn outlier_count(epsilon: f64, n: usize) -> usize {
    let product = epsilon * n as f64;
    let nearest = product.round();
    if (product - nearest).abs() <= 1e-9 * product.abs().max(1.0) {
        nearest as usize
    } else {
        product.floor() as usize
    }
}

/// Clean samples and their normalized coordinates.
#[derive(Debug, Clone)]
pub struct CleanSample {
    /// `d × n`, every column in `span(U*)`.
    pub x: DMatrix<f64>,
    /// `r* × n`, i.i.d. standard normal.
    pub w: DMatrix<f64>,
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Column-major fill keeps the draw order stable.
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)),
    )
}

/// Draws `n` samples `x_i = U* D*^{1/2} w_i` with `w_i ~ N(0, I)`.
pub fn generate_clean(model: &CleanModel, n: usize, seed: u64) -> Result<CleanSample> {
    if n == 0 {
        return Err(Error::EmptyInput("cannot draw zero samples".into()));
    }
    let mut rng = rng::stream(seed, streams::CLEAN);
    let w = gaussian_matrix(&mut rng, model.r_star(), n);
    let x = model.factor() * &w;
    Ok(CleanSample { x, w })
}

/// Adds an independent `N(0, Σ_ξ)` draw to every column.
pub fn apply_noise(x: &DMatrix<f64>, noise: &NoiseModel, seed: u64) -> Result<DMatrix<f64>> {
    noise.validate(x.nrows())?;
    let mut out = x.clone();
    let mut rng = rng::stream(seed, streams::NOISE);
    match noise {
        NoiseModel::Zero => {}
        NoiseModel::Isotropic { sigma2, d } => {
            let std = (sigma2 / *d as f64).sqrt();
            for v in out.iter_mut() {
                *v += std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        NoiseModel::Diagonal { variances } => {
            let stds: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
            for mut col in out.column_iter_mut() {
                for (v, s) in col.iter_mut().zip(&stds) {
                    *v += s * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }
    Ok(out)
}

/// Random orthonormal `d × k` basis orthogonal to `span(avoid)`.
fn orthogonal_directions(rng: &mut ChaCha8Rng, avoid: &SubspaceBasis, k: usize) -> Result<SubspaceBasis> {
    let d = avoid.ambient_dim();
    if k == 0 || k + avoid.dim() > d {
        return Err(Error::InfeasibleAdversary(format!(
            "cannot place {k} directions orthogonal to a {}-dimensional subspace of R^{d}",
            avoid.dim()
        )));
    }
    let u = avoid.columns();
    loop {
        let mut g = gaussian_matrix(rng, d, k);
        // Two passes of projection keep the leak at rounding level.
        for _ in 0..2 {
            let coeffs = u.tr_mul(&g);
            g.gemm(-1.0, u, &coeffs, 1.0);
        }
        let q = linalg::orthonormal_basis(&g, DEFAULT_RANK_TOL)?;
        if q.dim() == k {
            let mut cols = q.into_columns();
            let coeffs = u.transpose() * &cols;
            cols.gemm(-1.0, u, &coeffs, 1.0);
            return linalg::orthonormal_basis(&cols, DEFAULT_RANK_TOL);
        }
    }
}

/// Replaces `⌊εn⌋` uniformly chosen columns according to `strategy`.
pub fn apply_adversary(
    x: &DMatrix<f64>,
    epsilon: f64,
    strategy: &AdversaryStrategy,
    clean_model: &CleanModel,
    noise_model: &NoiseModel,
    seed: u64,
) -> Result<CorruptedDataset> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    let (d, n) = x.shape();
    if d != clean_model.ambient_dim() {
        return Err(Error::Shape(format!(
            "data has d = {d} but the model lives in R^{}",
            clean_model.ambient_dim()
        )));
    }
    let count = match strategy {
        AdversaryStrategy::None => 0,
        _ => outlier_count(epsilon, n),
    };
    let mut out = x.clone();
    let mut mask = vec![true; n];
    let mut point_rng = rng::stream(seed, streams::ADVERSARY_POINTS);
    let r_star = clean_model.r_star();

    // Draw the outlier geometry first so that infeasible strategies fail even
    // when no column ends up replaced.
    let mut replacement: Box<dyn FnMut(&mut ChaCha8Rng) -> DVector<f64>> = match strategy {
        AdversaryStrategy::None => Box::new(|_| unreachable!("no columns are replaced")),
        AdversaryStrategy::OrthogonalLowRank { rank, scale } => {
            if *rank == 0 || *rank > d - r_star {
                return Err(Error::InfeasibleAdversary(format!(
                    "orthogonal rank {rank} not in 1..={}",
                    d - r_star
                )));
            }
            if !(*scale >= 0.0 && scale.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "adversary scale {scale} must be non-negative"
                )));
            }
            let q = orthogonal_directions(&mut point_rng, clean_model.basis(), *rank)?;
            let factor = q.into_columns() * scale.sqrt();
            let k = *rank;
            Box::new(move |rng| {
                let g = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
                &factor * g
            })
        }
        AdversaryStrategy::InlierMimic { scale } => {
            let q = orthogonal_directions(&mut point_rng, clean_model.basis(), 1)?;
            let leak = q.columns().column(0).into_owned();
            let factor = clean_model.factor();
            let scale = *scale;
            Box::new(move |rng| {
                let w = DVector::from_iterator(r_star, (0..r_star).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let g: f64 = rng.sample(StandardNormal);
                &factor * w + &leak * (scale * g)
            })
        }
        AdversaryStrategy::PointMass { direction, magnitude } => {
            let unit = match direction {
                Some(dir) => {
                    if dir.len() != d {
                        return Err(Error::Shape(format!(
                            "point-mass direction has length {}, expected {d}",
                            dir.len()
                        )));
                    }
                    let v = DVector::from_column_slice(dir);
                    let norm = v.norm();
                    if !(norm > 0.0) {
                        return Err(Error::InvalidModel("point-mass direction must be nonzero".into()));
                    }
                    v / norm
                }
                None => orthogonal_directions(&mut point_rng, clean_model.basis(), 1)?
                    .columns()
                    .column(0)
                    .into_owned(),
            };
            let point = unit * *magnitude;
            Box::new(move |_| point.clone())
        }
    };

    if count > 0 {
        let mut index_rng = rng::stream(seed, streams::ADVERSARY_INDICES);
        let mut chosen = index::sample(&mut index_rng, n, count).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            out.set_column(i, &replacement(&mut point_rng));
            mask[i] = false;
        }
    }

    Ok(CorruptedDataset {
        x: out,
        epsilon,
        inlier_mask: mask,
        clean_model: clean_model.clone(),
        noise_model: noise_model.clone(),
        adversary: strategy.clone(),
        seed,
    })
}

/// Everything needed to draw one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub model: CleanModel,
    pub n: usize,
    pub noise: NoiseModel,
    pub epsilon: f64,
    pub adversary: AdversaryStrategy,
}

/// Runs clean sampling, noise and the adversary with sub-streams of `seed`.
pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<CorruptedDataset> {
    let clean = generate_clean(&spec.model, spec.n, seed)?;
    let noisy = apply_noise(&clean.x, &spec.noise, seed)?;
    apply_adversary(&noisy, spec.epsilon, &spec.adversary, &spec.model, &spec.noise, seed)
}

/// Differences of consecutive pairs, removing an unknown mean.
///
/// Column `i` of the output is `x_{2i} − x_{2i+1}` (zero-based); it is an
/// inlier iff both parents are. The clean covariance and the noise covariance
/// are both doubled, and `epsilon` records the realized outlier fraction,
/// which never exceeds twice the input fraction.
pub fn pairwise_difference(dataset: &CorruptedDataset) -> Result<CorruptedDataset> {
    let n = dataset.n();
    if n % 2 != 0 {
        return Err(Error::OddSampleCount(n));
    }
    let half = n / 2;
    if half == 0 {
        return Err(Error::EmptyInput("no pairs to difference".into()));
    }
    let x = difference_pairs(&dataset.x);
    let mask: Vec<bool> = dataset.inlier_mask.chunks(2).map(|pair| pair[0] && pair[1]).collect();
    let outliers = mask.iter().filter(|&&m| !m).count();
    Ok(CorruptedDataset {
        x,
        epsilon: outliers as f64 / half as f64,
        inlier_mask: mask,
        clean_model: dataset.clean_model.scaled(2.0)?,
        noise_model: dataset.noise_model.scaled(2.0),
        adversary: dataset.adversary.clone(),
        seed: dataset.seed,
    })
}

/// `x_{2i} − x_{2i+1}` for every pair of columns; a trailing odd column is dropped.
pub fn difference_pairs(x: &DMatrix<f64>) -> DMatrix<f64> {
    let half = x.ncols() / 2;
    DMatrix::from_fn(x.nrows(), half, |r, c| x[(r, 2 * c)] - x[(r, 2 * c + 1)])
}

/// Empirical small-ball statistics of normalized samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallReport {
    /// Minimum over probed unit directions `v` of the fraction of columns with
    /// `|vᵀw_i| ≥ t0/2`.
    pub min_fraction: f64,
    /// Smallest eigenvalue of `(1/n)·WWᵀ`.
    pub min_eigenvalue: f64,
}

pub fn small_ball_diagnostic(w: &DMatrix<f64>, t0: f64, trials: usize, seed: u64) -> Result<SmallBallReport> {
    let (r, n) = w.shape();
    if n == 0 || r == 0 {
        return Err(Error::EmptyInput("small-ball diagnostic needs samples".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig(
            "small-ball diagnostic needs at least one direction".into(),
        ));
    }
    let mut rng = rng::stream(seed, streams::DIAGNOSTIC);
    let cutoff = t0 / 2.0;
    let mut min_fraction = f64::INFINITY;
    for _ in 0..trials {
        let v = loop {
            let g = DVector::from_iterator(r, (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let norm = g.norm();
            if norm > 0.0 {
                break g / norm;
            }
        };
        let projections = w.tr_mul(&v);
        let hits = projections.iter().filter(|p| p.abs() >= cutoff).count();
        min_fraction = min_fraction.min(hits as f64 / n as f64);
    }
    let cov = (w * w.transpose()) / n as f64;
    let min_eigenvalue = cov
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    Ok(SmallBallReport {
        min_fraction,
        min_eigenvalue,
    })
}
