#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rsr_core::baselines::{classic_ransac, ClassicRansacConfig};
use rsr_core::datagen::{self, AdversaryStrategy, CleanModel, DatasetSpec, NoiseModel};
use rsr_core::harness::{self, ExperimentSpec, Method, Preset};
use rsr_core::linalg::{self, SpectrumTable, SubspaceBasis};

pub type Check = Result<(), TestCaseError>;

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn random_basis(rng: &mut ChaCha8Rng, d: usize, r: usize) -> SubspaceBasis {
    linalg::orthonormal_basis(&gaussian(rng, d, r, 1.0), 1e-10).expect("gaussian columns are independent")
}

/// `(d, r)` with `1 <= r <= d`.
pub fn dims(max_d: usize) -> impl Strategy<Value = (usize, usize)> {
    (2..=max_d).prop_flat_map(|d| (Just(d), 1..=d))
}

/// `‖x‖² = ‖Vᵀx‖² + ‖x − VVᵀx‖²`
pub fn pythagorean(d: usize, r: usize, scale_exp: i32, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = random_basis(&mut rng, d, r);
    let x = DVector::from_column_slice(gaussian(&mut rng, d, 1, 10f64.powi(scale_exp)).as_slice());
    let along = basis.columns().tr_mul(&x).norm_squared();
    let residual = linalg::projection_residual(&x, &basis).unwrap();
    let total = x.norm_squared();
    prop_assert!(
        (along + residual * residual - total).abs() <= 1e-12 * total.max(f64::MIN_POSITIVE),
        "{along} + {residual}^2 != {total}"
    );
    let batch = linalg::residual_norms(&DMatrix::from_column_slice(d, 1, x.as_slice()), &basis).unwrap();
    prop_assert!((batch[0] - residual).abs() <= 1e-12 * total.sqrt().max(f64::MIN_POSITIVE));
    Ok(())
}

fn projector_oracle(a: &SubspaceBasis, b: &SubspaceBasis) -> f64 {
    (a.projector() - b.projector())
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Symmetry, range, identity and agreement with the eigenvalues of `P_A − P_B`.
pub fn subspace_distance_oracle(d: usize, ra: usize, rb: usize, tilt: f64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_basis(&mut rng, d, ra);
    // Mix `b` toward `a` so that small angles get exercised too.
    let mut raw = gaussian(&mut rng, d, rb, 1.0);
    let shared = ra.min(rb);
    for j in 0..shared {
        let pulled = a.columns().column(j) * (1.0 - tilt) + raw.column(j) * tilt;
        raw.set_column(j, &pulled);
    }
    let b = linalg::orthonormal_basis(&raw, 1e-12).unwrap();
    prop_assume!(b.dim() == rb);
    let ab = linalg::subspace_distance(&a, &b).unwrap();
    let ba = linalg::subspace_distance(&b, &a).unwrap();
    prop_assert!((0.0..=1.0).contains(&ab), "distance {ab} out of range");
    prop_assert!((ab - ba).abs() <= 1e-12, "asymmetric: {ab} vs {ba}");
    prop_assert!(linalg::subspace_distance(&a, &a).unwrap() <= 1e-7);
    let oracle = projector_oracle(&a, &b);
    prop_assert!(
        (ab - oracle).abs() <= 1e-8,
        "distance {ab} but projector oracle {oracle}"
    );
    if ra != rb {
        prop_assert!((ab - 1.0).abs() <= 1e-12);
    }
    Ok(())
}

pub fn median_matches_sort(values: &[f64]) -> Check {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let expected = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0
    };
    prop_assert_eq!(linalg::median(values).unwrap(), expected);
    Ok(())
}

/// Batch spectra load into a table, stay sorted, and bound `min_squared`.
pub fn spectrum_rows_monotone(d: usize, b: usize, batches: usize, rank: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::new();
    for _ in 0..batches {
        let factor = gaussian(&mut rng, d, rank.min(d), 1.0);
        let batch = &factor * gaussian(&mut rng, rank.min(d), b, 1.0);
        let values = linalg::batch_singular_values(&batch, true).unwrap();
        prop_assert_eq!(values.len(), d);
        flat.extend(values);
    }
    let table = SpectrumTable::from_flat(d, flat, true).unwrap();
    prop_assert_eq!(table.len(), batches);
    let gamma = table.min_squared();
    prop_assert!(gamma.windows(2).all(|w| w[0] >= w[1]));
    for row in table.rows() {
        prop_assert!(row.windows(2).all(|w| w[0] >= w[1]) && row.iter().all(|&v| v >= 0.0));
        for (g, s) in gamma.iter().zip(row) {
            prop_assert!(*g <= s * s);
        }
        prop_assert!(row[rank.min(b).min(d)..].iter().all(|&v| v <= 1e-10 * row[0].max(1.0)));
    }
    Ok(())
}

/// The generator replaces exactly `⌊εn⌋` columns, with `ε = k/1000`.
pub fn mask_count(n: usize, permille: usize, seed: u64) -> Check {
    let epsilon = permille as f64 / 1000.0;
    let spec = DatasetSpec {
        model: CleanModel::isotropic(6, 2, 1.0, seed).unwrap(),
        n,
        noise: NoiseModel::Zero,
        epsilon,
        adversary: AdversaryStrategy::orthogonal_rank2(),
    };
    let ds = datagen::generate(&spec, seed).unwrap();
    let expected = permille * n / 1000;
    prop_assert_eq!(ds.outlier_count(), expected);
    prop_assert_eq!(datagen::outlier_count(epsilon, n), expected);
    Ok(())
}

/// The reported consensus equals a recount against the returned basis.
pub fn consensus_recount(n: usize, r: usize, outliers: usize, seed: u64) -> Check {
    let d = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = random_basis(&mut rng, d, r);
    let mut x = basis.columns() * gaussian(&mut rng, r, n, 1.0);
    for j in 0..outliers.min(n) {
        x.set_column(j, &gaussian(&mut rng, d, 1, 1.0).column(0));
    }
    let mut config = ClassicRansacConfig::for_data(r, &x, &datagen::NoiseLevel::ZERO, seed).unwrap();
    config.max_iters = 20;
    let out = classic_ransac(&x, &config).unwrap();
    let recount = linalg::residual_norms(&x, &out.basis)
        .unwrap()
        .into_iter()
        .filter(|&v| v <= config.dist_threshold)
        .count();
    prop_assert_eq!(out.consensus_count, recount);
    prop_assert!(out.iterations <= config.max_iters);
    Ok(())
}

/// A small mixed grid whose CSV is compared across worker counts.
pub fn determinism_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(Preset::Fig2DimMisspec);
    spec.d = 20;
    spec.n = 80;
    spec.r_stars = vec![2, 3];
    spec.epsilons = vec![0.0, 0.2];
    spec.sigma2s = vec![0.0, 1e-3];
    spec.trials = 3;
    spec.master_seed = 77;
    spec.methods = vec![Method::RansacPlus, Method::ClassicRansac, Method::OraclePca];
    spec.timings = false;
    spec.stage2.t_cap = 2_000;
    spec.baseline.max_iters = 200;
    spec
}

pub fn sweep_bytes(spec: &ExperimentSpec, threads: usize) -> Vec<u8> {
    let mut out = Vec::new();
    harness::run_experiment_to(spec, threads, &mut out).unwrap();
    out
}
