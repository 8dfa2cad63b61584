use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, ClassicRansacConfig};
use crate::datagen::{self, CleanModel, CorruptedDataset, DatasetSpec, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::pipeline::{self, millis, RansacPlusConfig};
use crate::rng::{self, streams};

use super::spec::{Cell, ExperimentSpec, Method};

/// CSV header, in column order.
pub const COLUMNS: [&str; 22] = [
    "preset",
    "trial_index",
    "seed",
    "method",
    "d",
    "n",
    "r_star",
    "epsilon",
    "sigma2",
    "r_hat",
    "r_tilde",
    "subspace_error",
    "medres_final",
    "gap_found",
    "capped",
    "runtime_ms_stage1",
    "runtime_ms_stage2",
    "runtime_ms_total",
    "cell_index",
    "consensus_count",
    "medres_trace",
    "error",
];

/// One method on one dataset. Fields that do not apply are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub preset: String,
    pub trial_index: usize,
    pub seed: u64,
    pub method: String,
    pub d: usize,
    pub n: usize,
    pub r_star: usize,
    pub epsilon: f64,
    pub sigma2: f64,
    pub r_hat: Option<usize>,
    /// Dimension of the returned subspace.
    pub r_tilde: Option<usize>,
    pub subspace_error: Option<f64>,
    pub medres_final: Option<f64>,
    pub gap_found: Option<bool>,
    pub capped: Option<bool>,
    pub runtime_ms_stage1: Option<f64>,
    pub runtime_ms_stage2: Option<f64>,
    pub runtime_ms_total: Option<f64>,
    pub cell_index: usize,
    pub consensus_count: Option<usize>,
    /// `B:MedRes` pairs of the coarse stage, `;`-separated.
    pub medres_trace: Option<String>,
    /// Set when the method failed on this dataset.
    pub error: Option<String>,
}

/// `mix64(mix64(master, cell), trial)`
pub fn trial_seed(master_seed: u64, cell_index: usize, trial_index: usize) -> u64 {
    rng::mix64_path(master_seed, &[cell_index as u64, trial_index as u64])
}

pub fn trial_dataset(spec: &ExperimentSpec, cell: &Cell, seed: u64) -> Result<CorruptedDataset> {
    let model = CleanModel::isotropic(spec.d, cell.r_star, spec.gamma, seed)?;
    let dataset = DatasetSpec {
        model,
        n: spec.n,
        noise: NoiseModel::isotropic(cell.sigma2, spec.d)?,
        epsilon: cell.epsilon,
        adversary: spec.adversary.clone(),
    };
    datagen::generate(&dataset, seed)
}

fn blank(spec: &ExperimentSpec, cell: &Cell, trial: usize, seed: u64, method: Method) -> ExperimentRecord {
    ExperimentRecord {
        preset: spec.preset.name().to_string(),
        trial_index: trial,
        seed,
        method: method.name().to_string(),
        d: spec.d,
        n: spec.n,
        r_star: cell.r_star,
        epsilon: cell.epsilon,
        sigma2: cell.sigma2,
        r_hat: None,
        r_tilde: None,
        subspace_error: None,
        medres_final: None,
        gap_found: None,
        capped: None,
        runtime_ms_stage1: None,
        runtime_ms_stage2: None,
        runtime_ms_total: None,
        cell_index: cell.index,
        consensus_count: None,
        medres_trace: None,
        error: None,
    }
}

fn run_method(
    spec: &ExperimentSpec,
    dataset: &CorruptedDataset,
    method: Method,
    record: &mut ExperimentRecord,
) -> Result<()> {
    let truth = dataset.clean_model.basis();
    let noise = dataset.noise_model.level();
    let seed = record.seed;
    let timed = spec.timings;
    match method {
        Method::RansacPlus => {
            let mut config = RansacPlusConfig {
                stage1: spec.stage1.clone(),
                stage2: spec.stage2.clone(),
                center: spec.center,
            };
            config.stage2.epsilon = spec.assumed_epsilon.unwrap_or(record.epsilon);
            let out = pipeline::ransac_plus(&dataset.x, &noise, &config, seed)?;
            record.r_hat = Some(out.r_hat);
            record.r_tilde = Some(out.r_tilde);
            record.subspace_error = Some(linalg::subspace_distance(&out.basis, truth)?);
            record.medres_final = out.stage1.final_med_res();
            record.gap_found = Some(out.stage2.gap_found);
            record.capped = Some(out.stage2.capped);
            if timed {
                record.runtime_ms_stage1 = Some(millis(out.timings.stage1));
                record.runtime_ms_stage2 = Some(millis(out.timings.stage2));
                record.runtime_ms_total = Some(millis(out.timings.total));
            }
            record.medres_trace = Some(out.stage1.trace_string());
        }
        Method::ClassicRansac => {
            let r = record.r_star as i64 + spec.baseline.r_offset;
            if r < 1 {
                return Err(Error::InvalidConfig(format!("classic RANSAC search dimension {r} < 1")));
            }
            let mut config =
                ClassicRansacConfig::for_data(r as usize, &dataset.x, &noise, rng::mix64(seed, streams::CLASSIC))?;
            config.max_iters = spec.baseline.max_iters;
            config.consensus_fraction = spec.baseline.consensus_fraction;
            if let Some(t) = spec.baseline.dist_threshold {
                config.dist_threshold = t;
            }
            let start = std::time::Instant::now();
            let out = baselines::classic_ransac(&dataset.x, &config)?;
            let elapsed = start.elapsed();
            record.r_tilde = Some(out.basis.dim());
            record.subspace_error = Some(linalg::subspace_distance(&out.basis, truth)?);
            record.consensus_count = Some(out.consensus_count);
            if timed {
                record.runtime_ms_total = Some(millis(elapsed));
            }
        }
        Method::OraclePca => {
            let start = std::time::Instant::now();
            let basis = baselines::oracle_pca(&dataset.x, &dataset.inlier_mask, record.r_star)?;
            let elapsed = start.elapsed();
            record.r_tilde = Some(basis.dim());
            record.subspace_error = Some(linalg::subspace_distance(&basis, truth)?);
            if timed {
                record.runtime_ms_total = Some(millis(elapsed));
            }
        }
    }
    Ok(())
}

/// Every method on one `(cell, trial)` dataset.
///
/// Method failures are recorded in the `error` column; only a dataset that
/// cannot be generated is an error here.
pub fn run_trial(spec: &ExperimentSpec, cell: &Cell, trial: usize) -> Result<Vec<ExperimentRecord>> {
    let seed = trial_seed(spec.master_seed, cell.index, trial);
    let dataset = trial_dataset(spec, cell, seed)?;
    Ok(spec
        .methods
        .iter()
        .map(|&method| {
            let mut record = blank(spec, cell, trial, seed, method);
            if let Err(e) = run_method(spec, &dataset, method, &mut record) {
                record = blank(spec, cell, trial, seed, method);
                record.error = Some(e.to_string());
            }
            record
        })
        .collect())
}

pub fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

/// Runs the grid on `threads` workers, streaming records to `sink` in
/// `(cell, trial, method)` order. The bytes written do not depend on
/// `threads`.
pub fn run_experiment_to<W: Write>(spec: &ExperimentSpec, threads: usize, sink: W) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let tasks: Vec<(Cell, usize)> = spec
        .cells()
        .into_iter()
        .flat_map(|cell| (0..spec.trials).map(move |t| (cell, t)))
        .collect();

    let mut writer = csv_writer(sink);
    writer.write_record(COLUMNS)?;
    writer.flush().map_err(|e| Error::io("<output>", e))?;

    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    let mut records = Vec::with_capacity(spec.record_count());
    let mut failure = None;
    std::thread::scope(|scope| {
        let tasks = &tasks;
        let abort = &abort;
        let pool = &pool;
        scope.spawn(move || {
            pool.install(|| {
                tasks
                    .par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (i, (cell, trial))| {
                        if abort.load(Ordering::Relaxed) {
                            return;
                        }
                        let _ = tx.send((i, run_trial(spec, cell, *trial)));
                    });
            });
        });

        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, result) in rx {
            if failure.is_some() {
                continue;
            }
            pending.insert(i, result);
            while let Some(result) = pending.remove(&next) {
                next += 1;
                let written = result.and_then(|batch| {
                    for record in batch {
                        writer.serialize(&record)?;
                        writer.flush().map_err(|e| Error::io("<output>", e))?;
                        records.push(record);
                    }
                    Ok(())
                });
                if let Err(e) = written {
                    abort.store(true, Ordering::Relaxed);
                    failure = Some(e);
                    break;
                }
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(records),
    }
}

/// Runs the grid, writing the CSV to `spec.output_path` when one is set.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ExperimentRecord>> {
    match &spec.output_path {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            run_experiment_to(spec, threads, BufWriter::new(file))
        }
        None => run_experiment_to(spec, threads, std::io::sink()),
    }
}
