use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rsr_core::container;
use rsr_core::datagen::{self, CleanModel, CorruptedDataset, DatasetSpec, NoiseModel};
use rsr_core::harness::{self, ExperimentSpec, Preset};
use rsr_core::linalg;
use rsr_core::pipeline::{self, millis, Centering, RansacPlusConfig};
use rsr_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rsr", version, about = "Robust subspace recovery experiments")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a corrupted dataset and write it as a container plus JSON sidecar
    Generate {
        #[command(flatten)]
        data: DataArgs,
        /// Read dataset parameters from the [experiment] section of a config
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the two-stage estimator once and print the result as JSON
    Run {
        /// Dataset container to load instead of generating one
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        /// Estimator settings from the [stage1] and [stage2] sections
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Corruption fraction given to the estimator (defaults to the data's)
        #[arg(long)]
        assume_epsilon: Option<f64>,
        /// Difference consecutive sample pairs first
        #[arg(long)]
        pairwise_difference: bool,
        /// Also write the JSON to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid and write one CSV row per (cell, trial, method)
    #[command(after_long_help = harness::config_reference())]
    Sweep {
        /// fig1_eps_sweep, fig2_dim_misspec, fig2_noise_sweep, fig2_runtime, fig4_heatmap or custom
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// CSV destination; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave the runtime columns empty so reruns are byte-identical
        #[arg(long)]
        no_timings: bool,
    },
    /// Aggregate a sweep CSV into <name>.summary.csv
    Report { csv: PathBuf },
}

#[derive(Args, Default)]
struct DataArgs {
    /// Ambient dimension [default: 100]
    #[arg(long)]
    d: Option<usize>,
    /// Sample count [default: 500]
    #[arg(long)]
    n: Option<usize>,
    /// Planted dimension [default: 10]
    #[arg(long)]
    r_star: Option<usize>,
    /// Corruption fraction [default: 0.1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Noise trace; the covariance is (sigma2/d)·I [default: 0]
    #[arg(long)]
    sigma2: Option<f64>,
}

impl DataArgs {
    fn dataset(&self, base: &ExperimentSpec, seed: u64) -> Result<CorruptedDataset> {
        let d = self.d.unwrap_or(base.d);
        let r_star = self.r_star.unwrap_or(base.r_stars[0]);
        let epsilon = self.epsilon.unwrap_or(base.epsilons[0]);
        let sigma2 = self.sigma2.unwrap_or(base.sigma2s[0]);
        let spec = DatasetSpec {
            model: CleanModel::isotropic(d, r_star, base.gamma, seed)?,
            n: self.n.unwrap_or(base.n),
            noise: NoiseModel::isotropic(sigma2, d)?,
            epsilon,
            adversary: base.adversary.clone(),
        };
        datagen::generate(&spec, seed)
    }
}

fn load_spec(config: Option<&Path>) -> Result<ExperimentSpec> {
    match config {
        Some(path) => harness::parse_config(path),
        None => Ok(ExperimentSpec::preset(Preset::Custom)),
    }
}

fn generate(data: &DataArgs, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let base = load_spec(config)?;
    let seed = seed.unwrap_or(base.master_seed);
    let dataset = data.dataset(&base, seed)?;
    container::save_dataset(out, &dataset)?;
    eprintln!(
        "wrote {}x{} dataset ({} outliers) to {}",
        dataset.d(),
        dataset.n(),
        dataset.outlier_count(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    input: Option<&Path>,
    data: &DataArgs,
    config: Option<&Path>,
    seed: Option<u64>,
    assume_epsilon: Option<f64>,
    pairwise: bool,
    out: Option<&Path>,
) -> Result<()> {
    let base = load_spec(config)?;
    let seed = seed.unwrap_or(base.master_seed);
    let dataset = match input {
        Some(path) => container::load_dataset(path)?,
        None => data.dataset(&base, seed)?,
    };
    let mut settings = RansacPlusConfig {
        stage1: base.stage1.clone(),
        stage2: base.stage2.clone(),
        center: if pairwise {
            Centering::PairwiseDifference
        } else {
            base.center
        },
    };
    settings.stage2.epsilon = assume_epsilon.or(base.assumed_epsilon).unwrap_or(dataset.epsilon);
    if settings.stage2.epsilon > rsr_core::stage2::MAX_CONFIG_EPSILON {
        return Err(Error::EpsilonTooLarge(settings.stage2.epsilon));
    }
    let result = pipeline::ransac_plus(&dataset.x, &dataset.noise_model.level(), &settings, seed)?;
    if result.stage2.capped {
        eprintln!(
            "warning: batch count capped at T_cap = {}; the success guarantee no longer holds",
            result.stage2.t_used
        );
    }
    let error = linalg::subspace_distance(&result.basis, dataset.clean_model.basis())?;
    let basis: Vec<Vec<f64>> = result
        .basis
        .columns()
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    let report = json!({
        "seed": seed,
        "d": dataset.d(),
        "n": dataset.n(),
        "r_star": dataset.clean_model.r_star(),
        "epsilon": dataset.epsilon,
        "r_hat": result.r_hat,
        "r_tilde": result.r_tilde,
        "subspace_error": error,
        "stage1": {
            "terminated_by": result.stage1.terminated_by,
            "eta_thresh": result.stage1.eta_thresh,
            "eta_floor": result.stage1.eta_floor,
            "medres_trace": result.stage1.medres_trace,
        },
        "stage2": {
            "batch_size": result.stage2.b_used,
            "batches": result.stage2.t_used,
            "capped": result.stage2.capped,
            "gap_found": result.stage2.gap_found,
            "threshold": result.stage2.threshold,
            "k": result.stage2.k,
            "gamma_hat": result.stage2.gamma_hat,
        },
        "runtime_ms": {
            "stage1": millis(result.timings.stage1),
            "stage2": millis(result.timings.stage2),
            "total": millis(result.timings.total),
        },
        "basis": basis,
    });
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n")).map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    preset: Option<&str>,
    config: Option<&Path>,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<PathBuf>,
    no_timings: bool,
    threads: usize,
) -> Result<()> {
    let mut spec = match (config, preset) {
        (Some(path), _) => harness::parse_config(path)?,
        (None, Some(name)) => ExperimentSpec::preset(name.parse()?),
        (None, None) => ExperimentSpec::preset(Preset::Custom),
    };
    if let (Some(_), Some(name)) = (config, preset) {
        let name: Preset = name.parse()?;
        if name != spec.preset {
            return Err(Error::InvalidConfig(format!(
                "--preset {name} conflicts with preset {} in the config",
                spec.preset
            )));
        }
    }
    if let Some(seed) = seed {
        spec.master_seed = seed;
    }
    if let Some(trials) = trials {
        spec.trials = trials;
    }
    if out.is_some() {
        spec.output_path = out;
    }
    if no_timings {
        spec.timings = false;
    }
    let records = match &spec.output_path {
        Some(_) => harness::run_experiment(&spec, threads)?,
        None => harness::run_experiment_to(&spec, threads, std::io::stdout().lock())?,
    };
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let capped = records.iter().filter(|r| r.capped == Some(true)).count();
    if let Some(path) = &spec.output_path {
        eprintln!("wrote {} records to {}", records.len(), path.display());
    }
    if failed > 0 {
        eprintln!("{failed} method runs failed; see the error column");
    }
    if capped > 0 {
        eprintln!("warning: {capped} runs hit T_cap");
    }
    Ok(())
}

fn report(csv: &Path) -> Result<()> {
    let (path, rows) = harness::report_summary(csv)?;
    let mut stdout = std::io::stdout().lock();
    harness::write_summary(&rows, &mut stdout)?;
    stdout.flush().map_err(|e| io_error(Path::new("<stdout>"), e))?;
    eprintln!("wrote {} summary rows to {}", rows.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if cli.threads.is_some() {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    let outcome = match &cli.command {
        Command::Generate {
            data,
            config,
            seed,
            out,
        } => generate(data, config.as_deref(), *seed, out),
        Command::Run {
            input,
            data,
            config,
            seed,
            assume_epsilon,
            pairwise_difference,
            out,
        } => run(
            input.as_deref(),
            data,
            config.as_deref(),
            *seed,
            *assume_epsilon,
            *pairwise_difference,
            out.as_deref(),
        ),
        Command::Sweep {
            preset,
            config,
            seed,
            trials,
            out,
            no_timings,
        } => sweep(
            preset.as_deref(),
            config.as_deref(),
            *seed,
            *trials,
            out.clone(),
            *no_timings,
            threads,
        ),
        Command::Report { csv } => report(csv),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
