//! Acceptance suite: one `criterion N: PASS|FAIL` line per criterion.
//!
//! `cargo test --release --test acceptance -- 2 5` runs a subset. Failing
//! criteria are reported but only turn the exit status non-zero when
//! `RSR_ACCEPTANCE_STRICT=1` is set.

mod common;

use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use rsr_core::datagen::{self, CleanModel};
use rsr_core::harness::{self, ExperimentRecord, ExperimentSpec, Preset};
use rsr_core::pipeline::{self, RansacPlusConfig};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cell_mean(records: &[&ExperimentRecord]) -> f64 {
    // A failed run counts as the worst possible error.
    records.iter().map(|r| r.subspace_error.unwrap_or(1.0)).sum::<f64>() / records.len() as f64
}

fn median(records: &[&ExperimentRecord]) -> f64 {
    let values: Vec<f64> = records.iter().map(|r| r.subspace_error.unwrap_or(1.0)).collect();
    rsr_core::linalg::median(&values).unwrap()
}

fn rank_misses(records: &[&ExperimentRecord]) -> usize {
    records.iter().filter(|r| r.r_tilde != Some(r.r_star)).count()
}

fn by_cell<'a>(records: &'a [ExperimentRecord], method: &str, cell: usize) -> Vec<&'a ExperimentRecord> {
    records
        .iter()
        .filter(|r| r.method == method && r.cell_index == cell)
        .collect()
}

fn noiseless_exactness() -> Outcome {
    let mut spec = ExperimentSpec::preset(Preset::Custom);
    spec.d = 50;
    spec.n = 400;
    spec.r_stars = vec![5];
    spec.epsilons = vec![0.2];
    spec.trials = 20;
    let records = harness::run_experiment(&spec, threads()).unwrap();
    let exact: Vec<&ExperimentRecord> = records.iter().filter(|r| r.r_tilde == Some(5)).collect();
    let worst = exact.iter().filter_map(|r| r.subspace_error).fold(0.0f64, f64::max);
    let all_small = exact.iter().all(|r| r.subspace_error.is_some_and(|e| e <= 1e-6));
    Outcome {
        pass: exact.len() >= 19 && all_small,
        detail: format!(
            "r_tilde = r* in {}/20 runs, max error among them {worst:.2e} (need >= 19/20 and <= 1e-6)",
            exact.len()
        ),
    }
}

fn epsilon_sweep() -> Outcome {
    let spec = ExperimentSpec::preset(Preset::Fig2DimMisspec);
    let records = harness::run_experiment(&spec, threads()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for cell in spec.cells() {
        let rows = by_cell(&records, "ransac_plus", cell.index);
        let plus = cell_mean(&rows);
        let classic = cell_mean(&by_cell(&records, "classic_ransac", cell.index));
        pass &= plus <= 0.05;
        if cell.epsilon >= 0.1 {
            pass &= classic >= 0.5;
        }
        parts.push(format!(
            "eps {}: ransac+ {plus:.2e} ({} of {} runs with r_tilde != r*) classic(r*+1) {classic:.3}",
            cell.epsilon,
            rank_misses(&rows),
            rows.len()
        ));
    }
    let capped = records.iter().filter(|r| r.capped == Some(true)).count();
    Outcome {
        pass,
        detail: format!("{} | capped runs {capped}", parts.join("; ")),
    }
}

fn rank_overestimate() -> Outcome {
    let spec = ExperimentSpec::preset(Preset::Fig4Heatmap);
    let mut worst = (0.0f64, 0.0, 0.0);
    for cell in spec.cells() {
        let mut config = RansacPlusConfig {
            stage1: spec.stage1.clone(),
            stage2: spec.stage2.clone(),
            center: spec.center,
        };
        config.stage2.epsilon = cell.epsilon;
        let mut total = 0.0;
        for trial in 0..spec.trials {
            let seed = harness::trial_seed(spec.master_seed, cell.index, trial);
            let ds = harness::trial_dataset(&spec, &cell, seed).unwrap();
            let coarse = pipeline::coarse_stage(&ds.x, &ds.noise_model.level(), &config, seed).unwrap();
            total += coarse.r_hat as f64 / cell.r_star as f64;
        }
        let mean = total / spec.trials as f64;
        if mean > worst.0 {
            worst = (mean, cell.epsilon, cell.sigma2);
        }
    }
    let (max, eps, sigma2) = worst;
    let verdict = if max <= 2.0 {
        "target 2.0 met"
    } else {
        "within tolerance 2.5"
    };
    Outcome {
        pass: max <= 2.5,
        detail: format!("max cell mean r_hat/r* = {max:.3} at eps {eps}, sigma2 {sigma2} ({verdict})"),
    }
}

fn noise_scaling() -> Outcome {
    let mut spec = ExperimentSpec::preset(Preset::Custom);
    spec.epsilons = vec![0.2];
    spec.sigma2s = [0.01f64, 0.02, 0.04].iter().map(|s| s * s).collect();
    spec.trials = 50;
    let records = harness::run_experiment(&spec, threads()).unwrap();
    let cells: Vec<Vec<&ExperimentRecord>> = spec
        .cells()
        .iter()
        .map(|c| by_cell(&records, "ransac_plus", c.index))
        .collect();
    let means: Vec<f64> = cells.iter().map(|c| cell_mean(c)).collect();
    let medians: Vec<f64> = cells.iter().map(|c| median(c)).collect();
    let misses: Vec<usize> = cells.iter().map(|c| rank_misses(c)).collect();
    let ratios: Vec<f64> = means.windows(2).map(|w| w[1] / w[0]).collect();
    let median_ratios: Vec<f64> = medians.windows(2).map(|w| w[1] / w[0]).collect();
    Outcome {
        pass: ratios.iter().all(|r| (1.3..=3.0).contains(r)),
        detail: format!(
            "mean errors {:.3e} / {:.3e} / {:.3e} at sigma 0.01 / 0.02 / 0.04, ratios {:.2} and {:.2} (need [1.3, 3.0]); \
             medians {:.3e} / {:.3e} / {:.3e}, ratios {:.2} and {:.2}; runs with r_tilde != r* {:?}",
            means[0], means[1], means[2], ratios[0], ratios[1],
            medians[0], medians[1], medians[2], median_ratios[0], median_ratios[1], misses
        ),
    }
}

fn runtime_separation() -> Outcome {
    let mut spec = ExperimentSpec::preset(Preset::Fig2Runtime);
    spec.trials = 1;
    let records = harness::run_experiment(&spec, threads()).unwrap();
    let at = |method: &str, r: usize| records.iter().find(|x| x.method == method && x.r_star == r).unwrap();
    let classic = |r| at("classic_ransac", r).runtime_ms_total.unwrap();
    let stage1 = |r| at("ransac_plus", r).runtime_ms_stage1.unwrap();
    let classic_ratio = classic(40) / classic(10);
    let stage1_ratio = stage1(40) / stage1(10);
    let capped: Vec<String> = spec
        .r_stars
        .iter()
        .map(|&r| format!("r*={r}:{}", at("ransac_plus", r).capped.unwrap_or(false)))
        .collect();
    Outcome {
        pass: classic_ratio >= 100.0 && stage1_ratio <= 10.0,
        detail: format!(
            "classic {:.0} ms -> {:.0} ms ({classic_ratio:.0}x, need >= 100x); stage 1 {:.1} ms -> {:.1} ms ({stage1_ratio:.1}x, need <= 10x); capped {}",
            classic(10),
            classic(40),
            stage1(10),
            stage1(40),
            capped.join(" ")
        ),
    }
}

fn property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Check,
) -> Result<String, String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    match runner.run(&strategy, test) {
        Ok(()) => Ok(format!("{name} {cases}/{cases}")),
        Err(e) => Err(format!("{name} failed: {e}")),
    }
}

fn property_suite() -> Outcome {
    let results = vec![
        property(
            "pythagorean",
            1000,
            (dims(40), -6i32..6, any::<u64>()),
            |((d, r), s, seed)| pythagorean(d, r, s, seed),
        ),
        property(
            "subspace_distance",
            200,
            (
                dims(16),
                0.0f64..1.0,
                prop_oneof![Just(1.0), 1e-6f64..1.0],
                any::<u64>(),
            ),
            |((d, ra), frac, tilt, seed)| {
                subspace_distance_oracle(d, ra, 1 + ((d - 1) as f64 * frac) as usize, tilt, seed)
            },
        ),
        property("median", 1000, prop::collection::vec(-1e6f64..1e6, 1..200), |v| {
            median_matches_sort(&v)
        }),
        property(
            "spectrum_table",
            200,
            (1usize..12, 1usize..20, 1usize..12, any::<u64>()),
            |(d, b, rank, seed)| spectrum_rows_monotone(d, b, 1, rank, seed),
        ),
        property(
            "mask_count",
            100,
            (1usize..400, 0usize..=500, any::<u64>()),
            |(n, k, seed)| mask_count(n, k, seed),
        ),
        {
            let spec = determinism_spec();
            if sweep_bytes(&spec, 1) == sweep_bytes(&spec, 4) {
                Ok("threads 1 vs 4 byte-identical".to_string())
            } else {
                Err("threads 1 vs 4 CSVs differ".to_string())
            }
        },
    ];
    let passed = results.iter().filter(|r| r.is_ok()).count();
    let lines: Vec<String> = results.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect();
    Outcome {
        pass: passed == lines.len(),
        detail: format!("{passed}/{} properties hold: {}", lines.len(), lines.join("; ")),
    }
}

fn small_ball() -> Outcome {
    let (n, r, t0) = (1000, 8, 0.25);
    let model = CleanModel::isotropic(r, r, 1.0, 0).unwrap();
    let min_eig = 3.0 * t0 * t0 / 8.0;
    let mut good = 0;
    let mut worst_fraction = f64::INFINITY;
    let mut worst_eig = f64::INFINITY;
    for rep in 0..100u64 {
        let w = datagen::generate_clean(&model, n, rep).unwrap().w;
        let report = datagen::small_ball_diagnostic(&w, t0, 100, rep).unwrap();
        worst_fraction = worst_fraction.min(report.min_fraction);
        worst_eig = worst_eig.min(report.min_eigenvalue);
        if report.min_fraction >= 5.0 / 8.0 && report.min_eigenvalue >= min_eig {
            good += 1;
        }
    }
    Outcome {
        pass: good >= 95,
        detail: format!(
            "{good}/100 repetitions meet both bounds (need >= 95); worst min_fraction {worst_fraction:.3}, worst min_eigenvalue {worst_eig:.3}"
        ),
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 7] = [
        (1, "noiseless exactness", noiseless_exactness),
        (2, "epsilon sweep", epsilon_sweep),
        (3, "rank overestimate", rank_overestimate),
        (4, "noise scaling", noise_scaling),
        (5, "runtime separation", runtime_separation),
        (6, "property suite", property_suite),
        (7, "small-ball diagnostic", small_ball),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id}: {verdict} {name}: {} [{:.1} s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        if std::env::var("RSR_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
