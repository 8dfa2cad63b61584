use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::run::{ExperimentRecord, COLUMNS};

/// Aggregates of one `(preset, method, grid cell)` group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub preset: String,
    pub method: String,
    pub d: usize,
    pub n: usize,
    pub r_star: usize,
    pub epsilon: f64,
    pub sigma2: f64,
    pub rows: usize,
    pub failures: usize,
    pub capped: usize,
    pub mean_subspace_error: Option<f64>,
    pub std_subspace_error: Option<f64>,
    pub mean_rhat_ratio: Option<f64>,
    pub std_rhat_ratio: Option<f64>,
    pub mean_runtime_ms_stage1: Option<f64>,
    pub mean_runtime_ms_stage2: Option<f64>,
    pub mean_runtime_ms_total: Option<f64>,
    pub std_runtime_ms_total: Option<f64>,
}

/// Sample mean and standard deviation (divisor `k − 1`, zero for one value).
///
/// Sums are taken relative to the first value, so a constant column gives
/// exactly that value and a zero deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let &origin = values.first()?;
    let k = values.len() as f64;
    let shift = values.iter().map(|v| v - origin).sum::<f64>() / k;
    let mean = origin + shift;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - origin - shift).powi(2)).sum::<f64>() / (k - 1.0);
    Some((mean, var.sqrt()))
}

fn mean(values: &[f64]) -> Option<f64> {
    mean_std(values).map(|(m, _)| m)
}

pub fn read_records<R: Read>(source: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = reader.headers()?.clone();
    let missing: Vec<&str> = COLUMNS
        .iter()
        .copied()
        .filter(|c| !header.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Schema(format!("row {}: {e}", i + 1))))
        .collect()
}

/// Groups in order of first appearance, so the output follows the input.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let key = |r: &ExperimentRecord| {
        (
            r.preset.clone(),
            r.method.clone(),
            r.d,
            r.n,
            r.r_star,
            r.epsilon.to_bits(),
            r.sigma2.to_bits(),
        )
    };
    let mut groups: Vec<(_, Vec<&ExperimentRecord>)> = Vec::new();
    for r in records {
        let k = key(r);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, members)) => members.push(r),
            None => groups.push((k, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let first = members[0];
            let collect = |f: &dyn Fn(&ExperimentRecord) -> Option<f64>| -> Vec<f64> {
                members.iter().filter_map(|r| f(r)).collect()
            };
            let errors = collect(&|r| r.subspace_error);
            let ratios = collect(&|r| r.r_hat.map(|h| h as f64 / r.r_star as f64));
            let total = collect(&|r| r.runtime_ms_total);
            let err_stats = mean_std(&errors);
            let ratio_stats = mean_std(&ratios);
            let total_stats = mean_std(&total);
            SummaryRow {
                preset: first.preset.clone(),
                method: first.method.clone(),
                d: first.d,
                n: first.n,
                r_star: first.r_star,
                epsilon: first.epsilon,
                sigma2: first.sigma2,
                rows: members.len(),
                failures: members.iter().filter(|r| r.error.is_some()).count(),
                capped: members.iter().filter(|r| r.capped == Some(true)).count(),
                mean_subspace_error: err_stats.map(|s| s.0),
                std_subspace_error: err_stats.map(|s| s.1),
                mean_rhat_ratio: ratio_stats.map(|s| s.0),
                std_rhat_ratio: ratio_stats.map(|s| s.1),
                mean_runtime_ms_stage1: mean(&collect(&|r| r.runtime_ms_stage1)),
                mean_runtime_ms_stage2: mean(&collect(&|r| r.runtime_ms_stage2)),
                mean_runtime_ms_total: total_stats.map(|s| s.0),
                std_runtime_ms_total: total_stats.map(|s| s.1),
            }
        })
        .collect()
}

/// `runs.csv` → `runs.summary.csv`
pub fn summary_path(csv_path: &Path) -> PathBuf {
    let s = csv_path.to_string_lossy();
    match s.strip_suffix(".csv") {
        Some(stem) => PathBuf::from(format!("{stem}.summary.csv")),
        None => PathBuf::from(format!("{s}.summary.csv")),
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| Error::io("<summary>", e))?;
    Ok(())
}

/// Reads a run CSV and writes its per-cell summary next to it.
pub fn report_summary(csv_path: &Path) -> Result<(PathBuf, Vec<SummaryRow>)> {
    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let records = read_records(BufReader::new(file))?;
    let rows = summarize(&records);
    let out = summary_path(csv_path);
    let file = File::create(&out).map_err(|e| Error::io(&out, e))?;
    let mut sink = BufWriter::new(file);
    write_summary(&rows, &mut sink)?;
    sink.flush().map_err(|e| Error::io(&out, e))?;
    Ok((out, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: &str, eps: f64, err: Option<f64>, r_hat: Option<usize>) -> ExperimentRecord {
        ExperimentRecord {
            preset: "custom".into(),
            trial_index: 0,
            seed: 1,
            method: method.into(),
            d: 10,
            n: 50,
            r_star: 2,
            epsilon: eps,
            sigma2: 0.0,
            r_hat,
            r_tilde: None,
            subspace_error: err,
            medres_final: None,
            gap_found: None,
            capped: Some(false),
            runtime_ms_stage1: None,
            runtime_ms_stage2: None,
            runtime_ms_total: Some(1.5),
            cell_index: 0,
            consensus_count: None,
            medres_trace: None,
            error: None,
        }
    }

    #[test]
    fn single_row_has_zero_std() {
        let rows = summarize(&[record("ransac_plus", 0.1, Some(0.25), Some(3))]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_subspace_error, Some(0.25));
        assert_eq!(rows[0].std_subspace_error, Some(0.0));
        assert_eq!(rows[0].mean_rhat_ratio, Some(1.5));
    }

    #[test]
    fn identical_rows_have_zero_std() {
        let recs = vec![record("ransac_plus", 0.1, Some(0.3), Some(4)); 20];
        let rows = summarize(&recs);
        assert_eq!(rows[0].rows, 20);
        assert_eq!(rows[0].std_subspace_error, Some(0.0));
    }

    #[test]
    fn groups_by_method_and_cell() {
        let recs = vec![
            record("ransac_plus", 0.1, Some(1.0), None),
            record("classic_ransac", 0.1, Some(0.5), None),
            record("ransac_plus", 0.1, Some(3.0), None),
            record("ransac_plus", 0.2, None, None),
        ];
        let rows = summarize(&recs);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].method, "ransac_plus");
        assert_eq!(rows[0].mean_subspace_error, Some(2.0));
        assert!((rows[0].std_subspace_error.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[2].mean_subspace_error, None);
        assert_eq!(rows[2].mean_rhat_ratio, None);
    }

    #[test]
    fn schema_errors() {
        let err = read_records("preset,method\ncustom,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(m) if m.contains("trial_index")));
        let mut text = COLUMNS.join(",");
        text.push('\n');
        text.push_str(&vec!["x"; COLUMNS.len()].join(","));
        assert!(matches!(read_records(text.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn summary_suffix() {
        assert_eq!(
            summary_path(Path::new("out/runs.csv")),
            PathBuf::from("out/runs.summary.csv")
        );
        assert_eq!(summary_path(Path::new("runs")), PathBuf::from("runs.summary.csv"));
    }
}
