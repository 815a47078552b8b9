//! CSV report schemas and plot-series extraction.
//!
//! Floats are written in shortest round-trip decimal form, so reading a
//! report back reproduces the values exactly. Undefined quantities (an
//! empirical pFDR with no rejections) are empty fields.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DSD_TRIALS: &str = "dsd_trials.csv";
pub const DSD_AGGREGATE: &str = "dsd_aggregate.csv";
pub const ASD_RUNS: &str = "asd_runs.csv";
pub const ASD_AGGREGATE: &str = "asd_aggregate.csv";
pub const ASD_LOCATIONS: &str = "asd_locations.csv";
pub const ROC_TRIALS: &str = "roc_trials.csv";
pub const ROC_CURVES: &str = "roc_curves.csv";
pub const ROC_SUMMARY: &str = "roc_summary.csv";
pub const BOUNDS: &str = "bounds.csv";

pub const PLOT_DSD: &str = "plot_dsd_pfdr.csv";
pub const PLOT_PSEUDO_ROC: &str = "plot_pseudo_roc.csv";
pub const PLOT_ROC: &str = "plot_roc.csv";
pub const PLOT_ASD_DELTA: &str = "plot_asd_delta.csv";

/// One empirical pFDR value; `target_j` is a target index or `worst`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsdTrialRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub trial: usize,
    pub target_j: String,
    pub empirical_pfdr: Option<f64>,
    pub bound_value: f64,
    pub conditions_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsdAggregateRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub target_j: String,
    /// Trials in which the pFDR was defined.
    pub trials_defined: usize,
    pub pfdr_mean: Option<f64>,
    pub pfdr_stderr: Option<f64>,
    pub bound_mean: f64,
    pub conditions_ok_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsdRunRow {
    pub method: String,
    pub alpha_mode: String,
    pub delta: f64,
    pub fdr: f64,
    pub fnr: f64,
    pub pd: f64,
    pub pf: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub seed: u64,
    pub trial: usize,
    pub rejections: usize,
    /// `max_i |alpha_i / alpha_hat_i - 1|` over locations with a positive
    /// estimate; empty for known strengths.
    pub alpha_rel_error_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsdAggregateRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub trials: usize,
    pub fdr_mean: f64,
    pub fdr_stderr: f64,
    pub fnr_mean: f64,
    pub fnr_stderr: f64,
    pub pd_mean: f64,
    pub pf_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsdLocationRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub i: usize,
    pub d_i: f64,
    pub pvalue_bound: f64,
    pub rejected: bool,
    #[serde(rename = "GT")]
    pub gt: u8,
}

/// Rates at one threshold of one trial. `threshold` is the rejected
/// fraction for quantile grids and the statistic cutoff for value grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocTrialRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub trial: usize,
    pub point: usize,
    pub threshold: f64,
    pub fdr: f64,
    pub fnr: f64,
    pub pd: f64,
    pub pf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurveRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub point: usize,
    pub threshold: f64,
    pub fdr_mean: f64,
    pub fnr_mean: f64,
    pub pd_mean: f64,
    pub pf_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummaryRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub pseudo_roc_area: f64,
    pub roc_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub alpha_min: f64,
    pub d_min: f64,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: f64,
    pub lambda_max: f64,
    pub achievable_bound: f64,
    pub positive_prob: bool,
    pub weak_background: bool,
    pub k_bound: bool,
    pub pe_bound: f64,
    pub pfdr_bound_from_pe: f64,
    /// Empty when no measurement count satisfies the condition.
    pub min_measurements: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsdSeriesRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub worst_case_pfdr_mean: Option<f64>,
    pub stderr: Option<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRocRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub threshold: f64,
    pub fdr: f64,
    pub one_minus_fnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSeriesRow {
    pub method: String,
    pub alpha_mode: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub threshold: f64,
    pub pf: f64,
    pub pd: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV report, first checking that every `required` column exists.
pub fn read_rows<T: DeserializeOwned>(path: &Path, required: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    for col in required {
        if !headers.iter().any(|h| h == *col) {
            return Err(Error::Schema(format!("{} lacks column `{col}`", path.display())));
        }
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Schema(format!("{}: {e}", path.display()))))
        .collect()
}

/// Mean and standard error of the mean; the error is 0 for one sample.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Area under the pseudo-ROC envelope: the best `1 - FNR` reachable at FDR
/// no larger than `x`, integrated over `x` in `[0, 1]` as a step function.
pub fn pseudo_roc_area(points: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut area = 0.0;
    let mut best = 0.0f64;
    let mut x_prev = 0.0;
    for (x, y) in pts {
        let x = x.clamp(0.0, 1.0);
        area += best * (x - x_prev);
        best = best.max(y);
        x_prev = x;
    }
    area + best * (1.0 - x_prev)
}

/// Trapezoidal area under `(pf, pd)` points, closed with `(0, 0)` and
/// `(1, 1)`.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Writes plot series for every report present in `dir` into `out`, returning
/// the files written.
pub fn emit_plot_data(dir: &Path, out: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();

    let dsd = dir.join(DSD_AGGREGATE);
    if dsd.exists() {
        let rows: Vec<DsdAggregateRow> =
            read_rows(&dsd, &["method", "alpha_mode", "K", "target_j", "pfdr_mean", "pfdr_stderr", "bound_mean"])?;
        let mut series: Vec<DsdSeriesRow> = rows
            .into_iter()
            .filter(|r| r.target_j == "worst")
            .map(|r| DsdSeriesRow {
                method: r.method,
                alpha_mode: r.alpha_mode,
                k: r.k,
                worst_case_pfdr_mean: r.pfdr_mean,
                stderr: r.pfdr_stderr,
                bound: r.bound_mean,
            })
            .collect();
        series.sort_by(|a, b| (&a.method, &a.alpha_mode, a.k).cmp(&(&b.method, &b.alpha_mode, b.k)));
        write_rows(&out.join(PLOT_DSD), &series)?;
        written.push(PLOT_DSD.to_string());
    }

    let roc = dir.join(ROC_CURVES);
    if roc.exists() {
        let mut rows: Vec<RocCurveRow> = read_rows(
            &roc,
            &["method", "alpha_mode", "K", "threshold", "fdr_mean", "fnr_mean", "pd_mean", "pf_mean"],
        )?;
        rows.sort_by(|a, b| {
            (&a.method, &a.alpha_mode, a.k)
                .cmp(&(&b.method, &b.alpha_mode, b.k))
                .then(a.threshold.total_cmp(&b.threshold))
        });
        let pseudo: Vec<PseudoRocRow> = rows
            .iter()
            .map(|r| PseudoRocRow {
                method: r.method.clone(),
                alpha_mode: r.alpha_mode.clone(),
                k: r.k,
                threshold: r.threshold,
                fdr: r.fdr_mean,
                one_minus_fnr: 1.0 - r.fnr_mean,
            })
            .collect();
        let conventional: Vec<RocSeriesRow> = rows
            .iter()
            .map(|r| RocSeriesRow {
                method: r.method.clone(),
                alpha_mode: r.alpha_mode.clone(),
                k: r.k,
                threshold: r.threshold,
                pf: r.pf_mean,
                pd: r.pd_mean,
            })
            .collect();
        write_rows(&out.join(PLOT_PSEUDO_ROC), &pseudo)?;
        write_rows(&out.join(PLOT_ROC), &conventional)?;
        written.push(PLOT_PSEUDO_ROC.to_string());
        written.push(PLOT_ROC.to_string());
    }

    let asd = dir.join(ASD_AGGREGATE);
    if asd.exists() {
        let rows: Vec<AsdAggregateRow> =
            read_rows(&asd, &["method", "alpha_mode", "K", "delta", "fdr_mean", "fnr_mean"])?;
        let mut grouped: BTreeMap<(String, String, usize), Vec<PseudoRocRow>> = BTreeMap::new();
        for r in rows {
            grouped
                .entry((r.method.clone(), r.alpha_mode.clone(), r.k))
                .or_default()
                .push(PseudoRocRow {
                    method: r.method,
                    alpha_mode: r.alpha_mode,
                    k: r.k,
                    threshold: r.delta,
                    fdr: r.fdr_mean,
                    one_minus_fnr: 1.0 - r.fnr_mean,
                });
        }
        let mut series = Vec::new();
        for (_, mut v) in grouped {
            v.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
            series.extend(v);
        }
        write_rows(&out.join(PLOT_ASD_DELTA), &series)?;
        written.push(PLOT_ASD_DELTA.to_string());
    }

    if written.is_empty() {
        return Err(Error::Schema(format!("no reports found in {}", dir.display())));
    }
    Ok(written)
}
