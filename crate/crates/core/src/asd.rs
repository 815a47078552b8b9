//! Anomalous signal detection.
//!
//! A location is anomalous when its signal lies farther than `tau` from
//! every dictionary target. The statistic `d_i = min_f ||y_i - alpha_i A f||`
//! has a p-value bounded by a noncentral chi-squared tail, and the bounds are
//! thresholded by the Benjamini-Hochberg step-up rule to control the false
//! discovery rate.

use serde::Serialize;

use crate::dsd::ProjectedDictionary;
use crate::error::{invalid, shape, Result};
use crate::model::{Dictionary, ObservationSet, Scene};
use crate::numerics::{noncentral_chisq_sf, Matrix, Vector};
use crate::sensing::SensingPlan;

/// Statistic and p-value bound at one location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalyTest {
    pub location: usize,
    pub statistic: f64,
    pub pvalue_bound: f64,
    pub tau: f64,
    pub zeta: f64,
    pub alpha_used: f64,
}

/// Result of the step-up procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BhOutcome {
    pub delta: f64,
    /// Number of rejections `t`, 0 when nothing is rejected.
    pub threshold_index: usize,
    /// Rejected locations in increasing index order.
    pub rejected: Vec<usize>,
    /// `p_(t)`, or 0 when `t = 0`.
    pub p_threshold: f64,
}

/// `min_f ||y - alpha A f||`.
pub fn anomaly_statistic(y: &Vector, alpha: f64, a: &Matrix, dict: &Dictionary) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    ProjectedDictionary::new(a, dict)?.min_distance(y, alpha)
}

/// Upper bound `1 - F(d^2; K, (1+e)^2 a^2 (zeta + tau)^2)` on the p-value of
/// statistic `d`.
pub fn pvalue_upper_bound(d: f64, k: usize, alpha_hat: f64, tau: f64, epsilon: f64, zeta: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(invalid(format!("statistic must be >= 0, got {d}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(0.0..=1.0).contains(&zeta) {
        return Err(invalid(format!("zeta must lie in [0, 1], got {zeta}")));
    }
    if !(tau >= 0.0 && tau < 2f64.sqrt()) {
        return Err(invalid(format!("tau must lie in [0, sqrt 2), got {tau}")));
    }
    if !(alpha_hat >= 0.0) || !alpha_hat.is_finite() {
        return Err(invalid(format!("alpha must be finite and >= 0, got {alpha_hat}")));
    }
    let k = u32::try_from(k).map_err(|_| invalid("K too large"))?;
    let nc = ((1.0 + epsilon) * alpha_hat * (zeta + tau)).powi(2);
    noncentral_chisq_sf(d * d, k, nc)
}

/// Benjamini-Hochberg step-up: with `p_(1) <= ... <= p_(M)` (stable order),
/// `t` is the largest `i` with `p_(i) <= i delta / M` and the `t` smallest
/// p-values are rejected.
pub fn bh_procedure(pvalues: &[f64], delta: f64) -> Result<BhOutcome> {
    if pvalues.is_empty() {
        return Err(invalid("no p-values given"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(invalid(format!("p-values must lie in [0, 1], got {p}")));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let t = (1..=m)
        .rev()
        .find(|&i| pvalues[order[i - 1]] <= i as f64 * delta / m as f64)
        .unwrap_or(0);
    let mut rejected: Vec<usize> = order[..t].to_vec();
    rejected.sort_unstable();
    Ok(BhOutcome {
        delta,
        threshold_index: t,
        rejected,
        p_threshold: if t == 0 { 0.0 } else { pvalues[order[t - 1]] },
    })
}

/// Whether strengths are known or estimated from the measurements.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaMode {
    Known(Vec<f64>),
    /// Maximum-likelihood strengths, with `zeta` the assumed relative
    /// accuracy of the estimates.
    Estimate { zeta: f64 },
}

/// Per-location tests and the BH decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub tests: Vec<AnomalyTest>,
    pub bh: BhOutcome,
    pub rejected_mask: Vec<bool>,
}

/// Per-location statistics and p-value bounds, without the BH step.
pub fn anomaly_tests(
    obs: &ObservationSet,
    plan: &SensingPlan,
    dict: &Dictionary,
    tau: f64,
    epsilon: f64,
    alpha_mode: &AlphaMode,
) -> Result<Vec<AnomalyTest>> {
    let projected = ProjectedDictionary::new(plan.a(), dict)?;
    let k = plan.k();
    let (alphas, zeta): (Vec<f64>, f64) = match alpha_mode {
        AlphaMode::Known(a) => {
            if a.len() != obs.len() {
                return Err(shape(format!("{} strengths for {} locations", a.len(), obs.len())));
            }
            (a.clone(), 0.0)
        }
        AlphaMode::Estimate { zeta } => {
            let est = match &obs.alpha_estimates {
                Some(e) => e.clone(),
                None => obs.whitened.iter().map(crate::dsd::estimate_alpha_mle).collect(),
            };
            (est, *zeta)
        }
    };
    obs.whitened
        .iter()
        .zip(&alphas)
        .enumerate()
        .map(|(i, (y, &alpha))| {
            let statistic = projected.min_distance(y, alpha)?;
            Ok(AnomalyTest {
                location: i,
                statistic,
                pvalue_bound: pvalue_upper_bound(statistic, k, alpha, tau, epsilon, zeta)?,
                tau,
                zeta,
                alpha_used: alpha,
            })
        })
        .collect()
}

/// Statistics, p-value bounds and BH at level `delta` for every location.
pub fn run_asd(
    obs: &ObservationSet,
    plan: &SensingPlan,
    dict: &Dictionary,
    tau: f64,
    epsilon: f64,
    delta: f64,
    alpha_mode: &AlphaMode,
) -> Result<DetectionReport> {
    let tests = anomaly_tests(obs, plan, dict, tau, epsilon, alpha_mode)?;
    let pvalues: Vec<f64> = tests.iter().map(|t| t.pvalue_bound).collect();
    let bh = bh_procedure(&pvalues, delta)?;
    let mut rejected_mask = vec![false; tests.len()];
    for &i in &bh.rejected {
        rejected_mask[i] = true;
    }
    Ok(DetectionReport {
        tests,
        bh,
        rejected_mask,
    })
}

/// Declares every location with statistic at least `eta` anomalous.
pub fn threshold_rejections(statistics: &[f64], eta: f64) -> Vec<bool> {
    statistics.iter().map(|&d| d >= eta).collect()
}

/// Empirical error rates of one detection run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalyRates {
    pub fdr: f64,
    pub fnr: f64,
    pub pd: f64,
    pub pf: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// FDR, FNR, detection and false-alarm fractions, with `0/0 = 0`.
pub fn rates_from_mask(rejected: &[bool], anomalous: &[bool]) -> Result<AnomalyRates> {
    if rejected.len() != anomalous.len() {
        return Err(shape(format!(
            "{} decisions for {} locations",
            rejected.len(),
            anomalous.len()
        )));
    }
    let (mut tp, mut fp, mut fnn, mut tn) = (0, 0, 0, 0);
    for (&r, &a) in rejected.iter().zip(anomalous) {
        match (r, a) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(AnomalyRates {
        fdr: ratio(fp, tp + fp),
        fnr: ratio(fnn, fnn + tn),
        pd: ratio(tp, tp + fnn),
        pf: ratio(fp, fp + tn),
    })
}

pub fn empirical_rates(report: &DetectionReport, scene: &Scene) -> Result<AnomalyRates> {
    rates_from_mask(&report.rejected_mask, &scene.anomaly_mask)
}
