//! Monte Carlo experiment harness.
//!
//! Work is split into units `(K index, method index, trial)` that run in
//! parallel and are reassembled in unit order, so results do not depend on
//! scheduling. Random streams are derived from the run seed:
//!
//! * scene of `(K, trial)`: `[0, k, trial]`, shared by all methods;
//! * sensing matrix of a unit: `[1, k, method, trial]`;
//! * measurement noise of a unit: `[2, k, method, trial]`;
//! * anomalous signal: `[4]`; reference matrix for SNR matching: `[5, k]`.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::asd::{anomaly_tests, bh_procedure, rates_from_mask, threshold_rejections, AlphaMode, AnomalyRates};
use crate::baselines::{snr_matching_constant, DownsampleObserver, DownsamplePlan, MahalanobisDetector};
use crate::config::{AlphaModeName, DictionarySource, EtaGrid, ExperimentConfig, Method, Mode};
use crate::dsd::{
    achievable_pfdr_bound, estimate_alpha_mle, min_measurements, pe_bound_gaussian, pfdr_bound_from_pe,
    BoundInputs, PfdrReport, ProjectedDictionary,
};
use crate::error::{Error, Result};
use crate::model::synthetic::{anomaly_at_distance, synthetic_dictionary};
use crate::model::{
    generate_observations, generate_scene, AnomalySpec, BackgroundModel, Dictionary, DictionaryStats, Scene,
};
use crate::numerics::{gaussian_matrix, RngStream, Vector};
use crate::report::{self, *};
use crate::sensing::{build_designed_plan, check_background_tolerance, SensingPlan, ToleranceCheck};

/// Redraws of `A` allowed before a designed plan is declared infeasible.
const DESIGN_ATTEMPTS: u64 = 64;

/// Dictionary, background and anomalous signal shared by every unit.
#[derive(Debug, Clone)]
pub struct Setup {
    pub dictionary: Dictionary,
    pub stats: DictionaryStats,
    pub background: BackgroundModel,
    pub anomaly: Option<Vector>,
}

pub fn build_dictionary(source: &DictionarySource, n: usize) -> Result<Dictionary> {
    let dict = match source {
        DictionarySource::File { path } => Dictionary::load(path)?,
        DictionarySource::Synthetic { priors, d_min, seed } => {
            synthetic_dictionary(n, priors, *d_min, &RngStream::new(*seed))?
        }
    };
    if dict.dim() != n {
        return Err(Error::Config(format!(
            "dictionary targets have length {}, config has n = {n}",
            dict.dim()
        )));
    }
    Ok(dict)
}

pub fn build_background(cfg: &ExperimentConfig) -> Result<BackgroundModel> {
    let bg = &cfg.background;
    let mean = Vector::from_element(cfg.n, bg.mean_scale / (cfg.n as f64).sqrt());
    BackgroundModel::ar1(cfg.n, bg.lambda_max, bg.correlation, mean, bg.sensor_variance)
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let dictionary = build_dictionary(&cfg.dictionary, cfg.n)?;
    let stats = dictionary.stats()?;
    let background = build_background(cfg)?;
    let anomaly = match &cfg.anomaly {
        Some(a) => Some(anomaly_at_distance(&dictionary, a.distance, &root(cfg).substream(4))?),
        None => None,
    };
    Ok(Setup {
        dictionary,
        stats,
        background,
        anomaly,
    })
}

fn root(cfg: &ExperimentConfig) -> RngStream {
    RngStream::new(cfg.seed)
}

fn scene_stream(cfg: &ExperimentConfig, k_idx: usize, trial: usize) -> RngStream {
    root(cfg).substream_path(&[0, k_idx as u64, trial as u64])
}

fn plan_stream(cfg: &ExperimentConfig, k_idx: usize, method_idx: usize, trial: usize) -> RngStream {
    root(cfg).substream_path(&[1, k_idx as u64, method_idx as u64, trial as u64])
}

fn noise_stream(cfg: &ExperimentConfig, k_idx: usize, method_idx: usize, trial: usize) -> RngStream {
    root(cfg).substream_path(&[2, k_idx as u64, method_idx as u64, trial as u64])
}

/// Designed plan with a Gaussian `A` (entries `N(0, 1/K)`), redrawing `A`
/// while it violates the background tolerance.
pub fn draw_designed_plan(k: usize, bg: &BackgroundModel, stream: &RngStream) -> Result<SensingPlan> {
    let mut last: Option<ToleranceCheck> = None;
    for attempt in 0..DESIGN_ATTEMPTS {
        let a = gaussian_matrix(k, bg.dim(), 1.0 / k as f64, &stream.substream(attempt));
        let check = check_background_tolerance(&a, bg)?;
        if check.ok {
            return build_designed_plan(&a, bg);
        }
        last = Some(check);
    }
    let check = last.expect("at least one attempt");
    Err(Error::BackgroundTooStrong {
        lambda_max: check.lambda_max,
        threshold: check.threshold,
    })
}

/// Block-sum scale matching the mean signal energy of a designed plan.
pub fn matching_scale(cfg: &ExperimentConfig, setup: &Setup, k_idx: usize) -> Result<f64> {
    let k = cfg.k_values[k_idx];
    let reference = draw_designed_plan(k, &setup.background, &root(cfg).substream_path(&[5, k_idx as u64]))?;
    snr_matching_constant(&setup.dictionary, &DownsamplePlan::new(cfg.n, k)?, reference.phi())
}

fn plan_for(method: Method, k: usize, bg: &BackgroundModel, stream: &RngStream) -> Result<SensingPlan> {
    match method {
        Method::DesignedPhi => draw_designed_plan(k, bg, stream),
        Method::RandomPhi => SensingPlan::random_phi(k, bg, stream),
        Method::DownsampleMap | Method::GlrtDownsample => unreachable!("not a projection method"),
    }
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    k_idx: usize,
    method_idx: usize,
    method: Method,
    trial: usize,
}

fn units(cfg: &ExperimentConfig) -> Vec<Unit> {
    let methods = cfg.active_methods();
    let mut out = Vec::new();
    for k_idx in 0..cfg.k_values.len() {
        for (method_idx, &method) in methods.iter().enumerate() {
            for trial in 0..cfg.trials {
                out.push(Unit {
                    k_idx,
                    method_idx,
                    method,
                    trial,
                });
            }
        }
    }
    out
}

/// Alpha modes that apply to a method: strengths can only be estimated from
/// whitened projections.
fn alpha_modes_for(cfg: &ExperimentConfig, method: Method) -> Vec<AlphaModeName> {
    cfg.alpha_modes
        .iter()
        .copied()
        .filter(|m| *m == AlphaModeName::Known || method.is_projection())
        .collect()
}

fn run_units<T: Send>(cfg: &ExperimentConfig, f: impl Fn(Unit) -> Result<Vec<T>> + Sync) -> Result<Vec<T>> {
    let chunks: Vec<Result<Vec<T>>> = units(cfg).into_par_iter().map(&f).collect();
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

fn scales(cfg: &ExperimentConfig, setup: &Setup) -> Result<Vec<Option<f64>>> {
    let needs = cfg
        .active_methods()
        .iter()
        .any(|m| matches!(m, Method::DownsampleMap | Method::GlrtDownsample));
    (0..cfg.k_values.len())
        .map(|k_idx| match (needs, cfg.downsample_scale) {
            (false, _) => Ok(None),
            (true, Some(c)) => Ok(Some(c)),
            (true, None) => matching_scale(cfg, setup, k_idx).map(Some),
        })
        .collect()
}

fn scene_for(cfg: &ExperimentConfig, setup: &Setup, k_idx: usize, trial: usize, with_anomaly: bool) -> Result<Scene> {
    let spec = match (&cfg.anomaly, &setup.anomaly, with_anomaly) {
        (Some(a), Some(signal), true) => Some(AnomalySpec {
            signal: signal.clone(),
            count: a.count,
        }),
        _ => None,
    };
    generate_scene(
        &setup.dictionary,
        cfg.m_locations,
        cfg.alpha_law,
        cfg.k_values[k_idx],
        spec.as_ref(),
        &scene_stream(cfg, k_idx, trial),
    )
}

/// Per-trial and aggregated pFDR tables.
#[derive(Debug, Clone, Default)]
pub struct DsdResults {
    pub trials: Vec<DsdTrialRow>,
    pub aggregate: Vec<DsdAggregateRow>,
}

pub fn run_dsd(cfg: &ExperimentConfig, setup: &Setup) -> Result<DsdResults> {
    let scales = scales(cfg, setup)?;
    let m = setup.dictionary.len();
    let trials = run_units(cfg, |u| {
        let k = cfg.k_values[u.k_idx];
        let scene = scene_for(cfg, setup, u.k_idx, u.trial, false)?;
        let bound = achievable_pfdr_bound(&BoundInputs {
            k,
            n: cfg.n,
            alpha_min: scene.alpha_min(),
            d_min: setup.stats.d_min,
            p_min: setup.stats.p_min,
            p_max: setup.stats.p_max,
            epsilon: cfg.detector.bound_epsilon,
            lambda_max: setup.background.lambda_max(),
        })
        .map_err(|e| Error::Config(format!("bound inputs: {e}")))?;
        let noise = noise_stream(cfg, u.k_idx, u.method_idx, u.trial);

        let mut labelled: Vec<(AlphaModeName, Vec<usize>)> = Vec::new();
        if u.method.is_projection() {
            let plan = plan_for(u.method, k, &setup.background, &plan_stream(cfg, u.k_idx, u.method_idx, u.trial))?;
            let obs = generate_observations(&scene, &plan, &noise)?;
            let projected = ProjectedDictionary::new(plan.a(), &setup.dictionary)?;
            for mode in alpha_modes_for(cfg, u.method) {
                let labels = obs
                    .whitened
                    .iter()
                    .zip(&scene.alphas)
                    .enumerate()
                    .map(|(i, (y, &alpha))| {
                        let a = match mode {
                            AlphaModeName::Known => alpha,
                            AlphaModeName::Estimate => estimate_alpha_mle(y),
                        };
                        projected.decide(i, y, a).map(|d| d.label)
                    })
                    .collect::<Result<Vec<_>>>()?;
                labelled.push((mode, labels));
            }
        } else {
            let c = scales[u.k_idx].expect("scale computed for downsampling methods");
            let observer = DownsampleObserver::new(DownsamplePlan::new(cfg.n, k)?.with_scale(c)?, &setup.background)?;
            let detector =
                MahalanobisDetector::from_dictionary(&setup.dictionary, observer.plan(), observer.noise_covariance())?;
            let ys = observer.observe(&scene, &noise);
            let labels = ys
                .iter()
                .zip(&scene.alphas)
                .map(|(y, &alpha)| detector.classify(y, observer.effective_alpha(alpha)))
                .collect::<Result<Vec<_>>>()?;
            labelled.push((AlphaModeName::Known, labels));
        }

        let mut rows = Vec::new();
        for (mode, labels) in labelled {
            let rep = PfdrReport::from_labels(&labels, &scene.labels, m)?;
            let targets = rep
                .per_target_pfdr
                .iter()
                .enumerate()
                .map(|(j, p)| (j.to_string(), *p))
                .chain(std::iter::once(("worst".to_string(), rep.worst_case)));
            for (target_j, empirical_pfdr) in targets {
                rows.push(DsdTrialRow {
                    method: u.method.name().into(),
                    alpha_mode: mode.name().into(),
                    k,
                    trial: u.trial,
                    target_j,
                    empirical_pfdr,
                    bound_value: bound.value,
                    conditions_ok: bound.conditions.all(),
                });
            }
        }
        Ok(rows)
    })?;
    let aggregate = aggregate_dsd(&trials);
    Ok(DsdResults { trials, aggregate })
}

/// Groups trial rows by `(method, alpha_mode, K, target_j)` in first-seen
/// order; undefined pFDR values are left out of the means.
pub fn aggregate_dsd(rows: &[DsdTrialRow]) -> Vec<DsdAggregateRow> {
    let mut order: Vec<(String, String, usize, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, usize, String), Vec<&DsdTrialRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), r.alpha_mode.clone(), r.k, r.target_j.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let defined: Vec<f64> = g.iter().filter_map(|r| r.empirical_pfdr).collect();
            let (mean, se) = if defined.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_stderr(&defined);
                (Some(m), Some(s))
            };
            let bounds: Vec<f64> = g.iter().map(|r| r.bound_value).collect();
            DsdAggregateRow {
                method: key.0,
                alpha_mode: key.1,
                k: key.2,
                target_j: key.3,
                trials_defined: defined.len(),
                pfdr_mean: mean,
                pfdr_stderr: se,
                bound_mean: mean_stderr(&bounds).0,
                conditions_ok_fraction: g.iter().filter(|r| r.conditions_ok).count() as f64 / g.len() as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct AsdResults {
    pub runs: Vec<AsdRunRow>,
    pub aggregate: Vec<AsdAggregateRow>,
    pub locations: Vec<AsdLocationRow>,
}

fn alpha_mode_value(mode: AlphaModeName, scene: &Scene, zeta: f64) -> AlphaMode {
    match mode {
        AlphaModeName::Known => AlphaMode::Known(scene.alphas.clone()),
        AlphaModeName::Estimate => AlphaMode::Estimate { zeta },
    }
}

fn alpha_rel_error_max(scene: &Scene, used: &[f64]) -> Option<f64> {
    scene
        .alphas
        .iter()
        .zip(used)
        .filter(|(_, &hat)| hat > 0.0)
        .map(|(&a, &hat)| (a / hat - 1.0).abs())
        .reduce(f64::max)
}

pub fn run_asd_experiment(cfg: &ExperimentConfig, setup: &Setup) -> Result<AsdResults> {
    let det = &cfg.detector;
    let out = run_units(cfg, |u| {
        let k = cfg.k_values[u.k_idx];
        let scene = scene_for(cfg, setup, u.k_idx, u.trial, true)?;
        let plan = plan_for(u.method, k, &setup.background, &plan_stream(cfg, u.k_idx, u.method_idx, u.trial))?;
        let obs = generate_observations(&scene, &plan, &noise_stream(cfg, u.k_idx, u.method_idx, u.trial))?;
        let mut rows = Vec::new();
        for mode in alpha_modes_for(cfg, u.method) {
            let tests = anomaly_tests(&obs, &plan, &setup.dictionary, det.tau, det.epsilon, &alpha_mode_value(mode, &scene, det.zeta))?;
            let pvalues: Vec<f64> = tests.iter().map(|t| t.pvalue_bound).collect();
            let used: Vec<f64> = tests.iter().map(|t| t.alpha_used).collect();
            for &delta in &det.deltas {
                let bh = bh_procedure(&pvalues, delta)?;
                let mut mask = vec![false; pvalues.len()];
                for &i in &bh.rejected {
                    mask[i] = true;
                }
                let rates = rates_from_mask(&mask, &scene.anomaly_mask)?;
                let run = AsdRunRow {
                    method: u.method.name().into(),
                    alpha_mode: mode.name().into(),
                    delta,
                    fdr: rates.fdr,
                    fnr: rates.fnr,
                    pd: rates.pd,
                    pf: rates.pf,
                    k,
                    tau: det.tau,
                    epsilon: det.epsilon,
                    zeta: if mode == AlphaModeName::Known { 0.0 } else { det.zeta },
                    seed: cfg.seed,
                    trial: u.trial,
                    rejections: bh.threshold_index,
                    alpha_rel_error_max: match mode {
                        AlphaModeName::Known => None,
                        AlphaModeName::Estimate => alpha_rel_error_max(&scene, &used),
                    },
                };
                let locations = if u.trial == 0 {
                    tests
                        .iter()
                        .map(|t| AsdLocationRow {
                            method: u.method.name().into(),
                            alpha_mode: mode.name().into(),
                            k,
                            delta,
                            i: t.location,
                            d_i: t.statistic,
                            pvalue_bound: t.pvalue_bound,
                            rejected: mask[t.location],
                            gt: u8::from(scene.anomaly_mask[t.location]),
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                rows.push((run, locations));
            }
        }
        Ok(rows)
    })?;
    let mut runs = Vec::with_capacity(out.len());
    let mut locations = Vec::new();
    for (r, l) in out {
        runs.push(r);
        locations.extend(l);
    }
    let aggregate = aggregate_asd(&runs);
    Ok(AsdResults {
        runs,
        aggregate,
        locations,
    })
}

pub fn aggregate_asd(rows: &[AsdRunRow]) -> Vec<AsdAggregateRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<(String, String, usize, u64), Vec<&AsdRunRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), r.alpha_mode.clone(), r.k, r.delta.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let col = |f: fn(&AsdRunRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (fdr_mean, fdr_stderr) = mean_stderr(&col(|r| r.fdr));
            let (fnr_mean, fnr_stderr) = mean_stderr(&col(|r| r.fnr));
            AsdAggregateRow {
                method: key.0,
                alpha_mode: key.1,
                k: key.2,
                delta: f64::from_bits(key.3),
                trials: g.len(),
                fdr_mean,
                fdr_stderr,
                fnr_mean,
                fnr_stderr,
                pd_mean: mean_stderr(&col(|r| r.pd)).0,
                pf_mean: mean_stderr(&col(|r| r.pf)).0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RocResults {
    pub trials: Vec<RocTrialRow>,
    pub curves: Vec<RocCurveRow>,
    pub summary: Vec<RocSummaryRow>,
}

/// Threshold sweep over one set of anomaly scores (larger is more anomalous).
pub fn sweep(scores: &[f64], anomalous: &[bool], grid: &EtaGrid) -> Result<Vec<(f64, AnomalyRates)>> {
    match grid {
        EtaGrid::Values { values } => values
            .iter()
            .map(|&eta| Ok((eta, rates_from_mask(&threshold_rejections(scores, eta), anomalous)?)))
            .collect(),
        EtaGrid::Quantiles { points } => {
            let m = scores.len();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            (0..*points)
                .map(|p| {
                    let q = p as f64 / (*points - 1) as f64;
                    let count = (q * m as f64).round() as usize;
                    let mut mask = vec![false; m];
                    for &i in &order[..count] {
                        mask[i] = true;
                    }
                    Ok((q, rates_from_mask(&mask, anomalous)?))
                })
                .collect()
        }
    }
}

pub fn run_roc(cfg: &ExperimentConfig, setup: &Setup) -> Result<RocResults> {
    let scales = scales(cfg, setup)?;
    let det = &cfg.detector;
    let trials = run_units(cfg, |u| {
        let k = cfg.k_values[u.k_idx];
        let scene = scene_for(cfg, setup, u.k_idx, u.trial, true)?;
        let noise = noise_stream(cfg, u.k_idx, u.method_idx, u.trial);
        let mut scored: Vec<(AlphaModeName, Vec<f64>)> = Vec::new();
        if u.method.is_projection() {
            let plan = plan_for(u.method, k, &setup.background, &plan_stream(cfg, u.k_idx, u.method_idx, u.trial))?;
            let obs = generate_observations(&scene, &plan, &noise)?;
            let projected = ProjectedDictionary::new(plan.a(), &setup.dictionary)?;
            for mode in alpha_modes_for(cfg, u.method) {
                let scores = obs
                    .whitened
                    .iter()
                    .zip(&scene.alphas)
                    .map(|(y, &alpha)| {
                        let a = match mode {
                            AlphaModeName::Known => alpha,
                            AlphaModeName::Estimate => estimate_alpha_mle(y),
                        };
                        projected.min_distance(y, a)
                    })
                    .collect::<Result<Vec<_>>>()?;
                scored.push((mode, scores));
            }
        } else {
            let c = scales[u.k_idx].expect("scale computed for downsampling methods");
            let observer = DownsampleObserver::new(DownsamplePlan::new(cfg.n, k)?.with_scale(c)?, &setup.background)?;
            let m = setup.dictionary.len();
            let columns: Vec<Vector> = setup
                .dictionary
                .targets()
                .iter()
                .map(|f| crate::baselines::downsample(f, observer.plan()))
                .collect::<Result<_>>()?;
            let detector = MahalanobisDetector::new(&columns, vec![-(m as f64).ln(); m], observer.noise_covariance())?;
            let scores = observer
                .observe(&scene, &noise)
                .iter()
                .zip(&scene.alphas)
                .map(|(y, &alpha)| detector.glrt_score(y, observer.effective_alpha(alpha)))
                .collect::<Result<Vec<_>>>()?;
            scored.push((AlphaModeName::Known, scores));
        }
        let mut rows = Vec::new();
        for (mode, scores) in scored {
            for (point, (threshold, r)) in sweep(&scores, &scene.anomaly_mask, &det.eta)?.into_iter().enumerate() {
                rows.push(RocTrialRow {
                    method: u.method.name().into(),
                    alpha_mode: mode.name().into(),
                    k,
                    trial: u.trial,
                    point,
                    threshold,
                    fdr: r.fdr,
                    fnr: r.fnr,
                    pd: r.pd,
                    pf: r.pf,
                });
            }
        }
        Ok(rows)
    })?;
    let (curves, summary) = aggregate_roc(&trials);
    Ok(RocResults { trials, curves, summary })
}

pub fn aggregate_roc(rows: &[RocTrialRow]) -> (Vec<RocCurveRow>, Vec<RocSummaryRow>) {
    let mut order = Vec::new();
    let mut groups: BTreeMap<(String, String, usize, usize), Vec<&RocTrialRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), r.alpha_mode.clone(), r.k, r.point);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let curves: Vec<RocCurveRow> = order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let mean = |f: fn(&RocTrialRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64;
            RocCurveRow {
                threshold: g[0].threshold,
                fdr_mean: mean(|r| r.fdr),
                fnr_mean: mean(|r| r.fnr),
                pd_mean: mean(|r| r.pd),
                pf_mean: mean(|r| r.pf),
                method: key.0,
                alpha_mode: key.1,
                k: key.2,
                point: key.3,
            }
        })
        .collect();
    let mut summary_order = Vec::new();
    let mut per_curve: BTreeMap<(String, String, usize), Vec<&RocCurveRow>> = BTreeMap::new();
    for c in &curves {
        let key = (c.method.clone(), c.alpha_mode.clone(), c.k);
        if !per_curve.contains_key(&key) {
            summary_order.push(key.clone());
        }
        per_curve.entry(key).or_default().push(c);
    }
    let summary = summary_order
        .into_iter()
        .map(|key| {
            let c = &per_curve[&key];
            let pseudo: Vec<(f64, f64)> = c.iter().map(|r| (r.fdr_mean, 1.0 - r.fnr_mean)).collect();
            let roc: Vec<(f64, f64)> = c.iter().map(|r| (r.pf_mean, r.pd_mean)).collect();
            RocSummaryRow {
                method: key.0,
                alpha_mode: key.1,
                k: key.2,
                pseudo_roc_area: pseudo_roc_area(&pseudo),
                roc_auc: roc_auc(&roc),
            }
        })
        .collect();
    (curves, summary)
}

/// Bound values over the configured grid; `K` ranges over `k_values`.
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<Vec<BoundsRow>> {
    let lambda_max = build_background(cfg)?.lambda_max();
    let eps = cfg.detector.bound_epsilon;
    let mut rows = Vec::new();
    for &alpha_min in &cfg.bounds.alpha_min {
        for &d_min in &cfg.bounds.d_min {
            for &[p_min, p_max] in &cfg.bounds.priors {
                let k_min = match min_measurements(alpha_min, d_min, p_min, p_max) {
                    Ok(k) => Some(k),
                    Err(Error::Infeasible { .. }) => None,
                    Err(e) => return Err(Error::Config(format!("bounds grid: {e}"))),
                };
                for &k in &cfg.k_values {
                    let b = achievable_pfdr_bound(&BoundInputs {
                        k,
                        n: cfg.n,
                        alpha_min,
                        d_min,
                        p_min,
                        p_max,
                        epsilon: eps,
                        lambda_max,
                    })
                    .map_err(|e| Error::Config(format!("bounds grid: {e}")))?;
                    let pe = pe_bound_gaussian(k, alpha_min, d_min, p_min, 1.0);
                    rows.push(BoundsRow {
                        alpha_min,
                        d_min,
                        p_min,
                        p_max,
                        k,
                        n: cfg.n,
                        epsilon: eps,
                        lambda_max,
                        achievable_bound: b.value,
                        positive_prob: b.conditions.positive_prob,
                        weak_background: b.conditions.weak_background,
                        k_bound: b.conditions.k_bound,
                        pe_bound: pe,
                        pfdr_bound_from_pe: pfdr_bound_from_pe(pe, p_max),
                        min_measurements: k_min,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Runs the configured mode and writes its reports into `out`, returning the
/// file names written.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut write = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        f(&out.join(name))?;
        files.push(name.to_string());
        Ok(())
    };
    match cfg.mode {
        Mode::Bounds => {
            cfg.validate()?;
            let rows = run_bounds(cfg)?;
            write(report::BOUNDS, &|p| write_rows(p, &rows))?;
        }
        Mode::Dsd => {
            let setup = prepare(cfg)?;
            let r = run_dsd(cfg, &setup)?;
            write(report::DSD_TRIALS, &|p| write_rows(p, &r.trials))?;
            write(report::DSD_AGGREGATE, &|p| write_rows(p, &r.aggregate))?;
        }
        Mode::Asd => {
            let setup = prepare(cfg)?;
            let r = run_asd_experiment(cfg, &setup)?;
            write(report::ASD_RUNS, &|p| write_rows(p, &r.runs))?;
            write(report::ASD_AGGREGATE, &|p| write_rows(p, &r.aggregate))?;
            write(report::ASD_LOCATIONS, &|p| write_rows(p, &r.locations))?;
        }
        Mode::Roc => {
            let setup = prepare(cfg)?;
            let r = run_roc(cfg, &setup)?;
            write(report::ROC_TRIALS, &|p| write_rows(p, &r.trials))?;
            write(report::ROC_CURVES, &|p| write_rows(p, &r.curves))?;
            write(report::ROC_SUMMARY, &|p| write_rows(p, &r.summary))?;
        }
    }
    Ok(files)
}
