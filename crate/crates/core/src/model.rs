//! Dictionaries, backgrounds, scenes and observations.
//!
//! A location `i` is observed as `z_i = Phi (alpha_i f_i + b_i) + w_i` with
//! background `b_i ~ N(mu_b, Sigma_b)` and sensor noise `w_i ~ N(0, s2 I)`.
//! [`generate_scene`] draws the ground truth and [`generate_observations`]
//! draws `z_i` and its whitened counterpart `y_i`.

pub mod synthetic;

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::numerics::{sqrt_psd, standard_normal_vector, Matrix, RngStream, SymMatrix, Vector};
use crate::sensing::SensingPlan;

const UNIT_NORM_TOL: f64 = 1e-9;
const PRIOR_SUM_TOL: f64 = 1e-12;

/// Known target spectra with their prior probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    targets: Vec<Vector>,
    priors: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryFile {
    targets: Vec<Vec<f64>>,
    priors: Vec<f64>,
}

impl Dictionary {
    /// Validates unit norms, positive priors summing to one, a common
    /// dimension and pairwise-distinct targets.
    pub fn new(targets: Vec<Vector>, priors: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InsufficientDictionary { needed: 1, got: 0 });
        }
        if targets.len() != priors.len() {
            return Err(shape(format!(
                "{} targets but {} priors",
                targets.len(),
                priors.len()
            )));
        }
        let n = targets[0].len();
        if n == 0 {
            return Err(invalid("targets must have positive length"));
        }
        for (j, f) in targets.iter().enumerate() {
            if f.len() != n {
                return Err(shape(format!("target {j} has length {}, expected {n}", f.len())));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("target {j} has non-finite entries")));
            }
            let norm = f.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(invalid(format!("target {j} has norm {norm}, expected 1")));
            }
        }
        if let Some(p) = priors.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(invalid(format!("priors must be positive, got {p}")));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(invalid(format!("priors sum to {total}, expected 1")));
        }
        for a in 0..targets.len() {
            for b in a + 1..targets.len() {
                if targets[a] == targets[b] {
                    return Err(invalid(format!("targets {a} and {b} are identical")));
                }
            }
        }
        Ok(Self { targets, priors })
    }

    /// Dictionary with equal priors.
    pub fn uniform(targets: Vec<Vector>) -> Result<Self> {
        let m = targets.len().max(1);
        Self::new(targets, vec![1.0 / m as f64; m])
    }

    /// Scales each target to unit norm and the priors to sum to one before
    /// validating.
    pub fn normalized(targets: Vec<Vector>, priors: Vec<f64>) -> Result<Self> {
        let targets = targets
            .into_iter()
            .map(|f| {
                let norm = f.norm();
                if norm > 0.0 {
                    f / norm
                } else {
                    f
                }
            })
            .collect();
        let total: f64 = priors.iter().sum();
        let priors = priors.into_iter().map(|p| p / total).collect();
        Self::new(targets, priors)
    }

    /// Number of targets `m`.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Signal dimension `N`.
    pub fn dim(&self) -> usize {
        self.targets[0].len()
    }

    pub fn targets(&self) -> &[Vector] {
        &self.targets
    }

    pub fn target(&self, j: usize) -> &Vector {
        &self.targets[j]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn log_priors(&self) -> Vec<f64> {
        self.priors.iter().map(|p| p.ln()).collect()
    }

    /// `N x m` matrix whose columns are the targets.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_columns(&self.targets)
    }

    pub fn stats(&self) -> Result<DictionaryStats> {
        make_dictionary_stats(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DictionaryFile = serde_json::from_str(s)?;
        let targets = file.targets.into_iter().map(Vector::from_vec).collect();
        Self::new(targets, file.priors)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = DictionaryFile {
            targets: self.targets.iter().map(|f| f.iter().copied().collect()).collect(),
            priors: self.priors.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// Separation and prior extremes of a dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionaryStats {
    pub d_min: f64,
    pub p_min: f64,
    pub p_max: f64,
}

/// Exact minimum pairwise distance and prior extremes. Needs `m >= 2`.
pub fn make_dictionary_stats(dict: &Dictionary) -> Result<DictionaryStats> {
    let m = dict.len();
    if m < 2 {
        return Err(Error::InsufficientDictionary { needed: 2, got: m });
    }
    let mut d_min = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            d_min = d_min.min((dict.target(a) - dict.target(b)).norm());
        }
    }
    let p_min = dict.priors().iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = dict.priors().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DictionaryStats { d_min, p_min, p_max })
}

/// Background statistics `(mu_b, Sigma_b)` and sensor noise variance.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    mean: Vector,
    covariance: SymMatrix,
    sensor_variance: f64,
    lambda_max: f64,
    cov_sqrt: Matrix,
}

impl BackgroundModel {
    pub fn new(mean: Vector, covariance: SymMatrix, sensor_variance: f64) -> Result<Self> {
        let n = covariance.dim();
        if mean.len() != n {
            return Err(shape(format!("background mean has length {}, covariance is {n}x{n}", mean.len())));
        }
        if !(sensor_variance > 0.0) || !sensor_variance.is_finite() {
            return Err(invalid(format!("sensor variance must be positive, got {sensor_variance}")));
        }
        let eig = covariance.eigenvalues();
        let top = eig.max().max(0.0);
        let bottom = eig.min();
        if bottom < -1e-10 * top.max(1e-300) && bottom < -1e-14 {
            return Err(Error::NotPositiveDefinite {
                eigenvalue: bottom,
                floor: 0.0,
            });
        }
        let cov_sqrt = sqrt_psd(&covariance).into_matrix();
        Ok(Self {
            mean,
            covariance,
            sensor_variance,
            lambda_max: top,
            cov_sqrt,
        })
    }

    /// No background clutter, only sensor noise.
    pub fn sensor_only(n: usize, sensor_variance: f64) -> Result<Self> {
        Self::new(Vector::zeros(n), SymMatrix::zeros(n), sensor_variance)
    }

    /// `Sigma_b = level * I`.
    pub fn isotropic(n: usize, level: f64, sensor_variance: f64) -> Result<Self> {
        if !(level >= 0.0) {
            return Err(invalid(format!("background level must be >= 0, got {level}")));
        }
        Self::new(Vector::zeros(n), SymMatrix::from_diagonal(&vec![level; n])?, sensor_variance)
    }

    /// Stationary AR(1) covariance `rho^|i-j|`, rescaled so its largest
    /// eigenvalue is `lambda_max`.
    pub fn ar1(n: usize, lambda_max: f64, rho: f64, mean: Vector, sensor_variance: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho.abs()) {
            return Err(invalid(format!("correlation must lie in (-1, 1), got {rho}")));
        }
        if !(lambda_max >= 0.0) {
            return Err(invalid(format!("lambda_max must be >= 0, got {lambda_max}")));
        }
        let base = Matrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32));
        let base = SymMatrix::new(base)?;
        let scale = if lambda_max == 0.0 { 0.0 } else { lambda_max / base.max_eigenvalue() };
        let cov = SymMatrix::symmetrize(base.into_matrix() * scale)?;
        Self::new(mean, cov, sensor_variance)
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn covariance(&self) -> &SymMatrix {
        &self.covariance
    }

    pub fn sensor_variance(&self) -> f64 {
        self.sensor_variance
    }

    pub fn sigma(&self) -> f64 {
        self.sensor_variance.sqrt()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Symmetric square root of `Sigma_b`, used to draw backgrounds.
    pub fn covariance_sqrt(&self) -> &Matrix {
        &self.cov_sqrt
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        &self.mean + &self.cov_sqrt * standard_normal_vector(rng, self.dim())
    }
}

/// How per-location signal strengths are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaLaw {
    Constant { value: f64 },
    /// `alpha = a* sqrt(K)` with `a* ~ U[low, high]`.
    UniformScaled { low: f64, high: f64 },
    Uniform { low: f64, high: f64 },
}

impl AlphaLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaLaw::Constant { value } if value >= 0.0 && value.is_finite() => Ok(()),
            AlphaLaw::UniformScaled { low, high } | AlphaLaw::Uniform { low, high }
                if low >= 0.0 && high >= low && high.is_finite() =>
            {
                Ok(())
            }
            other => Err(invalid(format!("bad alpha law {other:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> f64 {
        let uniform = |rng: &mut R, low: f64, high: f64| {
            if high > low {
                rng.random_range(low..high)
            } else {
                low
            }
        };
        match *self {
            AlphaLaw::Constant { value } => value,
            AlphaLaw::UniformScaled { low, high } => uniform(rng, low, high) * (k as f64).sqrt(),
            AlphaLaw::Uniform { low, high } => uniform(rng, low, high),
        }
    }
}

/// Ground truth at one location: a dictionary index or the anomalous signal.
/// Serialized as the index or `null`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Option<usize>", into = "Option<usize>")]
pub enum Label {
    Target(usize),
    Anomaly,
}

impl From<Option<usize>> for Label {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Label::Anomaly, Label::Target)
    }
}

impl From<Label> for Option<usize> {
    fn from(l: Label) -> Self {
        match l {
            Label::Target(j) => Some(j),
            Label::Anomaly => None,
        }
    }
}

impl Label {
    pub fn target(self) -> Option<usize> {
        self.into()
    }

    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }
}

/// Anomalous signal planted at `count` random locations.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalySpec {
    pub signal: Vector,
    pub count: usize,
}

/// Ground truth for `M` locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub labels: Vec<Label>,
    pub true_signals: Vec<Vector>,
    pub alphas: Vec<f64>,
    pub anomaly_mask: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    labels: Vec<Label>,
    alphas: Vec<f64>,
    anomaly_mask: Vec<bool>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn alpha_min(&self) -> f64 {
        self.alphas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn anomaly_count(&self) -> usize {
        self.anomaly_mask.iter().filter(|&&a| a).count()
    }

    /// Labels, strengths and mask as JSON. Signals are omitted; they follow
    /// from the labels, the dictionary and the anomalous signal.
    pub fn to_json_string(&self) -> Result<String> {
        let file = SceneFile {
            labels: self.labels.clone(),
            alphas: self.alphas.clone(),
            anomaly_mask: self.anomaly_mask.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Rebuilds a scene from its JSON form.
    pub fn from_json_str(s: &str, dict: &Dictionary, anomaly: Option<&Vector>) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(s)?;
        let m = file.labels.len();
        if file.alphas.len() != m || file.anomaly_mask.len() != m {
            return Err(Error::Schema("scene arrays differ in length".into()));
        }
        let mut true_signals = Vec::with_capacity(m);
        for (i, (label, &mask)) in file.labels.iter().zip(&file.anomaly_mask).enumerate() {
            if label.is_anomaly() != mask {
                return Err(Error::Schema(format!("location {i}: label and anomaly mask disagree")));
            }
            let f = match *label {
                Label::Target(j) if j < dict.len() => dict.target(j).clone(),
                Label::Target(j) => return Err(invalid(format!("label {j} outside dictionary"))),
                Label::Anomaly => anomaly
                    .ok_or_else(|| invalid("scene has anomalies but no anomalous signal given"))?
                    .clone(),
            };
            true_signals.push(f);
        }
        Ok(Self {
            labels: file.labels,
            true_signals,
            alphas: file.alphas,
            anomaly_mask: file.anomaly_mask,
        })
    }
}

/// Draws labels i.i.d. from the priors, places `anomaly.count` anomalous
/// locations uniformly at random, and draws strengths from `alpha_law` for
/// measurement count `k`.
pub fn generate_scene(
    dict: &Dictionary,
    m: usize,
    alpha_law: AlphaLaw,
    k: usize,
    anomaly: Option<&AnomalySpec>,
    stream: &RngStream,
) -> Result<Scene> {
    alpha_law.validate()?;
    let mut anomaly_mask = vec![false; m];
    if let Some(spec) = anomaly {
        if spec.count > m {
            return Err(invalid(format!("{} anomalies requested for {m} locations", spec.count)));
        }
        if spec.signal.len() != dict.dim() {
            return Err(shape(format!(
                "anomalous signal has length {}, dictionary has {}",
                spec.signal.len(),
                dict.dim()
            )));
        }
        if (spec.signal.norm() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(invalid("anomalous signal must be unit norm"));
        }
        let mut rng = stream.substream(0).rng();
        for i in rand::seq::index::sample(&mut rng, m, spec.count) {
            anomaly_mask[i] = true;
        }
    }

    let weights = WeightedIndex::new(dict.priors()).map_err(|e| invalid(e.to_string()))?;
    let mut label_rng = stream.substream(1).rng();
    let mut alpha_rng = stream.substream(2).rng();
    let mut labels = Vec::with_capacity(m);
    let mut true_signals = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    for &is_anomaly in &anomaly_mask {
        let j = weights.sample(&mut label_rng);
        if is_anomaly {
            labels.push(Label::Anomaly);
            true_signals.push(anomaly.expect("mask set only with a spec").signal.clone());
        } else {
            labels.push(Label::Target(j));
            true_signals.push(dict.target(j).clone());
        }
        alphas.push(alpha_law.sample(&mut alpha_rng, k));
    }
    Ok(Scene {
        labels,
        true_signals,
        alphas,
        anomaly_mask,
    })
}

/// Raw and whitened measurements for every location.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub raw: Vec<Vector>,
    pub whitened: Vec<Vector>,
    pub alpha_estimates: Option<Vec<f64>>,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn k(&self) -> usize {
        self.whitened.first().map_or(0, |y| y.len())
    }

    /// Fills `alpha_estimates` with the maximum-likelihood strengths.
    pub fn estimate_alphas(&mut self) {
        self.alpha_estimates = Some(self.whitened.iter().map(crate::dsd::estimate_alpha_mle).collect());
    }
}

/// Draws `z_i = Phi (alpha_i f_i + b_i) + w_i` for every location of the
/// scene, location `i` using substream `i` of `stream`, and whitens each.
pub fn generate_observations(scene: &Scene, plan: &SensingPlan, stream: &RngStream) -> Result<ObservationSet> {
    let bg = plan.background();
    let phi = plan.phi();
    if let Some(f) = scene.true_signals.first() {
        if f.len() != phi.ncols() {
            return Err(shape(format!(
                "signals have length {}, sensing matrix has {} columns",
                f.len(),
                phi.ncols()
            )));
        }
    }
    let phi_mean = phi * bg.mean();
    let phi_sqrt = phi * bg.covariance_sqrt();
    let sigma = bg.sigma();
    let (k, n) = phi.shape();

    let mut raw = Vec::with_capacity(scene.len());
    let mut whitened = Vec::with_capacity(scene.len());
    for (i, (f, &alpha)) in scene.true_signals.iter().zip(&scene.alphas).enumerate() {
        let mut rng = stream.substream(i as u64).rng();
        let g = standard_normal_vector(&mut rng, n);
        let w = standard_normal_vector(&mut rng, k);
        let z = phi * f * alpha + &phi_mean + &phi_sqrt * g + w * sigma;
        whitened.push(plan.whiten_centered(&(&z - &phi_mean)));
        raw.push(z);
    }
    Ok(ObservationSet {
        raw,
        whitened,
        alpha_estimates: None,
    })
}
