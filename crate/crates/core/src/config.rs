//! Experiment configuration.
//!
//! Configurations are JSON documents; any field may be omitted and falls back
//! to the desk-scale defaults below. `key.path=value` overrides are applied to
//! the JSON form before it is parsed, so they are validated like file input.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AlphaLaw;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Dsd,
    Asd,
    Bounds,
    Roc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DesignedPhi,
    RandomPhi,
    DownsampleMap,
    GlrtDownsample,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DesignedPhi => "designed_phi",
            Method::RandomPhi => "random_phi",
            Method::DownsampleMap => "downsample_map",
            Method::GlrtDownsample => "glrt_downsample",
        }
    }

    /// Projection methods produce whitened measurements `y = alpha A f + n`.
    pub fn is_projection(self) -> bool {
        matches!(self, Method::DesignedPhi | Method::RandomPhi)
    }

    pub fn supports(self, mode: Mode) -> bool {
        match self {
            Method::DesignedPhi | Method::RandomPhi => true,
            Method::DownsampleMap => mode == Mode::Dsd,
            Method::GlrtDownsample => mode == Mode::Roc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaModeName {
    Known,
    Estimate,
}

impl AlphaModeName {
    pub fn name(self) -> &'static str {
        match self {
            AlphaModeName::Known => "known",
            AlphaModeName::Estimate => "estimate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySource {
    File {
        path: PathBuf,
    },
    Synthetic {
        priors: Vec<f64>,
        /// Distance of the near-duplicate pair; `null` for none.
        #[serde(default)]
        d_min: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
}

impl Default for DictionarySource {
    fn default() -> Self {
        DictionarySource::Synthetic {
            priors: vec![0.05, 0.15, 0.1, 0.1, 0.1, 0.1, 0.1, 0.15, 0.15],
            d_min: Some(0.04341),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSpec {
    /// Largest eigenvalue of the background covariance.
    pub lambda_max: f64,
    /// AR(1) correlation between neighbouring bands.
    pub correlation: f64,
    /// Norm of the (constant) background mean.
    pub mean_scale: f64,
    pub sensor_variance: f64,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self {
            lambda_max: 0.04,
            correlation: 0.9,
            mean_scale: 0.0,
            sensor_variance: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyConfig {
    pub count: usize,
    /// Distance from the anomalous signal to the nearest target.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaGrid {
    /// Reject the fraction `q` of locations with the largest statistics, for
    /// `points` values of `q` evenly spaced on `[0, 1]`.
    Quantiles { points: usize },
    /// Reject locations whose statistic is at least each listed value.
    Values { values: Vec<f64> },
}

impl Default for EtaGrid {
    fn default() -> Self {
        EtaGrid::Quantiles { points: 41 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub tau: f64,
    /// Distortion level assumed by the p-value bounds.
    pub epsilon: f64,
    pub deltas: Vec<f64>,
    pub zeta: f64,
    pub eta: EtaGrid,
    /// Slack parameter of the achievable pFDR bound.
    pub bound_epsilon: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            epsilon: 0.1,
            deltas: vec![0.01, 0.05],
            zeta: 0.1,
            eta: EtaGrid::default(),
            bound_epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsGrid {
    pub alpha_min: Vec<f64>,
    pub d_min: Vec<f64>,
    /// `[p_min, p_max]` pairs.
    pub priors: Vec<[f64; 2]>,
}

impl Default for BoundsGrid {
    fn default() -> Self {
        Self {
            alpha_min: vec![50.0, 100.0, 200.0, 400.0],
            d_min: vec![0.04341, 0.1, 0.5],
            priors: vec![[0.05, 0.15], [0.1, 0.1]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    pub k_values: Vec<usize>,
    pub m_locations: usize,
    pub trials: usize,
    pub seed: u64,
    pub dictionary: DictionarySource,
    pub background: BackgroundSpec,
    pub alpha_law: AlphaLaw,
    pub anomaly: Option<AnomalyConfig>,
    pub detector: DetectorConfig,
    pub methods: Vec<Method>,
    pub alpha_modes: Vec<AlphaModeName>,
    pub bounds: BoundsGrid,
    /// Scale `c` of the block-sum baselines; matched to the designed plan's
    /// mean signal energy when absent.
    pub downsample_scale: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Dsd,
            n: 106,
            k_values: vec![18, 35, 53],
            m_locations: 2000,
            trials: 200,
            seed: 1,
            dictionary: DictionarySource::default(),
            background: BackgroundSpec::default(),
            alpha_law: AlphaLaw::UniformScaled { low: 21.0, high: 25.0 },
            anomaly: None,
            detector: DetectorConfig::default(),
            methods: vec![Method::DesignedPhi, Method::RandomPhi, Method::DownsampleMap, Method::GlrtDownsample],
            alpha_modes: vec![AlphaModeName::Known, AlphaModeName::Estimate],
            bounds: BoundsGrid::default(),
            downsample_scale: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON document, applies `key=value` overrides and validates.
    pub fn from_json_with_overrides(json: &str, overrides: &[String]) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(json).map_err(|e| config_err(format!("config is not valid JSON: {e}")))?;
        if !value.is_object() {
            return Err(config_err("config must be a JSON object"));
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?,
            None => "{}".to_string(),
        };
        Self::from_json_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(config_err("n must be positive"));
        }
        if self.k_values.is_empty() && self.mode != Mode::Bounds {
            return Err(config_err("k_values must not be empty"));
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(config_err(format!("K = {k} must lie in 1..={}", self.n)));
        }
        if self.trials == 0 {
            return Err(config_err("trials must be >= 1"));
        }
        if self.m_locations == 0 {
            return Err(config_err("m_locations must be >= 1"));
        }
        if let Some(d) = self.detector.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return Err(config_err(format!("delta {d} must lie in (0, 1)")));
        }
        let det = &self.detector;
        if !(det.epsilon > 0.0 && det.epsilon < 1.0) {
            return Err(config_err("detector.epsilon must lie in (0, 1)"));
        }
        if !(det.tau >= 0.0 && det.tau < 2f64.sqrt()) {
            return Err(config_err("detector.tau must lie in [0, sqrt 2)"));
        }
        if !(0.0..=1.0).contains(&det.zeta) {
            return Err(config_err("detector.zeta must lie in [0, 1]"));
        }
        if !(det.bound_epsilon > 0.0 && det.bound_epsilon < 1.0) {
            return Err(config_err("detector.bound_epsilon must lie in (0, 1)"));
        }
        match &det.eta {
            EtaGrid::Quantiles { points } if *points < 2 => {
                return Err(config_err("eta quantile grid needs at least 2 points"))
            }
            EtaGrid::Values { values } if values.is_empty() => {
                return Err(config_err("eta value grid must not be empty"))
            }
            _ => {}
        }
        self.alpha_law.validate().map_err(|e| config_err(e.to_string()))?;
        let bg = &self.background;
        if !(bg.sensor_variance > 0.0) || !(bg.lambda_max >= 0.0) || !(bg.correlation.abs() < 1.0) {
            return Err(config_err(
                "background needs sensor_variance > 0, lambda_max >= 0 and |correlation| < 1",
            ));
        }
        if let Some(a) = &self.anomaly {
            if a.count > self.m_locations {
                return Err(config_err("anomaly.count exceeds m_locations"));
            }
            if !(a.distance > 0.0 && a.distance <= 2.0) {
                return Err(config_err("anomaly.distance must lie in (0, 2]"));
            }
        }
        if let Some(c) = self.downsample_scale {
            if !(c.is_finite() && c > 0.0) {
                return Err(config_err("downsample_scale must be positive"));
            }
        }
        if self.methods.is_empty() {
            return Err(config_err("methods must not be empty"));
        }
        if self.alpha_modes.is_empty() {
            return Err(config_err("alpha_modes must not be empty"));
        }
        Ok(())
    }

    /// Methods that apply to the configured mode, in configuration order.
    pub fn active_methods(&self) -> Vec<Method> {
        self.methods.iter().copied().filter(|m| m.supports(self.mode)).collect()
    }
}

/// Sets `a.b.c=value` in a JSON object. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(root: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("bad override key `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| config_err(format!("`{path}` descends into a non-object")))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| config_err(format!("`{path}` descends into a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
