//! Comparison detectors operating on downsampled spectra.
//!
//! A spectrum `g` of length `N` is reduced to `K` block sums of width
//! `r = ceil(N/K)`, the last blocks zero-padded. Measurements are
//! `y = D(alpha f + b - mu_b) / c + n` with `n ~ N(0, s2 I)` and `c` chosen so
//! the mean signal energy matches that of a projection pipeline. Both the
//! MAP classifier and the GLRT anomaly score use the Gaussian model
//! `y ~ N((alpha/c) D f, D Sigma_b D^T / c^2 + s2 I)`.

use nalgebra::Cholesky;

use crate::dsd::argmax;
use crate::error::{invalid, shape, Error, Result};
use crate::model::{BackgroundModel, Dictionary, Scene};
use crate::numerics::{standard_normal_vector, Matrix, RngStream, SymMatrix, Vector};

/// Block-sum reduction from `N` to `K` samples with output scale `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownsamplePlan {
    pub n: usize,
    pub k: usize,
    pub block: usize,
    pub scale: f64,
}

impl DownsamplePlan {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(invalid(format!("need 1 <= K <= N, got K = {k}, N = {n}")));
        }
        Ok(Self {
            n,
            k,
            block: n.div_ceil(k),
            scale: 1.0,
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid(format!("scale must be positive, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }
}

/// Block sums of `g`; blocks running past `N` are zero-padded.
pub fn downsample(g: &Vector, plan: &DownsamplePlan) -> Result<Vector> {
    if g.len() != plan.n {
        return Err(shape(format!("spectrum has length {}, plan expects {}", g.len(), plan.n)));
    }
    Ok(Vector::from_fn(plan.k, |j, _| {
        let start = (j * plan.block).min(plan.n);
        let end = ((j + 1) * plan.block).min(plan.n);
        g.rows(start, end - start).sum()
    }))
}

/// The `K x N` matrix `D` with `D g = downsample(g)`.
pub fn downsample_matrix(plan: &DownsamplePlan) -> Matrix {
    Matrix::from_fn(plan.k, plan.n, |j, i| if i / plan.block == j { 1.0 } else { 0.0 })
}

/// `c = sqrt(mean ||D f||^2 / mean ||Phi f||^2)` over the dictionary, which
/// equalizes the mean signal energy of `D f / c` and `Phi f`.
pub fn snr_matching_constant(dict: &Dictionary, plan: &DownsamplePlan, phi: &Matrix) -> Result<f64> {
    if phi.ncols() != dict.dim() || plan.n != dict.dim() {
        return Err(shape("sensing matrix, plan and dictionary disagree on N"));
    }
    let mut down = 0.0;
    let mut proj = 0.0;
    for f in dict.targets() {
        down += downsample(f, plan)?.norm_squared();
        proj += (phi * f).norm_squared();
    }
    if proj == 0.0 || down == 0.0 {
        return Err(invalid("signal energy vanishes"));
    }
    Ok((down / proj).sqrt())
}

/// Gaussian-mixture detector on downsampled data: one component
/// `N(alpha g_l, G)` per dictionary entry.
#[derive(Debug, Clone)]
pub struct MahalanobisDetector {
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// `L^{-1} g_l` with `G = L L^T`.
    whitened_columns: Vec<Vector>,
    log_priors: Vec<f64>,
    /// `log det(2 pi G)`.
    log_det: f64,
}

impl MahalanobisDetector {
    pub fn new(columns: &[Vector], log_priors: Vec<f64>, g: &SymMatrix) -> Result<Self> {
        if columns.is_empty() {
            return Err(invalid("empty dictionary"));
        }
        if columns.iter().any(|c| c.len() != g.dim()) || log_priors.len() != columns.len() {
            return Err(shape("dictionary columns, priors and covariance disagree"));
        }
        let chol = Cholesky::new(g.as_matrix().clone()).ok_or_else(|| Error::NotPositiveDefinite {
            eigenvalue: g.min_eigenvalue(),
            floor: 0.0,
        })?;
        let l = chol.l();
        let whitened_columns = columns
            .iter()
            .map(|c| l.solve_lower_triangular(c).expect("cholesky factor is invertible"))
            .collect();
        let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
            + g.dim() as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self {
            chol,
            whitened_columns,
            log_priors,
            log_det,
        })
    }

    pub fn from_dictionary(dict: &Dictionary, plan: &DownsamplePlan, g: &SymMatrix) -> Result<Self> {
        let columns = dict
            .targets()
            .iter()
            .map(|f| downsample(f, plan))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&columns, dict.log_priors(), g)
    }

    /// `(y - alpha g_l)^T G^{-1} (y - alpha g_l)` for every component.
    pub fn quadratic_forms(&self, y: &Vector, alpha: f64) -> Result<Vec<f64>> {
        if y.len() != self.chol.l_dirty().nrows() {
            return Err(shape(format!("measurement has length {}", y.len())));
        }
        let u = self.chol.l().solve_lower_triangular(y).expect("cholesky factor is invertible");
        Ok(self
            .whitened_columns
            .iter()
            .map(|c| u.iter().zip(c.iter()).map(|(a, b)| (a - alpha * b).powi(2)).sum())
            .collect())
    }

    /// MAP label `argmax_l -q_l / 2 + ln p_l`, lowest index on ties.
    pub fn classify(&self, y: &Vector, alpha: f64) -> Result<usize> {
        let q = self.quadratic_forms(y, alpha)?;
        let scores: Vec<f64> = q.iter().zip(&self.log_priors).map(|(q, lp)| -0.5 * q + lp).collect();
        Ok(argmax(&scores))
    }

    /// `-ln[(1/m) sum_l N(y; alpha g_l, G)]`, ignoring the priors.
    pub fn glrt_score(&self, y: &Vector, alpha: f64) -> Result<f64> {
        let q = self.quadratic_forms(y, alpha)?;
        let half: Vec<f64> = q.iter().map(|q| -0.5 * q).collect();
        let top = half.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + half.iter().map(|h| (h - top).exp()).sum::<f64>().ln();
        Ok(-lse + (q.len() as f64).ln() + 0.5 * self.log_det)
    }
}

/// Mahalanobis MAP label on downsampled data.
pub fn classify_map_downsampled(y: &Vector, alpha: f64, dict: &Dictionary, plan: &DownsamplePlan, g: &SymMatrix) -> Result<usize> {
    MahalanobisDetector::from_dictionary(dict, plan, g)?.classify(y, alpha)
}

/// Negative log-likelihood of `y` under the equal-weight mixture null.
pub fn glrt_anomaly_score(y: &Vector, alpha: f64, dict: &Dictionary, plan: &DownsamplePlan, g: &SymMatrix) -> Result<f64> {
    let m = dict.len();
    let columns = dict
        .targets()
        .iter()
        .map(|f| downsample(f, plan))
        .collect::<Result<Vec<_>>>()?;
    MahalanobisDetector::new(&columns, vec![-(m as f64).ln(); m], g)?.glrt_score(y, alpha)
}

/// Draws downsampled measurements for a scene.
#[derive(Debug, Clone)]
pub struct DownsampleObserver {
    plan: DownsamplePlan,
    d: Matrix,
    d_sqrt: Matrix,
    sigma: f64,
    covariance: SymMatrix,
}

impl DownsampleObserver {
    pub fn new(plan: DownsamplePlan, bg: &BackgroundModel) -> Result<Self> {
        if bg.dim() != plan.n {
            return Err(shape("background and plan disagree on N"));
        }
        let d = downsample_matrix(&plan);
        let c = plan.scale;
        let cov_down = &d * bg.covariance().as_matrix() * d.transpose() / (c * c);
        let covariance = SymMatrix::symmetrize(cov_down + Matrix::identity(plan.k, plan.k) * bg.sensor_variance())?;
        let d_sqrt = &d * bg.covariance_sqrt() / c;
        Ok(Self {
            plan,
            d,
            d_sqrt,
            sigma: bg.sigma(),
            covariance,
        })
    }

    pub fn plan(&self) -> &DownsamplePlan {
        &self.plan
    }

    /// `G = D Sigma_b D^T / c^2 + s2 I`.
    pub fn noise_covariance(&self) -> &SymMatrix {
        &self.covariance
    }

    /// Strength seen by the detector for true strength `alpha`.
    pub fn effective_alpha(&self, alpha: f64) -> f64 {
        alpha / self.plan.scale
    }

    /// Mean-removed measurements, location `i` using substream `i`.
    pub fn observe(&self, scene: &Scene, stream: &RngStream) -> Vec<Vector> {
        let c = self.plan.scale;
        scene
            .true_signals
            .iter()
            .zip(&scene.alphas)
            .enumerate()
            .map(|(i, (f, &alpha))| {
                let mut rng = stream.substream(i as u64).rng();
                let g = standard_normal_vector(&mut rng, self.plan.n);
                let w = standard_normal_vector(&mut rng, self.plan.k);
                &self.d * f * (alpha / c) + &self.d_sqrt * g + w * self.sigma
            })
            .collect()
    }
}
