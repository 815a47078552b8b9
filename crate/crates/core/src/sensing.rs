//! Sensing matrices and the whitening transform.
//!
//! Given a target operator `A` and background statistics, the designed
//! sensing matrix is `Phi = s B^{-1/2} A` with `B = I - A Sigma_b A^T`. Its
//! whitening filter `C = (Phi Sigma_b Phi^T + s^2 I)^{-1/2}` then satisfies
//! `C Phi = A`, so whitened measurements follow `y = alpha A f + n` with
//! `n ~ N(0, I)`. The construction exists only while
//! `lambda_max(Sigma_b) < 1 / ||A||^2`.

use serde::Serialize;

use crate::error::{invalid, shape, Error, Result};
use crate::model::BackgroundModel;
use crate::numerics::{
    gaussian_matrix, inv_sqrt_sym_default, spectral_norm, Matrix, RngStream, SymMatrix, Vector,
};

/// How the sensing matrix of a plan was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Designed,
    RandomPhi,
    Identity,
}

/// Outcome of the background tolerance check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceCheck {
    pub ok: bool,
    pub lambda_max: f64,
    pub threshold: f64,
}

/// Extreme distortion ratios `||A(u - v)|| / ||u - v||` over a vector set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistancePreservation {
    pub ok: bool,
    pub worst_ratio_low: f64,
    pub worst_ratio_high: f64,
}

/// Sensing matrix, whitening filter and the background they were built for.
#[derive(Debug, Clone)]
pub struct SensingPlan {
    a: Matrix,
    phi: Matrix,
    whitener: SymMatrix,
    background: BackgroundModel,
    phi_mean: Vector,
    epsilon: Option<f64>,
    construction: Construction,
}

/// Compares `lambda_max(Sigma_b)` with `1 / ||A||^2`.
pub fn check_background_tolerance(a: &Matrix, bg: &BackgroundModel) -> Result<ToleranceCheck> {
    if a.ncols() != bg.dim() {
        return Err(shape(format!(
            "A has {} columns, background has dimension {}",
            a.ncols(),
            bg.dim()
        )));
    }
    let norm = spectral_norm(a)?;
    let threshold = if norm == 0.0 { f64::INFINITY } else { 1.0 / (norm * norm) };
    let lambda_max = bg.lambda_max();
    Ok(ToleranceCheck {
        ok: lambda_max < threshold,
        lambda_max,
        threshold,
    })
}

fn noise_covariance(phi: &Matrix, bg: &BackgroundModel) -> Result<SymMatrix> {
    let k = phi.nrows();
    let cov = phi * bg.covariance().as_matrix() * phi.transpose() + Matrix::identity(k, k) * bg.sensor_variance();
    SymMatrix::symmetrize(cov)
}

/// Builds `Phi = s B^{-1/2} A` and its whitening filter.
pub fn build_designed_plan(a: &Matrix, bg: &BackgroundModel) -> Result<SensingPlan> {
    let check = check_background_tolerance(a, bg)?;
    if !check.ok {
        return Err(Error::BackgroundTooStrong {
            lambda_max: check.lambda_max,
            threshold: check.threshold,
        });
    }
    let k = a.nrows();
    let b = Matrix::identity(k, k) - a * bg.covariance().as_matrix() * a.transpose();
    let b_inv_sqrt = inv_sqrt_sym_default(&SymMatrix::symmetrize(b)?)?;
    let phi = b_inv_sqrt.as_matrix() * a * bg.sigma();
    let whitener = inv_sqrt_sym_default(&noise_covariance(&phi, bg)?)?;
    Ok(SensingPlan::assemble(a.clone(), phi, whitener, bg.clone(), Construction::Designed))
}

impl SensingPlan {
    fn assemble(a: Matrix, phi: Matrix, whitener: SymMatrix, background: BackgroundModel, construction: Construction) -> Self {
        let phi_mean = &phi * background.mean();
        Self {
            a,
            phi,
            whitener,
            background,
            phi_mean,
            epsilon: None,
            construction,
        }
    }

    /// Plan for an arbitrary `Phi`: the whitening filter is computed from the
    /// background and `A` is defined as `C Phi`.
    pub fn from_phi(phi: Matrix, bg: &BackgroundModel, construction: Construction) -> Result<Self> {
        if phi.ncols() != bg.dim() {
            return Err(shape(format!(
                "Phi has {} columns, background has dimension {}",
                phi.ncols(),
                bg.dim()
            )));
        }
        let whitener = inv_sqrt_sym_default(&noise_covariance(&phi, bg)?)?;
        let a = whitener.as_matrix() * &phi;
        Ok(Self::assemble(a, phi, whitener, bg.clone(), construction))
    }

    /// `Phi` with i.i.d. `N(0, 1/K)` entries, not adapted to the background.
    pub fn random_phi(k: usize, bg: &BackgroundModel, stream: &RngStream) -> Result<Self> {
        if k == 0 {
            return Err(invalid("K must be positive"));
        }
        let phi = gaussian_matrix(k, bg.dim(), 1.0 / k as f64, stream);
        Self::from_phi(phi, bg, Construction::RandomPhi)
    }

    /// Direct observation `y = alpha f + n` with unit white noise.
    pub fn identity(n: usize) -> Result<Self> {
        let bg = BackgroundModel::sensor_only(n, 1.0)?;
        Ok(Self::assemble(
            Matrix::identity(n, n),
            Matrix::identity(n, n),
            SymMatrix::identity(n),
            bg,
            Construction::Identity,
        ))
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn whitener(&self) -> &SymMatrix {
        &self.whitener
    }

    pub fn background(&self) -> &BackgroundModel {
        &self.background
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Number of measurements `K`.
    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    /// Signal dimension `N`.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Records the distortion level `epsilon` after checking `A` against `v`.
    pub fn with_epsilon(mut self, v: &[Vector], epsilon: f64) -> Result<(Self, DistancePreservation)> {
        let check = verify_distance_preservation(&self.a, v, epsilon)?;
        if check.ok {
            self.epsilon = Some(epsilon);
        }
        Ok((self, check))
    }

    /// `C (z - Phi mu_b)` using the background mean of the plan.
    pub fn whiten(&self, z: &Vector) -> Result<Vector> {
        whiten(self, z, self.background.mean())
    }

    /// `C z` for a measurement whose background mean is already removed.
    pub fn whiten_centered(&self, z: &Vector) -> Vector {
        self.whitener.as_matrix() * z
    }

    /// `Phi mu_b`.
    pub fn phi_mean(&self) -> &Vector {
        &self.phi_mean
    }

    pub fn to_json_string(&self) -> Result<String> {
        #[derive(Serialize)]
        struct PlanFile {
            k: usize,
            n: usize,
            construction: Construction,
            sensor_variance: f64,
            lambda_max: f64,
            epsilon: Option<f64>,
            a: Vec<Vec<f64>>,
            phi: Vec<Vec<f64>>,
            whitener: Vec<Vec<f64>>,
        }
        let rows = |m: &Matrix| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        let file = PlanFile {
            k: self.k(),
            n: self.n(),
            construction: self.construction,
            sensor_variance: self.background.sensor_variance(),
            lambda_max: self.background.lambda_max(),
            epsilon: self.epsilon,
            a: rows(&self.a),
            phi: rows(&self.phi),
            whitener: rows(self.whitener.as_matrix()),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// `C (z - Phi mu_b)`.
pub fn whiten(plan: &SensingPlan, z: &Vector, mu_b: &Vector) -> Result<Vector> {
    if z.len() != plan.k() || mu_b.len() != plan.n() {
        return Err(shape(format!(
            "expected z of length {} and mean of length {}, got {} and {}",
            plan.k(),
            plan.n(),
            z.len(),
            mu_b.len()
        )));
    }
    Ok(plan.whitener.as_matrix() * (z - &plan.phi * mu_b))
}

/// Checks `(1-e)||u-v|| <= ||A(u-v)|| <= (1+e)||u-v||` over all pairs of `v`.
pub fn verify_distance_preservation(a: &Matrix, v: &[Vector], epsilon: f64) -> Result<DistancePreservation> {
    if v.len() < 2 {
        return Err(invalid("distance preservation needs at least two vectors"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let images: Vec<Vector> = v
        .iter()
        .map(|u| {
            if u.len() != a.ncols() {
                Err(shape(format!("vector of length {} for A with {} columns", u.len(), a.ncols())))
            } else {
                Ok(a * u)
            }
        })
        .collect::<Result<_>>()?;
    let mut low = f64::INFINITY;
    let mut high = 0.0f64;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let d = (&v[i] - &v[j]).norm();
            if d == 0.0 {
                continue;
            }
            let r = (&images[i] - &images[j]).norm() / d;
            low = low.min(r);
            high = high.max(r);
        }
    }
    Ok(DistancePreservation {
        ok: low >= 1.0 - epsilon && high <= 1.0 + epsilon,
        worst_ratio_low: low,
        worst_ratio_high: high,
    })
}

/// `c(e) = e^2/16 - e^3/48` in the random-projection failure bound.
pub fn jl_constant(epsilon: f64) -> f64 {
    epsilon * epsilon / 16.0 - epsilon.powi(3) / 48.0
}

/// Upper bound `2 |V|^2 exp(-K c(e))` on the probability that a Gaussian
/// `A` with `K` rows distorts some pair of `n_points` vectors by more than
/// `e`, clamped to 1.
pub fn jl_failure_bound(n_points: usize, k: usize, epsilon: f64) -> f64 {
    let v = n_points as f64;
    (2.0 * v * v * (-(k as f64) * jl_constant(epsilon)).exp()).min(1.0)
}
