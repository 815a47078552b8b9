//! Dictionary signal detection.
//!
//! Each whitened measurement `y = alpha A f + n` is classified by maximum a
//! posteriori over the dictionary; declaring "not target j" at every location
//! whose MAP label differs from `j` gives the empirical pFDR for target `j`.
//! The module also evaluates the closed-form error and pFDR bounds and the
//! measurement count they call for.

use serde::Serialize;

use crate::error::{invalid, shape, Error, Result};
use crate::model::{Dictionary, Label, Scene};
use crate::numerics::{Matrix, Vector};

const MAX_MEASUREMENTS: usize = 10_000_000;

/// MAP label for one location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapDecision {
    pub location: usize,
    pub label: usize,
    pub log_posteriors: Vec<f64>,
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Projected targets `A f` with log priors, reused across locations.
#[derive(Debug, Clone)]
pub struct ProjectedDictionary {
    columns: Vec<Vector>,
    log_priors: Vec<f64>,
}

impl ProjectedDictionary {
    pub fn new(a: &Matrix, dict: &Dictionary) -> Result<Self> {
        if a.ncols() != dict.dim() {
            return Err(shape(format!(
                "A has {} columns, dictionary targets have length {}",
                a.ncols(),
                dict.dim()
            )));
        }
        Ok(Self {
            columns: dict.targets().iter().map(|f| a * f).collect(),
            log_priors: dict.log_priors(),
        })
    }

    /// Same projected targets with equal priors.
    pub fn from_columns(columns: Vec<Vector>) -> Self {
        let lp = -(columns.len() as f64).ln();
        let log_priors = vec![lp; columns.len()];
        Self { columns, log_priors }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn k(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn columns(&self) -> &[Vector] {
        &self.columns
    }

    fn check(&self, y: &Vector) -> Result<()> {
        if y.len() != self.k() {
            return Err(shape(format!("measurement has length {}, expected {}", y.len(), self.k())));
        }
        Ok(())
    }

    /// `||y - alpha A f_l||^2` for every target.
    pub fn squared_residuals(&self, y: &Vector, alpha: f64) -> Result<Vec<f64>> {
        self.check(y)?;
        Ok(self
            .columns
            .iter()
            .map(|g| y.iter().zip(g.iter()).map(|(yi, gi)| (yi - alpha * gi).powi(2)).sum())
            .collect())
    }

    pub fn log_posteriors(&self, y: &Vector, alpha: f64) -> Result<Vec<f64>> {
        Ok(self
            .squared_residuals(y, alpha)?
            .into_iter()
            .zip(&self.log_priors)
            .map(|(r, lp)| -0.5 * r + lp)
            .collect())
    }

    pub fn decide(&self, location: usize, y: &Vector, alpha: f64) -> Result<MapDecision> {
        let log_posteriors = self.log_posteriors(y, alpha)?;
        Ok(MapDecision {
            location,
            label: argmax(&log_posteriors),
            log_posteriors,
        })
    }

    /// `min_l ||y - alpha A f_l||`.
    pub fn min_distance(&self, y: &Vector, alpha: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(invalid("empty dictionary"));
        }
        Ok(self
            .squared_residuals(y, alpha)?
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .sqrt())
    }
}

/// MAP label of `y` under `y = alpha A f + N(0, I)`.
pub fn classify_map(y: &Vector, alpha: f64, a: &Matrix, dict: &Dictionary) -> Result<MapDecision> {
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha must be >= 0, got {alpha}")));
    }
    ProjectedDictionary::new(a, dict)?.decide(0, y, alpha)
}

/// `sqrt(max(||y||^2 - K, 0))`.
pub fn estimate_alpha_mle(y: &Vector) -> f64 {
    (y.norm_squared() - y.len() as f64).max(0.0).sqrt()
}

/// Missed-target count over declared-nontarget count for target `j`, or
/// `None` when no location was declared nontarget.
pub fn empirical_pfdr(decisions: &[MapDecision], scene: &Scene, target_j: usize) -> Option<f64> {
    let labels: Vec<usize> = decisions.iter().map(|d| d.label).collect();
    let (missed, declared) = pfdr_counts(&labels, &scene.labels, target_j);
    (declared > 0).then(|| missed as f64 / declared as f64)
}

fn pfdr_counts(map_labels: &[usize], truth: &[Label], j: usize) -> (usize, usize) {
    let mut missed = 0;
    let mut declared = 0;
    for (&l, t) in map_labels.iter().zip(truth) {
        if l != j {
            declared += 1;
            if *t == Label::Target(j) {
                missed += 1;
            }
        }
    }
    (missed, declared)
}

/// Per-target empirical pFDR for one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfdrReport {
    pub per_target_pfdr: Vec<Option<f64>>,
    pub worst_case: Option<f64>,
    /// `(missed, declared_nontarget)` per target.
    pub counts: Vec<(usize, usize)>,
}

impl PfdrReport {
    pub fn from_labels(map_labels: &[usize], truth: &[Label], m: usize) -> Result<Self> {
        if map_labels.len() != truth.len() {
            return Err(shape(format!(
                "{} decisions for {} locations",
                map_labels.len(),
                truth.len()
            )));
        }
        let counts: Vec<(usize, usize)> = (0..m).map(|j| pfdr_counts(map_labels, truth, j)).collect();
        let per_target_pfdr: Vec<Option<f64>> = counts
            .iter()
            .map(|&(missed, declared)| (declared > 0).then(|| missed as f64 / declared as f64))
            .collect();
        let worst_case = per_target_pfdr.iter().flatten().copied().reduce(f64::max);
        Ok(Self {
            per_target_pfdr,
            worst_case,
            counts,
        })
    }

    pub fn from_decisions(decisions: &[MapDecision], scene: &Scene, m: usize) -> Result<Self> {
        let labels: Vec<usize> = decisions.iter().map(|d| d.label).collect();
        Self::from_labels(&labels, &scene.labels, m)
    }
}

/// `min(1, pe / (1 - p_max - pe))`, or 1 when the denominator is not positive.
pub fn pfdr_bound_from_pe(pe_max: f64, p_max: f64) -> f64 {
    let denom = 1.0 - p_max - pe_max;
    if denom <= 0.0 {
        1.0
    } else {
        (pe_max / denom).clamp(0.0, 1.0)
    }
}

/// Misclassification bound `(1-p_min)/p_min (1 + a^2 d^2 / (4 K s2))^{-K/2}`,
/// clamped to 1.
pub fn pe_bound_gaussian(k: usize, alpha: f64, d_min: f64, p_min: f64, sigma2: f64) -> f64 {
    let kf = k as f64;
    let log = ((1.0 - p_min) / p_min).ln() - 0.5 * kf * (alpha * alpha * d_min * d_min / (4.0 * kf * sigma2)).ln_1p();
    log.exp().min(1.0)
}

/// Inputs of the achievable pFDR bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub k: usize,
    pub n: usize,
    pub alpha_min: f64,
    pub d_min: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub epsilon: f64,
    /// Largest background eigenvalue, checked against the weak-background
    /// condition.
    pub lambda_max: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(invalid("K and N must be positive"));
        }
        if !(self.p_min > 0.0 && self.p_min <= self.p_max && self.p_max < 1.0) {
            return Err(invalid(format!(
                "need 0 < p_min <= p_max < 1, got {} and {}",
                self.p_min, self.p_max
            )));
        }
        if !(self.alpha_min > 0.0 && self.d_min > 0.0) {
            return Err(invalid("alpha_min and d_min must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 - self.p_max) {
            return Err(invalid(format!(
                "epsilon must lie in (0, 1 - p_max), got {}",
                self.epsilon
            )));
        }
        if !(self.lambda_max >= 0.0) {
            return Err(invalid("lambda_max must be >= 0"));
        }
        Ok(())
    }
}

/// Which hypotheses of the achievable bound hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConditions {
    pub positive_prob: bool,
    pub weak_background: bool,
    pub k_bound: bool,
    pub weak_background_threshold: f64,
}

impl BoundConditions {
    pub fn all(&self) -> bool {
        self.positive_prob && self.weak_background && self.k_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AchievableBound {
    pub value: f64,
    pub conditions: BoundConditions,
}

/// `2 ln(2 (1 - p_min) / (p_min (1 - p_max)))`, the numerator of the
/// measurement-count condition.
fn k_bound_numerator(p_min: f64, p_max: f64) -> f64 {
    2.0 * (2.0 * (1.0 - p_min) / (p_min * (1.0 - p_max))).ln()
}

fn k_bound_holds(k: usize, c: f64, numerator: f64) -> bool {
    let kf = k as f64;
    kf * (c / kf).ln_1p() > numerator
}

/// Worst-case pFDR bound achievable with a Gaussian sensing matrix, with the
/// status of its three hypotheses. The value is clamped to `[0, 1]`.
pub fn achievable_pfdr_bound(b: &BoundInputs) -> Result<AchievableBound> {
    b.validate()?;
    let kf = b.k as f64;
    let nf = b.n as f64;
    let snr = b.alpha_min * b.alpha_min * b.d_min * b.d_min / (4.0 * kf);
    let log_growth = 0.5 * kf * snr.ln_1p();
    let tail = (-(kf + nf) * b.epsilon * b.epsilon / 2.0).exp();

    let ratio = (1.0 - b.p_max) / (1.0 - b.p_min);
    let bracket = ratio * log_growth.exp() - 1.0 / b.p_min;
    let first = if bracket <= 0.0 { f64::INFINITY } else { 1.0 / (b.p_min * bracket) };
    let second = 2.0 * (1.0 - b.p_max) / (b.epsilon * b.epsilon) * tail;
    let value = if first.is_finite() { (first + second).clamp(0.0, 1.0) } else { 1.0 };

    let positive_prob =
        1.0 - b.p_max - b.epsilon >= (1.0 - b.p_min) / b.p_min * (-log_growth).exp() + 2.0 * tail;
    let weak_background_threshold = 1.0 / ((1.0 + b.epsilon).powi(2) * ((nf / kf).sqrt() + 1.0).powi(2));
    let conditions = BoundConditions {
        positive_prob,
        weak_background: b.lambda_max < weak_background_threshold,
        k_bound: k_bound_holds(b.k, b.alpha_min * b.alpha_min * b.d_min * b.d_min / 4.0, k_bound_numerator(b.p_min, b.p_max)),
        weak_background_threshold,
    };
    Ok(AchievableBound { value, conditions })
}

/// Smallest `K` with `K > 2 ln(2(1-p_min)/(p_min(1-p_max))) / ln(1 + a^2 d^2 / 4K)`.
///
/// `K ln(1 + c/K)` increases toward `c = a^2 d^2 / 4`, so no `K` exists when
/// `c` does not exceed the numerator; otherwise the answer is found by
/// bisection on the monotone condition.
pub fn min_measurements(alpha_min: f64, d_min: f64, p_min: f64, p_max: f64) -> Result<usize> {
    if !(alpha_min > 0.0 && d_min > 0.0) {
        return Err(invalid("alpha_min and d_min must be positive"));
    }
    if !(p_min > 0.0 && p_min <= p_max && p_max < 1.0) {
        return Err(invalid(format!("need 0 < p_min <= p_max < 1, got {p_min} and {p_max}")));
    }
    let c = alpha_min * alpha_min * d_min * d_min / 4.0;
    let numerator = k_bound_numerator(p_min, p_max);
    if c <= numerator || !k_bound_holds(MAX_MEASUREMENTS, c, numerator) {
        return Err(Error::Infeasible { cap: MAX_MEASUREMENTS });
    }
    if k_bound_holds(1, c, numerator) {
        return Ok(1);
    }
    let (mut lo, mut hi) = (1usize, MAX_MEASUREMENTS);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if k_bound_holds(mid, c, numerator) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// True when `K` satisfies the measurement-count condition.
pub fn satisfies_k_bound(k: usize, alpha_min: f64, d_min: f64, p_min: f64, p_max: f64) -> bool {
    k > 0 && k_bound_holds(k, alpha_min * alpha_min * d_min * d_min / 4.0, k_bound_numerator(p_min, p_max))
}

/// Two-step classification against finite manifolds: the sample of each
/// manifold nearest to `alpha A f` under `y` forms a dictionary, which is
/// then classified with equal priors using the independent measurement
/// `y_tilde`.
pub fn classify_manifold_two_step(
    y: &Vector,
    y_tilde: &Vector,
    alpha: f64,
    a: &Matrix,
    manifolds: &[Vec<Vector>],
) -> Result<usize> {
    if manifolds.is_empty() {
        return Err(invalid("no manifolds given"));
    }
    let mut chosen = Vec::with_capacity(manifolds.len());
    for (l, samples) in manifolds.iter().enumerate() {
        if samples.is_empty() {
            return Err(invalid(format!("manifold {l} is empty")));
        }
        if samples.iter().any(|f| f.len() != a.ncols()) {
            return Err(shape(format!("manifold {l} has samples of the wrong length")));
        }
        let projected = ProjectedDictionary::from_columns(samples.iter().map(|f| a * f).collect());
        let residuals = projected.squared_residuals(y, alpha)?;
        let nearest = argmax(&residuals.iter().map(|r| -r).collect::<Vec<_>>());
        chosen.push(projected.columns[nearest].clone());
    }
    let induced = ProjectedDictionary::from_columns(chosen);
    Ok(induced.decide(0, y_tilde, alpha)?.label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_matrix, standard_normal_vector, RngStream};

    fn e(n: usize, i: usize) -> Vector {
        let mut v = Vector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn random_dict(m: usize, n: usize, priors: Option<Vec<f64>>, seed: u64) -> Dictionary {
        let mut rng = RngStream::new(seed).rng();
        let targets = (0..m).map(|_| standard_normal_vector(&mut rng, n).normalize()).collect();
        match priors {
            Some(p) => Dictionary::new(targets, p).unwrap(),
            None => Dictionary::uniform(targets).unwrap(),
        }
    }

    #[test]
    fn zero_residual_match() {
        let d = Dictionary::uniform(vec![e(3, 0), e(3, 1), e(3, 2)]).unwrap();
        let y = e(3, 1) * 4.0;
        assert_eq!(classify_map(&y, 4.0, &Matrix::identity(3, 3), &d).unwrap().label, 1);
    }

    #[test]
    fn prior_breaks_equidistance() {
        let d = Dictionary::new(vec![e(2, 0), e(2, 1)], vec![0.1, 0.9]).unwrap();
        let y = Vector::from_vec(vec![1.0, 1.0]);
        assert_eq!(classify_map(&y, 1.0, &Matrix::identity(2, 2), &d).unwrap().label, 1);
        let flat = Dictionary::uniform(vec![e(2, 0), e(2, 1)]).unwrap();
        assert_eq!(classify_map(&y, 1.0, &Matrix::identity(2, 2), &flat).unwrap().label, 0);
    }

    // Pairwise posterior comparison: l wins iff it is at least as probable
    // as every other target and strictly more probable than every earlier one.
    #[test]
    fn matches_pairwise_oracle() {
        let priors = vec![0.1, 0.2, 0.3, 0.4];
        for seed in 0..200 {
            let d = random_dict(4, 10, Some(priors.clone()), seed);
            let a = gaussian_matrix(8, 10, 1.0 / 8.0, &RngStream::with_stream(seed, 1));
            let mut rng = RngStream::with_stream(seed, 2).rng();
            let y = standard_normal_vector(&mut rng, 8) * 2.0;
            let alpha = 1.5;
            let post = |l: usize| {
                let r = &y - &a * d.target(l) * alpha;
                -0.5 * r.norm_squared() + priors[l].ln()
            };
            let oracle = (0..4)
                .find(|&l| (0..4).all(|o| if o < l { post(l) > post(o) } else { post(l) >= post(o) }))
                .unwrap();
            assert_eq!(classify_map(&y, alpha, &a, &d).unwrap().label, oracle);
        }
    }

    #[test]
    fn label_invariant_under_positive_scaling() {
        for seed in 0..50 {
            let d = random_dict(5, 12, None, seed);
            let a = gaussian_matrix(6, 12, 1.0 / 6.0, &RngStream::with_stream(seed, 1));
            let y = standard_normal_vector(&mut RngStream::with_stream(seed, 2).rng(), 6);
            let base = classify_map(&y, 1.3, &a, &d).unwrap();
            for s in [0.1, 3.0, 17.0] {
                assert_eq!(classify_map(&(&y * s), 1.3 * s, &a, &d).unwrap().label, base.label);
            }
        }
    }

    #[test]
    fn mle_values() {
        let mut y = Vector::zeros(100);
        y[0] = 150f64.sqrt();
        assert!((estimate_alpha_mle(&y) - 50f64.sqrt()).abs() < 1e-12);
        y[0] = 50f64.sqrt();
        assert_eq!(estimate_alpha_mle(&y), 0.0);
    }

    fn scene_with(labels: Vec<Label>) -> Scene {
        let n = labels.len();
        Scene {
            true_signals: vec![Vector::zeros(1); n],
            alphas: vec![1.0; n],
            anomaly_mask: labels.iter().map(|l| l.is_anomaly()).collect(),
            labels,
        }
    }

    fn decisions(labels: &[usize]) -> Vec<MapDecision> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| MapDecision {
                location: i,
                label: l,
                log_posteriors: vec![],
            })
            .collect()
    }

    #[test]
    fn pfdr_counts_by_hand() {
        let scene = scene_with(vec![Label::Target(0), Label::Target(0), Label::Target(1)]);
        let d = decisions(&[0, 1, 1]);
        assert_eq!(empirical_pfdr(&d, &scene, 0), Some(0.5));
        assert_eq!(empirical_pfdr(&d, &scene, 1), Some(0.0));

        let right = decisions(&[0, 0, 1]);
        assert_eq!(empirical_pfdr(&right, &scene, 0), Some(0.0));
        assert_eq!(empirical_pfdr(&right, &scene, 1), Some(0.0));

        let constant = decisions(&[1, 1, 1]);
        assert_eq!(empirical_pfdr(&constant, &scene, 1), None);

        let report = PfdrReport::from_decisions(&d, &scene, 3).unwrap();
        assert_eq!(report.worst_case, Some(0.5));
        assert_eq!(report.counts[0], (1, 2));
    }

    #[test]
    fn pfdr_from_pe() {
        assert_eq!(pfdr_bound_from_pe(0.0, 0.3), 0.0);
        assert_eq!(pfdr_bound_from_pe(0.7, 0.3), 1.0);
        assert_eq!(pfdr_bound_from_pe(0.9, 0.3), 1.0);
        assert!((pfdr_bound_from_pe(0.1, 0.5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pe_bound_limits() {
        assert_eq!(pe_bound_gaussian(10, 3.0, 0.0, 0.2, 1.0), 1.0);
        let p = 0.7;
        assert!((pe_bound_gaussian(10, 3.0, 0.0, p, 1.0) - 0.3 / 0.7).abs() < 1e-15);
        assert!(pe_bound_gaussian(16, 1e6, 1.0, 0.5, 1.0) < 1e-12);
    }

    #[test]
    fn pe_bound_decreases_in_k() {
        for snr in [1.0f64, 10.0, 100.0] {
            let mut prev = f64::INFINITY;
            for k in 1..200 {
                let b = pe_bound_gaussian(k, snr.sqrt(), 1.0, 0.3, 1.0);
                if b < 1.0 && prev < 1.0 {
                    assert!(b < prev);
                }
                prev = b;
            }
        }
    }

    fn inputs(k: usize, alpha_min: f64, p_min: f64, p_max: f64) -> BoundInputs {
        BoundInputs {
            k,
            n: 106,
            alpha_min,
            d_min: 0.5,
            p_min,
            p_max,
            epsilon: 0.1,
            lambda_max: 0.0,
        }
    }

    #[test]
    fn achievable_bound_equal_priors_form() {
        let m = 4.0;
        let b = inputs(30, 20.0, 0.25, 0.25);
        let got = achievable_pfdr_bound(&b).unwrap().value;
        let g = (1.0 + 400.0 * 0.25 / 120.0f64).powf(15.0);
        let first = 4.0 / (g - m);
        let second = 2.0 * 0.75 / 0.01 * (-(136.0 * 0.01) / 2.0f64).exp();
        assert!((got - (first + second).min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn achievable_bound_monotone_in_alpha() {
        let mut prev = f64::INFINITY;
        for alpha in [1.0, 2.0, 4.0, 8.0] {
            let v = achievable_pfdr_bound(&inputs(60, alpha, 0.1, 0.3)).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn k_condition_flag() {
        let k = min_measurements(20.0, 0.5, 0.1, 0.3).unwrap();
        assert!(!achievable_pfdr_bound(&inputs(k - 1, 20.0, 0.1, 0.3)).unwrap().conditions.k_bound);
        assert!(achievable_pfdr_bound(&inputs(k, 20.0, 0.1, 0.3)).unwrap().conditions.k_bound);
    }

    #[test]
    fn min_measurements_properties() {
        // ample separation with equal priors needs only a handful of rows
        assert!(min_measurements(1e3, 1.0, 0.5, 0.5).unwrap() <= 3);
        let mut prev = usize::MAX;
        for alpha in [12.0, 24.0, 48.0, 96.0, 192.0] {
            let k = min_measurements(alpha, 0.5, 0.05, 0.15).unwrap();
            assert!(k <= prev);
            prev = k;
        }
        assert!(matches!(min_measurements(0.5, 0.1, 0.05, 0.15), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn min_measurements_agrees_with_scan() {
        for (alpha, d) in [(20.0, 0.5), (40.0, 0.3), (100.0, 0.1)] {
            let c = alpha * alpha * d * d / 4.0;
            let num = 2.0 * (2.0 * 0.9 / (0.1 * 0.8f64)).ln();
            let scan = (1..).find(|&k| k as f64 * (1.0 + c / k as f64).ln() > num).unwrap();
            assert_eq!(min_measurements(alpha, d, 0.1, 0.2).unwrap(), scan);
        }
    }

    #[test]
    fn two_step_reductions() {
        let d = random_dict(3, 8, None, 4);
        let a = gaussian_matrix(5, 8, 0.2, &RngStream::new(1));
        let singletons: Vec<Vec<Vector>> = d.targets().iter().map(|f| vec![f.clone()]).collect();
        for seed in 0..100 {
            let y = standard_normal_vector(&mut RngStream::new(seed).rng(), 5) * 2.0;
            assert_eq!(
                classify_manifold_two_step(&y, &y, 1.7, &a, &singletons).unwrap(),
                classify_map(&y, 1.7, &a, &d).unwrap().label
            );
        }
        let manifolds = vec![
            vec![d.target(0).clone()],
            vec![d.target(1).clone(), d.target(2).clone()],
        ];
        let y = &a * d.target(2) * 3.0;
        assert_eq!(classify_manifold_two_step(&y, &y, 3.0, &a, &manifolds).unwrap(), 1);
        assert!(classify_manifold_two_step(&y, &y, 3.0, &a, &[vec![]]).is_err());
    }

    #[test]
    fn two_step_matches_exhaustive() {
        for seed in 0..50 {
            let mut rng = RngStream::new(seed).rng();
            let manifolds: Vec<Vec<Vector>> = (0..3)
                .map(|l| (0..(3 + l * 3)).map(|_| standard_normal_vector(&mut rng, 6).normalize()).collect())
                .collect();
            let a = gaussian_matrix(4, 6, 0.25, &RngStream::with_stream(seed, 9));
            let y = standard_normal_vector(&mut rng, 4);
            let yt = standard_normal_vector(&mut rng, 4);
            let alpha = 1.1;
            let mut best = (f64::INFINITY, 0);
            for (l, samples) in manifolds.iter().enumerate() {
                let mut near = (f64::INFINITY, 0);
                for (s, f) in samples.iter().enumerate() {
                    let r = (&y - &a * f * alpha).norm();
                    if r < near.0 {
                        near = (r, s);
                    }
                }
                let r = (&yt - &a * &samples[near.1] * alpha).norm();
                if r < best.0 {
                    best = (r, l);
                }
            }
            assert_eq!(classify_manifold_two_step(&y, &yt, alpha, &a, &manifolds).unwrap(), best.1);
        }
    }
}
