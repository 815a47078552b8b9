//! Statistical and structural properties of the observation model, the
//! sensing plans and the detectors, each checked against an independent
//! computation.

use compdet::asd::{anomaly_statistic, pvalue_upper_bound, threshold_rejections};
use compdet::baselines::{DownsampleObserver, DownsamplePlan, MahalanobisDetector};
use compdet::dsd::{classify_manifold_two_step, classify_map};
use compdet::model::synthetic::{perturb_at_distance, smooth_spectra, synthetic_dictionary};
use compdet::model::{generate_observations, generate_scene, AlphaLaw, AnomalySpec, BackgroundModel, Dictionary, Label};
use compdet::numerics::{gaussian_matrix, spectral_norm, standard_normal_vector};
use compdet::sensing::{
    build_designed_plan, check_background_tolerance, jl_failure_bound, verify_distance_preservation, SensingPlan,
};
use compdet::{Matrix, RngStream, SymMatrix, Vector};
use rand::Rng;

fn small_setup(seed: u64) -> (Dictionary, BackgroundModel, SensingPlan) {
    let n = 8;
    let dict = synthetic_dictionary(n, &[0.2, 0.3, 0.5], None, &RngStream::new(seed)).unwrap();
    let mean = Vector::from_fn(n, |i, _| 0.3 * i as f64);
    let bg = BackgroundModel::ar1(n, 0.05, 0.6, mean, 0.7).unwrap();
    let a = gaussian_matrix(4, n, 0.25, &RngStream::new(seed + 1));
    let plan = build_designed_plan(&a, &bg).unwrap();
    (dict, bg, plan)
}

/// Empirical covariance of `samples` compared entrywise with `expected`,
/// allowing five standard errors of the Gaussian sample covariance.
fn assert_covariance(samples: &[Vector], expected: &Matrix) {
    let m = samples.len() as f64;
    let k = expected.nrows();
    let mut cov = Matrix::zeros(k, k);
    for s in samples {
        cov += s * s.transpose();
    }
    cov /= m;
    for i in 0..k {
        for j in 0..k {
            let se = ((expected[(i, i)] * expected[(j, j)] + expected[(i, j)].powi(2)) / m).sqrt();
            let diff = (cov[(i, j)] - expected[(i, j)]).abs();
            assert!(diff <= 5.0 * se, "entry ({i},{j}): {} vs {} (se {se})", cov[(i, j)], expected[(i, j)]);
        }
    }
}

#[test]
fn raw_noise_has_projected_covariance() {
    let (dict, bg, plan) = small_setup(11);
    let scene = generate_scene(&dict, 20_000, AlphaLaw::Uniform { low: 1.0, high: 4.0 }, 4, None, &RngStream::new(2)).unwrap();
    let obs = generate_observations(&scene, &plan, &RngStream::new(3)).unwrap();
    let phi = plan.phi();
    let noise: Vec<Vector> = obs
        .raw
        .iter()
        .zip(&scene.true_signals)
        .zip(&scene.alphas)
        .map(|((z, f), &a)| z - phi * f * a - phi * bg.mean())
        .collect();
    let expected = phi * bg.covariance().as_matrix() * phi.transpose() + Matrix::identity(4, 4) * bg.sensor_variance();
    assert_covariance(&noise, &expected);
}

#[test]
fn whitened_noise_is_white() {
    let (dict, _, plan) = small_setup(12);
    let scene = generate_scene(&dict, 20_000, AlphaLaw::Constant { value: 2.0 }, 4, None, &RngStream::new(4)).unwrap();
    let obs = generate_observations(&scene, &plan, &RngStream::new(5)).unwrap();
    let noise: Vec<Vector> = obs
        .whitened
        .iter()
        .zip(&scene.true_signals)
        .map(|(y, f)| y - plan.a() * f * 2.0)
        .collect();
    assert_covariance(&noise, &Matrix::identity(4, 4));
}

#[test]
fn whitened_is_whitening_of_raw() {
    let (dict, _, plan) = small_setup(13);
    let scene = generate_scene(&dict, 200, AlphaLaw::Constant { value: 3.0 }, 4, None, &RngStream::new(6)).unwrap();
    let obs = generate_observations(&scene, &plan, &RngStream::new(7)).unwrap();
    for (z, y) in obs.raw.iter().zip(&obs.whitened) {
        assert!((plan.whiten(z).unwrap() - y).amax() < 1e-12);
    }
}

#[test]
fn observations_are_deterministic() {
    let (dict, _, plan) = small_setup(14);
    let scene = generate_scene(&dict, 300, AlphaLaw::Constant { value: 3.0 }, 4, None, &RngStream::new(8)).unwrap();
    let a = generate_observations(&scene, &plan, &RngStream::new(9)).unwrap();
    let b = generate_observations(&scene, &plan, &RngStream::new(9)).unwrap();
    let c = generate_observations(&scene, &plan, &RngStream::new(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn large_strength_limit_classifies_perfectly() {
    let (dict, _, plan) = small_setup(15);
    let scene = generate_scene(&dict, 500, AlphaLaw::Constant { value: 1e5 }, 4, None, &RngStream::new(11)).unwrap();
    let obs = generate_observations(&scene, &plan, &RngStream::new(12)).unwrap();
    for ((y, label), &alpha) in obs.whitened.iter().zip(&scene.labels).zip(&scene.alphas) {
        let d = classify_map(y, alpha, plan.a(), &dict).unwrap();
        assert_eq!(Some(d.label), label.target());
        assert!(anomaly_statistic(y, alpha, plan.a(), &dict).unwrap() / alpha < 1e-3);
    }
}

#[test]
fn scene_signals_are_dictionary_targets() {
    let (dict, _, _) = small_setup(16);
    let anomaly = perturb_at_distance(dict.target(0), 0.9, &RngStream::new(1)).unwrap();
    let spec = AnomalySpec { signal: anomaly.clone(), count: 40 };
    let scene = generate_scene(&dict, 400, AlphaLaw::UniformScaled { low: 2.0, high: 3.0 }, 9, Some(&spec), &RngStream::new(13)).unwrap();
    for ((f, label), &anom) in scene.true_signals.iter().zip(&scene.labels).zip(&scene.anomaly_mask) {
        match label {
            Label::Target(j) => {
                assert!(!anom);
                assert_eq!(f.as_slice(), dict.target(*j).as_slice());
            }
            Label::Anomaly => {
                assert!(anom);
                assert_eq!(f.as_slice(), anomaly.as_slice());
            }
        }
    }
    let min = scene.alphas.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(scene.alpha_min(), min);
    assert!(scene.alphas.iter().all(|a| (6.0..9.0).contains(a)));
    assert_eq!(scene.anomaly_count(), 40);
}

#[test]
fn gaussian_matrix_norm_concentrates() {
    let (k, n, eps) = (20usize, 106usize, 0.3);
    let limit = (1.0 + eps) * (1.0 + (n as f64 / k as f64).sqrt());
    let trials = 500;
    let failures = (0..trials)
        .filter(|&s| spectral_norm(&gaussian_matrix(k, n, 1.0 / k as f64, &RngStream::new(s))).unwrap() > limit)
        .count();
    let bound = 2.0 * (-((k + n) as f64) * eps * eps / 2.0).exp();
    let slack = 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt() + 1.0 / trials as f64;
    assert!(failures as f64 / trials as f64 <= bound + slack, "{failures} failures, bound {bound}");
}

#[test]
fn pairwise_distortion_failures_respect_bound() {
    let n = 200;
    let points = smooth_spectra(5, n, &RngStream::new(21));
    let (k, eps) = (150usize, 0.9);
    let bound = jl_failure_bound(points.len(), k, eps);
    assert!(bound < 0.5);
    let trials = 300;
    let failures = (0..trials)
        .filter(|&s| {
            let a = gaussian_matrix(k, n, 1.0 / k as f64, &RngStream::with_stream(s, 3));
            !verify_distance_preservation(&a, &points, eps).unwrap().ok
        })
        .count();
    let rate = failures as f64 / trials as f64;
    assert!(rate <= bound + 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt());
}

#[test]
fn tolerance_is_monotone_in_background_strength() {
    for s in 0..30 {
        let a = gaussian_matrix(10, 30, 0.1, &RngStream::new(s));
        let levels = [0.4, 0.2, 0.1, 0.05, 0.01, 0.0];
        let mut seen_ok = false;
        for &l in &levels {
            let bg = BackgroundModel::ar1(30, l, 0.8, Vector::zeros(30), 1.0).unwrap();
            let ok = check_background_tolerance(&a, &bg).unwrap().ok;
            assert!(ok || !seen_ok, "seed {s}: ok at a stronger level but not at {l}");
            seen_ok |= ok;
        }
    }
}

#[test]
fn pvalue_bound_dominates_exact_pvalue() {
    let (n, k, alpha, tau) = (12usize, 8usize, 6.0, 0.4);
    let dict = synthetic_dictionary(n, &[0.3, 0.3, 0.4], None, &RngStream::new(31)).unwrap();
    // worst-case null: exactly tau from the nearest target
    let mut f_star = perturb_at_distance(dict.target(0), tau, &RngStream::new(32)).unwrap();
    for s in 33.. {
        let nearest = dict.targets().iter().map(|f| (f - &f_star).norm()).fold(f64::INFINITY, f64::min);
        if (nearest - tau).abs() < 1e-12 {
            break;
        }
        f_star = perturb_at_distance(dict.target(0), tau, &RngStream::new(s)).unwrap();
    }
    let eps = 0.5;
    let mut pts: Vec<Vector> = dict.targets().to_vec();
    pts.push(f_star.clone());
    let a = (0..)
        .map(|s| gaussian_matrix(k, n, 1.0 / k as f64, &RngStream::with_stream(40, s)))
        .find(|a| verify_distance_preservation(a, &pts, eps).unwrap().ok)
        .unwrap();
    let plan = build_designed_plan(&a, &BackgroundModel::sensor_only(n, 1.0).unwrap()).unwrap();

    let draws = 100_000;
    let mean = plan.a() * &f_star * alpha;
    let mut rng = RngStream::new(41).rng();
    let stats: Vec<f64> = (0..draws)
        .map(|_| {
            let y = &mean + standard_normal_vector(&mut rng, k);
            anomaly_statistic(&y, alpha, plan.a(), &dict).unwrap()
        })
        .collect();
    for &d in &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
        let p = stats.iter().filter(|&&s| s >= d).count() as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let bound = pvalue_upper_bound(d, k, alpha, tau, eps, 0.0).unwrap();
        assert!(p <= bound + 3.0 * se, "d={d}: exact {p} > bound {bound}");
    }
}

#[test]
fn statistic_ignores_dictionary_order() {
    let dict = synthetic_dictionary(10, &[0.1, 0.2, 0.3, 0.4], None, &RngStream::new(51)).unwrap();
    let perm = [2usize, 0, 3, 1];
    let shuffled = Dictionary::new(
        perm.iter().map(|&j| dict.target(j).clone()).collect(),
        perm.iter().map(|&j| dict.priors()[j]).collect(),
    )
    .unwrap();
    let a = gaussian_matrix(5, 10, 0.2, &RngStream::new(52));
    let mut rng = RngStream::new(53).rng();
    for _ in 0..100 {
        let y = standard_normal_vector(&mut rng, 5) * 3.0;
        let alpha = rng.random_range(0.0..5.0);
        let s1 = anomaly_statistic(&y, alpha, &a, &dict).unwrap();
        let s2 = anomaly_statistic(&y, alpha, &a, &shuffled).unwrap();
        assert_eq!(s1, s2);
    }
}

#[test]
fn glrt_threshold_sweep_is_monotone() {
    let n = 24;
    let dict = synthetic_dictionary(n, &[0.25; 4], None, &RngStream::new(61)).unwrap();
    let bg = BackgroundModel::ar1(n, 0.05, 0.8, Vector::zeros(n), 2.0).unwrap();
    let anomaly = perturb_at_distance(dict.target(1), 0.7, &RngStream::new(62)).unwrap();
    let scene = generate_scene(
        &dict,
        1000,
        AlphaLaw::Uniform { low: 4.0, high: 8.0 },
        6,
        Some(&AnomalySpec { signal: anomaly, count: 100 }),
        &RngStream::new(63),
    )
    .unwrap();
    let observer = DownsampleObserver::new(DownsamplePlan::new(n, 6).unwrap(), &bg).unwrap();
    let cols: Vec<Vector> = dict.targets().iter().map(|f| compdet::baselines::downsample(f, observer.plan()).unwrap()).collect();
    let det = MahalanobisDetector::new(&cols, vec![-(4f64).ln(); 4], observer.noise_covariance()).unwrap();
    let scores: Vec<f64> = observer
        .observe(&scene, &RngStream::new(64))
        .iter()
        .zip(&scene.alphas)
        .map(|(y, &a)| det.glrt_score(y, a).unwrap())
        .collect();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut curve: Vec<(f64, f64)> = (0..=50)
        .map(|i| {
            let eta = lo + (hi - lo) * i as f64 / 50.0;
            let rejected = threshold_rejections(&scores, eta);
            let r = compdet::asd::rates_from_mask(&rejected, &scene.anomaly_mask).unwrap();
            (r.pf, r.pd)
        })
        .collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for w in curve.windows(2) {
        assert!(w[1].1 >= w[0].1, "pd decreased: {w:?}");
    }
}

#[test]
fn two_step_with_singletons_is_map() {
    let n = 15;
    let mut rng = RngStream::new(71).rng();
    for s in 0..100 {
        let dict = synthetic_dictionary(n, &[0.25; 4], None, &RngStream::with_stream(72, s)).unwrap();
        let a = gaussian_matrix(6, n, 1.0 / 6.0, &RngStream::with_stream(73, s));
        let y = standard_normal_vector(&mut rng, 6) * 2.0;
        let alpha = rng.random_range(0.5..6.0);
        let manifolds: Vec<Vec<Vector>> = dict.targets().iter().map(|f| vec![f.clone()]).collect();
        let two = classify_manifold_two_step(&y, &y, alpha, &a, &manifolds).unwrap();
        assert_eq!(two, classify_map(&y, alpha, &a, &dict).unwrap().label);
    }
}

#[test]
fn designed_identities_for_random_backgrounds() {
    for s in 0..20u64 {
        let n = 16;
        let g = gaussian_matrix(n, n, 1.0, &RngStream::new(100 + s));
        let raw = &g * g.transpose();
        let scale = 0.02 / SymMatrix::new(raw.clone()).unwrap().max_eigenvalue();
        let cov = SymMatrix::symmetrize(raw * scale).unwrap();
        let bg = BackgroundModel::new(Vector::zeros(n), cov, 0.5 + s as f64 / 10.0).unwrap();
        let a = gaussian_matrix(6, n, 1.0 / 6.0, &RngStream::new(200 + s));
        if !check_background_tolerance(&a, &bg).unwrap().ok {
            continue;
        }
        let plan = build_designed_plan(&a, &bg).unwrap();
        let c = plan.whitener().as_matrix();
        let phi = plan.phi();
        let g = phi * bg.covariance().as_matrix() * phi.transpose() + Matrix::identity(6, 6) * bg.sensor_variance();
        assert!((c * phi - &a).amax() <= 1e-8);
        assert!((c * g * c.transpose() - Matrix::identity(6, 6)).amax() <= 1e-8);
    }
}
