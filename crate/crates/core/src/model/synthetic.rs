//! Synthetic spectral dictionaries and anomalous signals.
//!
//! Targets are smooth nonnegative curves (a linear baseline plus a few
//! Gaussian absorption-like bumps). Near-duplicate pairs and anomalies are
//! built by rotating a target toward a fine-scale random direction, which
//! fixes their Euclidean distance exactly while leaving the coarse shape
//! almost unchanged.

use rand::Rng;

use super::Dictionary;
use crate::error::{invalid, Result};
use crate::numerics::{standard_normal_vector, RngStream, Vector};

const MAX_ATTEMPTS: u64 = 1000;

/// `m` unit-norm smooth spectra of length `n`.
pub fn smooth_spectra(m: usize, n: usize, stream: &RngStream) -> Vec<Vector> {
    let mut rng = stream.rng();
    let denom = (n.max(2) - 1) as f64;
    (0..m)
        .map(|_| {
            let offset = rng.random_range(0.2..1.0);
            let slope = rng.random_range(-0.15..0.15);
            let bumps: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.04..0.2),
                        rng.random_range(0.2..1.0),
                    )
                })
                .collect();
            let f = Vector::from_fn(n, |t, _| {
                let x = t as f64 / denom;
                let mut v = offset + slope * x;
                for &(c, w, h) in &bumps {
                    v += h * (-0.5 * ((x - c) / w).powi(2)).exp();
                }
                v
            });
            f.normalize()
        })
        .collect()
}

/// Unit vector at Euclidean distance exactly `d` from the unit vector `base`,
/// rotated toward a random direction orthogonal to it.
pub fn perturb_at_distance(base: &Vector, d: f64, stream: &RngStream) -> Result<Vector> {
    if !(d > 0.0 && d <= 2.0) {
        return Err(invalid(format!("distance must lie in (0, 2], got {d}")));
    }
    let mut rng = stream.rng();
    let base = base.normalize();
    let mut u = standard_normal_vector(&mut rng, base.len());
    u -= &base * base.dot(&u);
    let norm = u.norm();
    if norm == 0.0 {
        return Err(invalid("cannot perturb a one-dimensional vector"));
    }
    u /= norm;
    let theta = 2.0 * (d / 2.0).asin();
    Ok((base * theta.cos() + u * theta.sin()).normalize())
}

fn min_distance(targets: &[Vector]) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..targets.len() {
        for b in a + 1..targets.len() {
            best = best.min((&targets[a] - &targets[b]).norm());
        }
    }
    best
}

/// Smooth dictionary of length-`n` targets with the given priors. With
/// `d_min`, target 1 is a near-duplicate of target 0 at exactly that distance
/// and every other pair is farther apart.
pub fn synthetic_dictionary(n: usize, priors: &[f64], d_min: Option<f64>, stream: &RngStream) -> Result<Dictionary> {
    let m = priors.len();
    if m < 2 || n < 2 {
        return Err(invalid("synthetic dictionaries need m >= 2 targets of length >= 2"));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let s = stream.substream(attempt);
        let mut targets = smooth_spectra(m, n, &s.substream(0));
        if let Some(d) = d_min {
            targets[1] = perturb_at_distance(&targets[0], d, &s.substream(1))?;
            let near = (&targets[0] - &targets[1]).norm();
            let others = min_distance(&targets[1..]).min(min_distance(
                &std::iter::once(targets[0].clone()).chain(targets[2..].iter().cloned()).collect::<Vec<_>>(),
            ));
            if others <= near {
                continue;
            }
        }
        return Dictionary::normalized(targets, priors.to_vec());
    }
    Err(invalid(format!("could not place targets {d_min:?} apart")))
}

/// Unit vector whose distance to the nearest dictionary target is exactly
/// `d`.
pub fn anomaly_at_distance(dict: &Dictionary, d: f64, stream: &RngStream) -> Result<Vector> {
    for attempt in 0..MAX_ATTEMPTS {
        let base = dict.target(attempt as usize % dict.len());
        let f = perturb_at_distance(base, d, &stream.substream(attempt))?;
        let others = dict
            .targets()
            .iter()
            .map(|t| (t - &f).norm())
            .fold(f64::INFINITY, f64::min);
        if (others - d).abs() <= 1e-12 {
            return Ok(f);
        }
    }
    Err(invalid(format!("no anomaly found at distance {d} from the dictionary")))
}
