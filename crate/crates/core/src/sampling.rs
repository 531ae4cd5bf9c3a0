//! Robustness-weighted selection of scene contact points.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::robustness::SrMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("no samples with positive probability")]
    NoCandidates,
}

#[derive(Debug, Clone)]
pub struct SamplerState {
    pub q0: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub k: usize,
    /// Length scale of the scene for the fixed-support falloff (m).
    pub scene_scale: f64,
    pub scene_centroid: Vec3,
    /// Whether samples on fixed objects compete with assembly samples.
    pub allow_fixed_support: bool,
}

impl SamplerState {
    pub fn new(q0: f64, lambda: f64, gamma: f64, scene_scale: f64, scene_centroid: Vec3) -> Self {
        Self {
            q0,
            lambda,
            gamma,
            k: 0,
            scene_scale,
            scene_centroid,
            allow_fixed_support: false,
        }
    }

    /// Saturation level at the current iteration.
    pub fn q(&self) -> f64 {
        self.q0 * self.lambda.powi(self.k as i32)
    }

    pub fn advance(&mut self) {
        self.k += 1;
    }
}

/// Sampling probability of every map sample at the current iteration.
///
/// Samples on movable objects are weighted by `min(r, Q_k)`. Samples on fixed
/// objects only take part when `allow_fixed_support` is set (or when there
/// is nothing else to sample); they are then weighted by the largest
/// movable-sample probability times a Gaussian falloff around the scene
/// centroid that widens with `k`.
pub fn point_probabilities(map: &SrMap, state: &SamplerState) -> Result<Vec<f64>, SamplingError> {
    let q = state.q();
    let mut w: Vec<f64> = map
        .samples
        .iter()
        .map(|s| if s.fixed { 0.0 } else { s.robustness.value().min(q) })
        .collect();
    let movable_total: f64 = w.iter().sum();
    let use_fixed = state.allow_fixed_support || movable_total <= 0.0;
    if use_fixed {
        let peak = if movable_total > 0.0 {
            w.iter().fold(0.0f64, |a, &b| a.max(b)) / movable_total
        } else {
            1.0
        };
        if movable_total > 0.0 {
            for x in w.iter_mut() {
                *x /= movable_total;
            }
        }
        let rate = state.gamma.powi(state.k as i32) / (state.scene_scale * state.scene_scale).max(1e-300);
        let falloff_only = !state.allow_fixed_support;
        for (x, s) in w.iter_mut().zip(&map.samples) {
            if s.fixed {
                *x = if falloff_only {
                    1.0
                } else {
                    peak * (-rate * (s.position - state.scene_centroid).norm_squared()).exp()
                };
            }
        }
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(SamplingError::NoCandidates);
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Saturation `Q0` giving the most robust finite movable sample the share
/// `target` of the initial distribution.
///
/// The share grows with `Q0`; when it stays below the target even at the
/// largest finite robustness, that value is used.
pub fn init_q0(map: &SrMap, target: f64) -> f64 {
    let finite: Vec<f64> = map
        .samples
        .iter()
        .filter(|s| !s.fixed)
        .map(|s| s.robustness.value())
        .filter(|r| r.is_finite())
        .collect();
    let Some(r_max) = finite.iter().copied().reduce(f64::max) else {
        return 1.0;
    };
    let r_min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let infinite = map.samples.iter().filter(|s| !s.fixed && s.robustness.is_infinite()).count();
    let share = |q: f64| {
        let total: f64 = finite.iter().map(|r| r.min(q)).sum::<f64>() + infinite as f64 * q;
        if total <= 0.0 {
            0.0
        } else {
            r_max.min(q) / total
        }
    };
    if r_max <= 0.0 {
        return 1.0;
    }
    if share(r_max) <= target {
        return r_max;
    }
    let lo_start = r_min.max(r_max * 1e-12);
    if share(lo_start) >= target {
        return lo_start;
    }
    let (mut lo, mut hi) = (lo_start, r_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if share(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two distinct sample indices drawn without replacement.
pub fn sample_pair<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<(usize, usize), SamplingError> {
    if probs.iter().filter(|&&p| p > 0.0).count() < 2 {
        return Err(SamplingError::NoCandidates);
    }
    let dist = WeightedIndex::new(probs).map_err(|_| SamplingError::NoCandidates)?;
    let a = dist.sample(rng);
    loop {
        let b = dist.sample(rng);
        if b != a {
            return Ok((a, b));
        }
    }
}
