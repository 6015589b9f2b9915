//! Stochastic gradient descent over sampled initial conditions.

mod eval;
mod trainer;

pub use eval::{evaluate, evaluate_states, BinMeans, EvalReport, TrajectorySummary};
pub use trainer::{train, EpochRecord, HoldoutMetrics, Restart, TrainConfig, Trainer, TrainerState};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::se3::{self, Momentum, Pose};
use crate::lie::ProductElement;

/// Ranges of the initial-condition distribution; each magnitude is drawn
/// uniformly from [0, max].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerRanges {
    pub alpha_max: f64,
    pub d_max: f64,
    pub alpha_p_max: f64,
    pub d_p_max: f64,
}

impl Default for SamplerRanges {
    fn default() -> Self {
        SamplerRanges { alpha_max: std::f64::consts::PI, d_max: 1.0, alpha_p_max: 0.03, d_p_max: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSpec {
    /// Mean initial pose H_I.
    pub h_i: Pose,
    pub ranges: SamplerRanges,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec { h_i: Pose::identity(), ranges: SamplerRanges::default() }
    }
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        let r = &self.ranges;
        for (name, v) in [("alpha_max", r.alpha_max), ("d_max", r.d_max), ("alpha_p_max", r.alpha_p_max), ("d_p_max", r.d_p_max)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("sampler.{name} must be finite and ≥ 0 (got {v})")));
            }
        }
        Ok(())
    }
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// H = H_I·exp(Λ(α ω̂; d v̂)), P = (α_p ω̂_p; d_p v̂_p).
pub fn sample_initial<R: Rng + ?Sized>(sampler: &SamplerSpec, rng: &mut R) -> ProductElement {
    let r = &sampler.ranges;
    let alpha = rng.random::<f64>() * r.alpha_max;
    let d = rng.random::<f64>() * r.d_max;
    let alpha_p = rng.random::<f64>() * r.alpha_p_max;
    let d_p = rng.random::<f64>() * r.d_p_max;
    let w = unit_direction(rng);
    let v = unit_direction(rng);
    let wp = unit_direction(rng);
    let vp = unit_direction(rng);
    let q = se3::join(&(alpha * w), &(d * v));
    let pose = sampler.h_i.compose(&se3::exp(&q));
    let mom: Momentum = se3::join(&(alpha_p * wp), &(d_p * vp));
    ProductElement::new(pose, mom)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1, beta2, eps }
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }
}

/// One bias-corrected ADAM update. A non-finite gradient leaves both the
/// parameters and the moments untouched and returns `Ok(false)`.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], eta: f64) -> Result<bool> {
    let n = params.len();
    if grad.len() != n || state.m.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if grad.len() != n { grad.len() } else { state.m.len() } });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        log::warn!("non-finite gradient, ADAM update skipped");
        return Ok(false);
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..n {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= eta * mh / (vh.sqrt() + state.eps);
    }
    Ok(true)
}
