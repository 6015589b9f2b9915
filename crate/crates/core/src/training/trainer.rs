//! Epoch loop: sample a batch, map the adjoint over it, average, ADAM.

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adam_step, evaluate_states, sample_initial, AdamState, SamplerSpec};
use crate::adjoint::{cost_and_gradient, CostSpec, GradientResult};
use crate::dynamics::{BodyParams, ControllerSpec};
use crate::error::{Error, Result};
use crate::integrate::SolverConfig;
use crate::lie::ProductElement;

/// Restart at the start of `epoch` (0-based) with rate `eta`; the ADAM
/// moments are cleared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Restart {
    pub epoch: usize,
    pub eta: f64,
}

fn default_holdout_size() -> usize {
    256
}

fn default_holdout_seed() -> u64 {
    0x5eed_0ff5_e7
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_adam_eps() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub eta: f64,
    /// Per-epoch learning-rate decay.
    pub gamma: f64,
    pub seed: u64,
    #[serde(default)]
    pub restart: Option<Restart>,
    pub eval_every: usize,
    #[serde(default = "default_holdout_size")]
    pub holdout_size: usize,
    #[serde(default = "default_holdout_seed")]
    pub holdout_seed: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("train.eta must be > 0 (got {})", self.eta));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("train.gamma must be in (0, 1] (got {})", self.gamma));
        }
        if self.batch_size == 0 {
            return bad("train.batch_size must be ≥ 1".into());
        }
        if self.eval_every == 0 {
            return bad("train.eval_every must be ≥ 1".into());
        }
        if let Some(r) = &self.restart {
            if !(r.eta.is_finite() && r.eta > 0.0) {
                return bad(format!("train.restart.eta must be > 0 (got {})", r.eta));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("ADAM needs 0 ≤ β₁, β₂ < 1 and ε > 0".into());
        }
        Ok(())
    }

    /// η·γᵏ, or η_r·γ^{k−k_r} from the restart epoch on.
    pub fn rate(&self, epoch: usize) -> f64 {
        match self.restart {
            Some(r) if epoch >= r.epoch => r.eta * self.gamma.powi((epoch - r.epoch) as i32),
            _ => self.eta * self.gamma.powi(epoch as i32),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoldoutMetrics {
    pub mean_final_angle: f64,
    pub mean_final_distance: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based index of the completed epoch.
    pub epoch: usize,
    pub loss: f64,
    pub terminal_loss: f64,
    pub integral_loss: f64,
    pub eta: f64,
    pub dropped: usize,
    pub holdout: Option<HoldoutMetrics>,
    pub wall_time: f64,
}

/// Everything needed to continue training bit-identically.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainerState {
    pub params: Vec<f64>,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    pub rng_seed: u64,
    pub rng_word_pos: u128,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub controller: ControllerSpec,
    pub cost: CostSpec,
    pub body: BodyParams,
    pub sampler: SamplerSpec,
    pub solver: SolverConfig,
    pub adam: AdamState,
    pub epoch: usize,
    rng: ChaCha8Rng,
    holdout: Vec<ProductElement>,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        controller: ControllerSpec,
        cost: CostSpec,
        body: BodyParams,
        sampler: SamplerSpec,
        solver: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        sampler.validate()?;
        solver.validate()?;
        let n = controller.param_count();
        let adam = AdamState::new(n, config.beta1, config.beta2, config.adam_eps);
        let mut hrng = ChaCha8Rng::seed_from_u64(config.holdout_seed);
        let holdout = (0..config.holdout_size).map(|_| sample_initial(&sampler, &mut hrng)).collect();
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Trainer { config, controller, cost, body, sampler, solver, adam, epoch: 0, rng, holdout })
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            params: self.controller.params(),
            adam: self.adam.clone(),
            epoch: self.epoch,
            rng_seed: self.config.seed,
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn restore(&mut self, state: &TrainerState) -> Result<()> {
        if state.params.len() != self.controller.param_count() || state.adam.m.len() != state.params.len() {
            return Err(Error::ResumeMismatch(format!(
                "parameter count {} does not match controller ({})",
                state.params.len(),
                self.controller.param_count()
            )));
        }
        if state.rng_seed != self.config.seed {
            return Err(Error::ResumeMismatch(format!("checkpoint seed {} differs from run seed {}", state.rng_seed, self.config.seed)));
        }
        self.controller.set_params(&state.params)?;
        self.adam = state.adam.clone();
        self.epoch = state.epoch;
        self.rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
        self.rng.set_word_pos(state.rng_word_pos);
        Ok(())
    }

    pub fn holdout(&self) -> &[ProductElement] {
        &self.holdout
    }

    pub fn evaluate_holdout(&self) -> HoldoutMetrics {
        let r = evaluate_states(&self.controller, &self.body, &self.cost, &self.holdout, &self.solver, 1);
        HoldoutMetrics {
            mean_final_angle: r.mean_final_angle(),
            mean_final_distance: r.mean_final_distance(),
            failures: r.failures.len(),
        }
    }

    /// Batch gradient averaged over the successful samples, reduced in
    /// sample order.
    pub fn batch_gradient(&self, batch: &[ProductElement]) -> (Vec<Result<GradientResult>>, Option<(DVector<f64>, f64, f64, f64)>) {
        let results: Vec<Result<GradientResult>> = batch
            .par_iter()
            .map(|g0| cost_and_gradient(&self.cost, &self.controller, &self.body, g0, &self.solver))
            .collect();
        let n = self.controller.param_count();
        let mut grad = DVector::zeros(n);
        let (mut loss, mut term, mut integ, mut ok) = (0.0, 0.0, 0.0, 0usize);
        for r in results.iter().flatten() {
            grad += &r.grad;
            loss += r.cost;
            term += r.terminal_cost;
            integ += r.integral_cost;
            ok += 1;
        }
        if ok == 0 {
            return (results, None);
        }
        let k = ok as f64;
        (results, Some((grad / k, loss / k, term / k, integ / k)))
    }

    pub fn step_epoch(&mut self) -> Result<EpochRecord> {
        let start = Instant::now();
        let e = self.epoch;
        if matches!(self.config.restart, Some(r) if r.epoch == e) {
            log::info!("restart at epoch {e}: rate {}, ADAM moments cleared", self.config.rate(e));
            self.adam.reset();
        }
        let eta = self.config.rate(e);
        let batch: Vec<ProductElement> = (0..self.config.batch_size).map(|_| sample_initial(&self.sampler, &mut self.rng)).collect();
        let (results, avg) = self.batch_gradient(&batch);
        let dropped = results.iter().filter(|r| r.is_err()).count();
        for (i, r) in results.iter().enumerate() {
            if let Err(err) = r {
                log::warn!("epoch {}: sample {i} dropped: {err}", e + 1);
            }
        }
        if 2 * dropped > batch.len() {
            let first = results.iter().find_map(|r| r.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
            return Err(Error::TrainingAborted(format!(
                "epoch {}: {dropped} of {} samples failed (first: {first})",
                e + 1,
                batch.len()
            )));
        }
        let (grad, loss, terminal_loss, integral_loss) = avg.expect("at least one successful sample");
        let mut params = self.controller.params();
        if adam_step(&mut self.adam, &mut params, grad.as_slice(), eta)? {
            self.controller.set_params(&params)?;
        }
        self.epoch += 1;
        let holdout = (self.epoch % self.config.eval_every == 0 || self.epoch == self.config.epochs).then(|| self.evaluate_holdout());
        Ok(EpochRecord {
            epoch: self.epoch,
            loss,
            terminal_loss,
            integral_loss,
            eta,
            dropped,
            holdout,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

/// Runs epochs until `config.epochs` are complete, calling `on_epoch`
/// after each.
pub fn train<F>(trainer: &mut Trainer, mut on_epoch: F) -> Result<Vec<EpochRecord>>
where
    F: FnMut(&Trainer, &EpochRecord) -> Result<()>,
{
    let mut out = Vec::new();
    while trainer.epoch < trainer.config.epochs {
        let rec = trainer.step_epoch()?;
        on_epoch(trainer, &rec)?;
        out.push(rec);
    }
    Ok(out)
}
