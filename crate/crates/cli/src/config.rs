//! Run configuration: one JSON document describing an experiment.

use std::path::Path;

use geonode::adjoint::CostSpec;
use geonode::dynamics::{BodyParams, Controller, ControllerSpec, Gravity, NnParams, QuadraticParams};
use geonode::integrate::SolverConfig;
use geonode::lie::se3::Pose;
use geonode::lie::so3::Rotation;
use geonode::training::{Restart, SamplerRanges, SamplerSpec, TrainConfig};
use geonode::{Error, Result};
use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NnInit {
    #[default]
    Xavier,
    Zeros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerConfig {
    Quadratic {
        #[serde(default)]
        theta: [f64; 12],
    },
    Nn {
        #[serde(default)]
        init: NnInit,
        /// Seed for the initial weights; the training seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init_seed: Option<u64>,
    },
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InertiaConfig {
    Diagonal([f64; 6]),
    Full([[f64; 6]; 6]),
}

impl Default for InertiaConfig {
    fn default() -> Self {
        InertiaConfig::Diagonal([1.0; 6])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    #[serde(default)]
    pub inertia: InertiaConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<Gravity>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub w6: f64,
    pub w7: f64,
    pub w8: f64,
    pub w9: f64,
}

impl Weights {
    pub fn to_array(&self) -> [f64; 9] {
        [self.w1, self.w2, self.w3, self.w4, self.w5, self.w6, self.w7, self.w8, self.w9]
    }

    pub fn from_array(w: [f64; 9]) -> Self {
        Weights { w1: w[0], w2: w[1], w3: w[2], w4: w[3], w5: w[4], w6: w[5], w7: w[6], w8: w[7], w9: w[8] }
    }
}

fn identity3() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Rotation rows and translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    #[serde(default = "identity3")]
    pub rotation: [[f64; 3]; 3],
    #[serde(default)]
    pub translation: [f64; 3],
}

impl Default for PoseConfig {
    fn default() -> Self {
        PoseConfig { rotation: identity3(), translation: [0.0; 3] }
    }
}

impl PoseConfig {
    pub fn to_pose(&self, field: &str) -> Result<Pose> {
        let r = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        let rot = Rotation::new(r).map_err(|e| Error::Config(format!("{field}.rotation: {e}")))?;
        let p = Vector3::from(self.translation);
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("{field}.translation must be finite")));
        }
        Ok(Pose::new(rot, p))
    }

    pub fn from_pose(h: &Pose) -> Self {
        let r = h.r();
        PoseConfig { rotation: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])), translation: h.p.into() }
    }
}

fn default_alpha_max() -> f64 {
    SamplerRanges::default().alpha_max
}
fn default_d_max() -> f64 {
    SamplerRanges::default().d_max
}
fn default_alpha_p_max() -> f64 {
    SamplerRanges::default().alpha_p_max
}
fn default_d_p_max() -> f64 {
    SamplerRanges::default().d_p_max
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default)]
    pub h_i: PoseConfig,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: f64,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
    #[serde(default = "default_alpha_p_max")]
    pub alpha_p_max: f64,
    #[serde(default = "default_d_p_max")]
    pub d_p_max: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let r = SamplerRanges::default();
        SamplerConfig { h_i: PoseConfig::default(), alpha_max: r.alpha_max, d_max: r.d_max, alpha_p_max: r.alpha_p_max, d_p_max: r.d_p_max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub body: BodyConfig,
    /// Cancel gravity by adding d_H V_g to the control wrench.
    #[serde(default)]
    pub gravity_compensation: bool,
    pub weights: Weights,
    #[serde(default)]
    pub goal: PoseConfig,
    pub horizon: f64,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Library objects built from a validated config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub controller: ControllerSpec,
    pub body: BodyParams,
    pub cost: CostSpec,
    pub sampler: SamplerSpec,
    pub solver: SolverConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("invalid configuration: "))))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact serialization.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(compact.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn body(&self) -> Result<BodyParams> {
        let inertia = match &self.body.inertia {
            InertiaConfig::Diagonal(d) => Matrix6::from_diagonal(&Vector6::from_column_slice(d)),
            InertiaConfig::Full(m) => Matrix6::from_fn(|i, j| m[i][j]),
        };
        if let Some(g) = &self.body.gravity {
            if !(g.mass.is_finite() && g.mass > 0.0) || g.g_vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("body.gravity: mass must be > 0 and g_vec finite".into()));
            }
        }
        BodyParams::new(inertia, self.body.gravity).map_err(|e| Error::Config(format!("body.inertia: {e}")))
    }

    fn controller(&self) -> Result<ControllerSpec> {
        let c = match &self.controller {
            ControllerConfig::Quadratic { theta } => {
                Controller::Quadratic(QuadraticParams::new(*theta).map_err(|e| Error::Config(format!("controller.theta: {e}")))?)
            }
            ControllerConfig::Nn { init, init_seed } => Controller::Nn(match init {
                NnInit::Zeros => NnParams::zeros(),
                NnInit::Xavier => NnParams::xavier(&mut ChaCha8Rng::seed_from_u64(init_seed.unwrap_or(self.train.seed))),
            }),
            ControllerConfig::Free => Controller::Free,
        };
        Ok(ControllerSpec::new(c, self.gravity_compensation))
    }

    pub fn build(&self) -> Result<Setup> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        let body = self.body()?;
        if self.gravity_compensation && body.gravity.is_none() {
            log::warn!("gravity_compensation is set but body.gravity is absent; compensation is a no-op");
        }
        let weights = self.weights.to_array();
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("weights.w{} must be finite and ≥ 0 (got {})", i + 1, weights[i])));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::Config(format!("horizon must be finite and ≥ 0 (got {})", self.horizon)));
        }
        let goal = self.goal.to_pose("goal")?;
        let cost = CostSpec::new(goal, weights, self.horizon).map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.sampler;
        let sampler = SamplerSpec {
            h_i: s.h_i.to_pose("sampler.h_i")?,
            ranges: SamplerRanges { alpha_max: s.alpha_max, d_max: s.d_max, alpha_p_max: s.alpha_p_max, d_p_max: s.d_p_max },
        };
        sampler.validate()?;
        self.train.validate()?;
        self.solver.validate()?;
        Ok(Setup { controller: self.controller()?, body, cost, sampler, solver: self.solver.clone(), train: self.train.clone() })
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "quadratic" => Some(preset_quadratic()),
            "nn" => Some(preset_nn()),
            "nn-gravity" => Some(preset_nn_gravity()),
            _ => None,
        }
    }
}

pub const PRESETS: [&str; 3] = ["quadratic", "nn", "nn-gravity"];

fn base_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 2048,
        eta: 1e-3,
        gamma: 0.999,
        seed: 0,
        restart: None,
        eval_every: 10,
        holdout_size: 256,
        holdout_seed: 0x5eed_0ff5_e7,
        beta1: 0.9,
        beta2: 0.999,
        adam_eps: 1e-8,
    }
}

fn base(name: &str, controller: ControllerConfig, weights: [f64; 9], epochs: usize) -> RunConfig {
    RunConfig {
        name: name.into(),
        controller,
        body: BodyConfig::default(),
        gravity_compensation: false,
        weights: Weights::from_array(weights),
        goal: PoseConfig::default(),
        horizon: 3.0,
        sampler: SamplerConfig::default(),
        train: base_train(epochs),
        solver: SolverConfig::dopri5(1e-5, 1e-4),
    }
}

/// Quadratic controller: 1000 epochs at η = 1e-3, then 200 restarted at 1e-2.
pub fn preset_quadratic() -> RunConfig {
    let mut c = base("quadratic", ControllerConfig::Quadratic { theta: [0.0; 12] }, [4.0, 20.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1200);
    c.train.restart = Some(Restart { epoch: 1000, eta: 1e-2 });
    c
}

pub fn preset_nn() -> RunConfig {
    base("nn", ControllerConfig::Nn { init: NnInit::Xavier, init_seed: None }, [4.0, 10.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1200)
}

/// NN controller under gravity with compensation, goal one unit below the
/// origin.
pub fn preset_nn_gravity() -> RunConfig {
    let mut c = base(
        "nn-gravity",
        ControllerConfig::Nn { init: NnInit::Xavier, init_seed: None },
        [4.0, 4.0, 5.0, 5e-4, 1.0, 1.0, 1.0, 1e-4, 1.0],
        1000,
    );
    c.body.gravity = Some(Gravity { mass: 1.0, g_vec: [0.0, 0.0, -9.81] });
    c.gravity_compensation = true;
    c.goal.translation = [0.0, 0.0, -1.0];
    c
}
