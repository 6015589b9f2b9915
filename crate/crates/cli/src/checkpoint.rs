//! Checkpoints: a JSON envelope with exact little-endian f64 payloads.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use geonode::diff::Architecture;
use geonode::dynamics::{nn_architectures, Controller, ControllerSpec};
use geonode::training::{AdamState, TrainerState};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureDescriptor {
    pub kind: String,
    pub param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_net: Option<Architecture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_net: Option<Architecture>,
}

impl ArchitectureDescriptor {
    pub fn of(spec: &ControllerSpec) -> Self {
        let (v_net, b_net) = match spec.controller {
            Controller::Nn(_) => {
                let (v, b) = nn_architectures();
                (Some(v), Some(b))
            }
            _ => (None, None),
        };
        ArchitectureDescriptor { kind: spec.kind().into(), param_count: spec.param_count(), v_net, b_net }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerState {
    pub kind: String,
    pub m: String,
    pub v: String,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngState {
    pub algorithm: String,
    pub seed: u64,
    /// 128-bit stream position, decimal.
    pub word_pos: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: ArchitectureDescriptor,
    pub params: String,
    pub optimizer: OptimizerState,
    pub epoch: usize,
    pub rng: RngState,
    pub config_hash: String,
    pub config: RunConfig,
}

pub fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64(text: &str) -> Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(text).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() % 8 != 0 {
        return Err(format!("payload of {} bytes is not a whole number of f64", bytes.len()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl Checkpoint {
    pub fn new(config: &RunConfig, spec: &ControllerSpec, state: &TrainerState) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            architecture: ArchitectureDescriptor::of(spec),
            params: encode_f64(&state.params),
            optimizer: OptimizerState {
                kind: "adam".into(),
                m: encode_f64(&state.adam.m),
                v: encode_f64(&state.adam.v),
                t: state.adam.t,
                beta1: state.adam.beta1,
                beta2: state.adam.beta2,
                eps: state.adam.eps,
            },
            epoch: state.epoch,
            rng: RngState { algorithm: "chacha8".into(), seed: state.rng_seed, word_pos: state.rng_word_pos.to_string() },
            config_hash: config.hash(),
            config: config.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Failed(e.to_string()))? + "\n";
        // Write-then-rename so a crash never leaves a truncated checkpoint.
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| CliError::Failed(format!("{}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Input(format!("checkpoint {}: {m}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        ck.validate().map_err(bad)?;
        Ok(ck)
    }

    fn validate(&self) -> Result<(), String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format version {}", self.format_version));
        }
        if self.config_hash != self.config.hash() {
            return Err("embedded config does not match its hash".into());
        }
        let state = self.trainer_state()?;
        let setup = self.config.build().map_err(|e| e.to_string())?;
        let expected = ArchitectureDescriptor::of(&setup.controller);
        if self.architecture != expected {
            return Err(format!("architecture descriptor {:?} does not match config ({:?})", self.architecture, expected));
        }
        if state.params.len() != expected.param_count {
            return Err(format!("{} parameters, descriptor says {}", state.params.len(), expected.param_count));
        }
        if state.adam.m.len() != state.params.len() || state.adam.v.len() != state.params.len() {
            return Err("optimizer moments do not match the parameter count".into());
        }
        Ok(())
    }

    pub fn trainer_state(&self) -> Result<TrainerState, String> {
        let o = &self.optimizer;
        Ok(TrainerState {
            params: decode_f64(&self.params)?,
            adam: AdamState { m: decode_f64(&o.m)?, v: decode_f64(&o.v)?, t: o.t, beta1: o.beta1, beta2: o.beta2, eps: o.eps },
            epoch: self.epoch,
            rng_seed: self.rng.seed,
            rng_word_pos: self.rng.word_pos.parse().map_err(|e| format!("rng.word_pos: {e}"))?,
        })
    }

    /// The configured controller carrying the checkpoint's parameters.
    pub fn controller(&self) -> Result<ControllerSpec, CliError> {
        let setup = self.config.build()?;
        let params = decode_f64(&self.params).map_err(CliError::Input)?;
        Ok(setup.controller.with_params(&params)?)
    }
}
