//! Sample-based check of the stability-by-design conditions: B𝓘 symmetric
//! positive definite and V bounded below.

use nalgebra::{Matrix6, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;

use super::controller::{Controller, ControllerSpec};
use super::BodyParams;
use crate::diff::Activation;
use crate::lie::se3::{self, Momentum};

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub samples: usize,
    /// B𝓘 symmetric on every sample (diagonal B times diagonal 𝓘).
    pub symmetric: bool,
    /// Smallest eigenvalue of the symmetric part of B𝓘 over all samples.
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
    /// Construction-level lower bound on V, when one exists.
    pub potential_lower_bound: Option<f64>,
    pub certificate: String,
    pub warnings: Vec<String>,
    pub passed: bool,
}

/// Lower bound for a tanh-hidden, linear-output scalar network:
/// V ≥ b − Σ|w|.
fn nn_potential_bound(spec: &ControllerSpec) -> Option<f64> {
    let Controller::Nn(n) = &spec.controller else { return None };
    let [hidden, out] = n.v_net.layers.as_slice() else { return None };
    if hidden.act != Activation::Tanh || out.act != Activation::Linear {
        return None;
    }
    Some(out.b[0] - out.w.iter().map(|w| w.abs()).sum::<f64>())
}

pub fn stability_audit<R: Rng + ?Sized>(spec: &ControllerSpec, body: &BodyParams, samples: usize, rng: &mut R) -> AuditReport {
    let mut warnings = Vec::new();
    let diag_inertia = body.is_diagonal();
    if !diag_inertia {
        warnings.push("inertia is not diagonal: B𝓘 is not symmetric for diagonal B".to_string());
    }
    let mut min_eig = f64::INFINITY;
    let mut failures = 0usize;
    for _ in 0..samples {
        let q: Vector6<f64> = Vector6::from_fn(|_, _| rng.sample(StandardNormal));
        let h = se3::exp(&q);
        let p: Momentum = Vector6::from_fn(|_, _| rng.sample(StandardNormal));
        match spec.damping(&h, &p) {
            Ok(b) => {
                let bi = Matrix6::from_diagonal(&b) * body.inertia();
                let sym = 0.5 * (bi + bi.transpose());
                let e = sym.symmetric_eigenvalues().min();
                min_eig = min_eig.min(if e.is_nan() { f64::NEG_INFINITY } else { e });
            }
            Err(_) => failures += 1,
        }
    }
    if failures > 0 {
        warnings.push(format!("{failures} damping evaluations failed"));
    }
    if samples == 0 {
        min_eig = f64::NAN;
    }

    let (bound, certificate) = match &spec.controller {
        Controller::Quadratic(_) => {
            (Some(0.0), "V_Q = ¼pᵀKp + ¼pᵀRKRᵀp + Σ g_i(1 − R_ii) ≥ 0 with K, G positive diagonal".to_string())
        }
        Controller::Nn(_) => match nn_potential_bound(spec) {
            Some(b) => (Some(b), format!("tanh hidden layer, linear output: V ≥ b − Σ|w| = {b:.6e}")),
            None => (None, "no construction-level bound for this V-net".to_string()),
        },
        Controller::Free => (Some(0.0), "V ≡ 0".to_string()),
    };
    let free = matches!(spec.controller, Controller::Free);
    if free {
        warnings.push("free body: no damping injected".to_string());
    }
    let positive_definite = !free && failures == 0 && min_eig > 0.0;
    let symmetric = diag_inertia;
    AuditReport {
        samples,
        symmetric,
        min_eigenvalue: min_eig,
        positive_definite,
        potential_lower_bound: bound,
        certificate,
        warnings,
        passed: positive_definite && bound.is_some(),
    }
}
