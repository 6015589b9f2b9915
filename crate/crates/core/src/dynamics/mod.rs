//! Rigid-body dynamics on SE(3) × ℝ⁶ with potential-shaping controllers.
//!
//! Ḣ = H·Λ(𝓘⁻¹P), Ṗ = ad_{𝓘⁻¹P}ᵀP + W − d_H V_g.

mod audit;
mod controller;

pub use audit::{stability_audit, AuditReport};
pub use controller::{
    control_wrench, nn_architectures, nn_damping, nn_potential, quadratic_potential, Controller, ControllerSpec,
    NnParams, QuadraticParams, WrenchParts, WrenchVjp,
};

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::se3::{self, Momentum, Pose, Twist, Wrench};

/// Uniform gravity acting on a point mass at the body origin,
/// V_g(H) = −m·gᵀp.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gravity {
    pub mass: f64,
    pub g_vec: [f64; 3],
}

impl Gravity {
    pub fn g(&self) -> Vector3<f64> {
        Vector3::from(self.g_vec)
    }

    pub fn potential(&self, h: &Pose) -> f64 {
        -self.mass * self.g().dot(&h.p)
    }

    /// d_H V_g = (0; −m Rᵀg).
    pub fn gradient(&self, h: &Pose) -> Wrench {
        let f = -self.mass * (h.r().transpose() * self.g());
        se3::join(&Vector3::zeros(), &f)
    }

    /// d_H (cᵀ d_H V_g) = (−m c_v × Rᵀg; 0).
    pub fn gradient_vjp(&self, h: &Pose, c: &Vector6<f64>) -> Vector6<f64> {
        let cv = Vector3::new(c[3], c[4], c[5]);
        let rg = h.r().transpose() * self.g();
        se3::join(&(-self.mass * cv.cross(&rg)), &Vector3::zeros())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodyParams {
    inertia: Matrix6<f64>,
    inertia_inv: Matrix6<f64>,
    pub gravity: Option<Gravity>,
}

impl Default for BodyParams {
    fn default() -> Self {
        BodyParams { inertia: Matrix6::identity(), inertia_inv: Matrix6::identity(), gravity: None }
    }
}

impl BodyParams {
    /// Validates symmetry (1e-12) and positive definiteness.
    pub fn new(inertia: Matrix6<f64>, gravity: Option<Gravity>) -> Result<Self> {
        let asym = (inertia - inertia.transpose()).amax();
        if !(asym <= 1e-12) {
            return Err(Error::InvalidParameter(format!("inertia not symmetric (max asymmetry {asym:e})")));
        }
        let chol = inertia
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("inertia not positive definite".into()))?;
        if let Some(g) = &gravity {
            if !(g.mass.is_finite() && g.mass >= 0.0) || g.g_vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("gravity mass and vector must be finite, mass ≥ 0".into()));
            }
        }
        Ok(BodyParams { inertia, inertia_inv: chol.inverse(), gravity })
    }

    pub fn inertia(&self) -> &Matrix6<f64> {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Matrix6<f64> {
        &self.inertia_inv
    }

    pub fn is_diagonal(&self) -> bool {
        (0..6).all(|i| (0..6).all(|j| i == j || self.inertia[(i, j)] == 0.0))
    }

    pub fn twist(&self, p: &Momentum) -> Twist {
        self.inertia_inv * p
    }

    /// d_H V_g, or zero without gravity.
    pub fn gravity_gradient(&self, h: &Pose) -> Wrench {
        self.gravity.map_or_else(Wrench::zeros, |g| g.gradient(h))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// E_kin = ½Pᵀ𝓘⁻¹P and E_pot = V_θ(H) of the active controller.
pub fn hamiltonian(body: &BodyParams, spec: &ControllerSpec, h: &Pose, p: &Momentum) -> Result<Energies> {
    let kinetic = 0.5 * p.dot(&body.twist(p));
    let potential = spec.potential(h)?;
    Ok(Energies { kinetic, potential, total: kinetic + potential })
}

/// (T, Ṗ) for a given external wrench.
pub fn rigid_body_rhs(body: &BodyParams, h: &Pose, p: &Momentum, w: &Wrench) -> (Twist, Momentum) {
    let t = body.twist(p);
    let pdot = se3::ad(&t).tr_mul(p) + (w - body.gravity_gradient(h));
    (t, pdot)
}
