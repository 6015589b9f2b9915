//! Momentum-only reduction: the pose is pinned and the state lives on the
//! abelian group Vec(6), where ad vanishes and the adjoint method is the
//! classical ℝⁿ one.

use nalgebra::{DVector, SVector, Vector6};

use super::{final_cost, running_cost, CoState, CostSpec, GradientResult};
use crate::dynamics::{BodyParams, ControllerSpec};
use crate::error::{Error, Result};
use crate::integrate::{integrate_rn, lie_integrate, LieOptions, SolverConfig};
use crate::lie::se3::{self, Momentum, Pose};
use crate::lie::vecn::{self, VecElement};
use crate::lie::ProductElement;

/// Ṗ = ad_{𝓘⁻¹P}ᵀP + W_θ(H₀, P) − d_H V_g(H₀) with H₀ fixed.
#[derive(Clone, Debug)]
pub struct MomentumProblem {
    pub cost: CostSpec,
    pub controller: ControllerSpec,
    pub body: BodyParams,
    pub pose: Pose,
}

impl MomentumProblem {
    pub fn field(&self, p: &Momentum) -> Result<(Momentum, se3::Wrench)> {
        let w = self.controller.wrench(&self.body, &self.pose, p)?.total;
        Ok((crate::dynamics::rigid_body_rhs(&self.body, &self.pose, p, &w).1, w))
    }

    fn element(&self, p: &Momentum) -> ProductElement {
        ProductElement::new(self.pose, *p)
    }
}

fn to_mom(g: &VecElement<6>) -> Momentum {
    Momentum::from_column_slice(g.0.as_slice())
}

pub fn momentum_cost_and_gradient(prob: &MomentumProblem, p0: &Momentum, cfg: &SolverConfig) -> Result<GradientResult> {
    let horizon = prob.cost.horizon;
    let spec = &prob.cost;
    let w9 = spec.weights[8];
    let field = |_t: f64, g: &VecElement<6>| -> Result<(DVector<f64>, DVector<f64>)> {
        let p = to_mom(g);
        let (pdot, w) = prob.field(&p)?;
        let r = running_cost(spec, &prob.element(&p), &w);
        Ok((DVector::from_column_slice(pdot.as_slice()), DVector::from_element(1, r)))
    };
    let g0 = VecElement::<6>(SVector::from_column_slice(p0.as_slice()));
    let traj = lie_integrate(field, &g0, &DVector::zeros(1), 0.0, horizon, cfg, &LieOptions::default())?;
    let pt = to_mom(&traj.final_element::<VecElement<6>>()?);
    let terminal_cost = final_cost(spec, &prob.element(&pt));
    let integral_cost = traj.final_aux()[0];

    let n = prob.controller.param_count();
    let mut y0 = DVector::zeros(6 + n);
    y0.rows_mut(0, 6).copy_from(&super::terminal_costate(spec, &prob.element(&pt)).lambda_p);
    let y_end = if horizon > 0.0 {
        let body = &prob.body;
        let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let g: VecElement<6> = traj.element_at(t)?;
            let p = to_mom(&g);
            let lam = Momentum::from_column_slice(&y.as_slice()[..6]);
            let (pdot, w) = prob.field(&p)?;
            let c = lam + 2.0 * w9 * w;
            let vjp = prob.controller.wrench_vjp(&prob.pose, &p, &c, true)?;
            let tw = body.twist(&p);
            let (aw, av) = se3::split(&p);
            let dr = se3::join(&(2.0 * spec.weights[6] * aw), &(2.0 * spec.weights[7] * av));
            let dp = se3::ad(&tw) * lam - body.inertia_inv() * se3::ad(&lam).tr_mul(&p) + vjp.d_p + dr;
            // ad of the abelian algebra is zero; kept for the general form.
            let ad = vecn::ad(&DVector::from_column_slice(pdot.as_slice()));
            let lam_dot = -DVector::from_column_slice(dp.as_slice()) + ad.tr_mul(&DVector::from_column_slice(lam.as_slice()));
            let mut dy = DVector::zeros(6 + n);
            dy.rows_mut(0, 6).copy_from(&lam_dot);
            dy.rows_mut(6, n).copy_from(&(-vjp.d_theta));
            Ok(dy)
        };
        integrate_rn(rhs, &y0, horizon, 0.0, cfg)?.last().clone()
    } else {
        y0
    };
    let grad = y_end.rows(6, n).into_owned();
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("momentum-only parameter gradient".into()));
    }
    Ok(GradientResult {
        grad,
        cost: terminal_cost + integral_cost,
        terminal_cost,
        integral_cost,
        initial_costate: CoState { lambda_h: Vector6::zeros(), lambda_p: Vector6::from_column_slice(&y_end.as_slice()[..6]) },
    })
}
