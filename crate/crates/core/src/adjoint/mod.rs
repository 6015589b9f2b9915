//! Generalized adjoint method on SE(3) × ℝ⁶.
//!
//! Forward: ġ = g·Λ(f̃(g)) with the running cost carried as an auxiliary
//! quadrature state. Backward: the co-state λ = (λ_H, λ_P) ∈ ℝ¹² solves
//! λ̇ = −d_g(λᵀf̃ + r) + ad_{f̃}ᵀλ from λ(T) = d_g F, and the parameter
//! gradient is ∫₀ᵀ ∂/∂θ(λᵀf̃ + r) dt.

mod flat;

pub use flat::{momentum_cost_and_gradient, MomentumProblem};

use nalgebra::{DVector, Vector6};

use crate::dynamics::{BodyParams, ControllerSpec};
use crate::error::{Error, Result};
use crate::integrate::{integrate_rn, lie_integrate, ChartTrajectory, LieOptions, SolverConfig};
use crate::lie::gradient::{intrinsic_gradient, EntryVector};
use crate::lie::se3::{self, Momentum, Pose, Wrench};
use crate::lie::ProductElement;

#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    pub goal: Pose,
    /// w₁..w₉.
    pub weights: [f64; 9],
    pub horizon: f64,
}

impl CostSpec {
    /// Weights must be finite and nonnegative; a zero horizon is allowed
    /// and reduces the problem to the terminal cost.
    pub fn new(goal: Pose, weights: [f64; 9], horizon: f64) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("cost weight w{} must be finite and ≥ 0", i + 1)));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be finite and ≥ 0 (got {horizon})")));
        }
        Ok(CostSpec { goal, weights, horizon })
    }

    fn w(&self, i: usize) -> f64 {
        self.weights[i - 1]
    }

    /// H_F⁻¹H.
    pub fn error(&self, h: &Pose) -> Pose {
        self.goal.inverse().compose_raw(h)
    }

    /// −a·Tr(H_F⁻¹H) + b·‖d‖² and its left-trivialized differential.
    fn pose_terms(&self, h: &Pose, a: f64, b: f64) -> (f64, Vector6<f64>) {
        let e = self.error(h);
        let d = e.p;
        let tr = e.r().trace() + 1.0;
        let mut g = EntryVector::zeros();
        for i in 0..3 {
            g[4 * i] = -a;
        }
        g.fixed_rows_mut::<3>(9).copy_from(&(2.0 * b * d));
        (-a * tr + b * d.norm_squared(), intrinsic_gradient(&e, &g))
    }

    fn momentum_terms(a: f64, b: f64, p: &Momentum) -> (f64, Vector6<f64>) {
        let (w, v) = se3::split(p);
        let val = a * w.norm_squared() + b * v.norm_squared();
        (val, se3::join(&(2.0 * a * w), &(2.0 * b * v)))
    }
}

/// Co-state (λ_H, λ_P).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoState {
    pub lambda_h: Vector6<f64>,
    pub lambda_p: Vector6<f64>,
}

impl CoState {
    pub fn zeros() -> Self {
        CoState { lambda_h: Vector6::zeros(), lambda_p: Vector6::zeros() }
    }

    pub fn to_vec(&self) -> DVector<f64> {
        let mut v = DVector::zeros(12);
        v.rows_mut(0, 6).copy_from(&self.lambda_h);
        v.rows_mut(6, 6).copy_from(&self.lambda_p);
        v
    }

    pub fn from_slice(s: &[f64]) -> Self {
        CoState {
            lambda_h: Vector6::from_column_slice(&s[..6]),
            lambda_p: Vector6::from_column_slice(&s[6..12]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientResult {
    pub grad: DVector<f64>,
    pub cost: f64,
    pub terminal_cost: f64,
    pub integral_cost: f64,
    /// λ(0), the differential of the cost with respect to Γ₀.
    pub initial_costate: CoState,
}

/// F = −w₁Tr(H_F⁻¹H) + w₂‖d‖² + w₃‖P_ω‖² + w₄‖P_v‖².
pub fn final_cost(spec: &CostSpec, g: &ProductElement) -> f64 {
    spec.pose_terms(&g.pose, spec.w(1), spec.w(2)).0 + CostSpec::momentum_terms(spec.w(3), spec.w(4), &g.mom).0
}

/// r = −w₅Tr(H_F⁻¹H) + w₆‖d‖² + w₇‖P_ω‖² + w₈‖P_v‖² + w₉‖W‖².
pub fn running_cost(spec: &CostSpec, g: &ProductElement, w: &Wrench) -> f64 {
    spec.pose_terms(&g.pose, spec.w(5), spec.w(6)).0
        + CostSpec::momentum_terms(spec.w(7), spec.w(8), &g.mom).0
        + spec.w(9) * w.norm_squared()
}

/// λ(T) = d_g F.
pub fn terminal_costate(spec: &CostSpec, g: &ProductElement) -> CoState {
    CoState {
        lambda_h: spec.pose_terms(&g.pose, spec.w(1), spec.w(2)).1,
        lambda_p: CostSpec::momentum_terms(spec.w(3), spec.w(4), &g.mom).1,
    }
}

/// Closed-loop algebra field (T; Ṗ) and the total applied wrench.
pub fn closed_loop_field(ctrl: &ControllerSpec, body: &BodyParams, g: &ProductElement) -> Result<(Vector6<f64>, Momentum, Wrench)> {
    let w = ctrl.wrench(body, &g.pose, &g.mom)?.total;
    let (t, pdot) = crate::dynamics::rigid_body_rhs(body, &g.pose, &g.mom, &w);
    Ok((t, pdot, w))
}

fn state_dump(t: f64, g: &ProductElement) -> String {
    format!("t = {t}, R = {:?}, p = {:?}, P = {:?}", g.pose.r().as_slice(), g.pose.p.as_slice(), g.mom.as_slice())
}

/// λ̇ and, when requested, the θ-integrand ∂/∂θ(λᵀf̃ + r).
fn costate_rate(
    spec: &CostSpec,
    ctrl: &ControllerSpec,
    body: &BodyParams,
    g: &ProductElement,
    lam: &CoState,
    with_params: bool,
) -> Result<(CoState, DVector<f64>)> {
    let (h, p) = (&g.pose, &g.mom);
    let (lh, lp) = (&lam.lambda_h, &lam.lambda_p);
    let t = body.twist(p);
    let w = ctrl.wrench(body, h, p)?.total;

    // cᵀW collects λ_Pᵀ W from the dynamics and w₉‖W‖² from r.
    let c = lp + 2.0 * spec.w(9) * w;
    let vjp = ctrl.wrench_vjp(h, p, &c, with_params)?;

    let mut dh = vjp.d_h + spec.pose_terms(h, spec.w(5), spec.w(6)).1;
    if let Some(grav) = &body.gravity {
        if ctrl.gravity_compensation {
            dh += grav.gradient_vjp(h, &c);
        }
        dh -= grav.gradient_vjp(h, lp);
    }
    let ad_t = se3::ad(&t);
    let dp = body.inertia_inv() * lh + ad_t * lp - body.inertia_inv() * se3::ad(lp).tr_mul(p)
        + vjp.d_p
        + CostSpec::momentum_terms(spec.w(7), spec.w(8), p).1;

    let rate = CoState { lambda_h: -dh + ad_t.tr_mul(lh), lambda_p: -dp };
    Ok((rate, vjp.d_theta))
}

/// λ̇ at the state g.
pub fn costate_rhs(spec: &CostSpec, ctrl: &ControllerSpec, body: &BodyParams, g: &ProductElement, lam: &CoState) -> Result<CoState> {
    costate_rate(spec, ctrl, body, g, lam, false).map(|r| r.0)
}

/// Forward closed-loop solve with the running cost as auxiliary state.
pub fn simulate(
    spec: &CostSpec,
    ctrl: &ControllerSpec,
    body: &BodyParams,
    g0: &ProductElement,
    t_end: f64,
    cfg: &SolverConfig,
    opts: &LieOptions,
) -> Result<ChartTrajectory> {
    let field = |t: f64, g: &ProductElement| -> Result<(DVector<f64>, DVector<f64>)> {
        let (tw, pdot, w) = closed_loop_field(ctrl, body, g).map_err(|e| annotate(e, t, g))?;
        let mut f = DVector::zeros(12);
        f.rows_mut(0, 6).copy_from(&tw);
        f.rows_mut(6, 6).copy_from(&pdot);
        let r = running_cost(spec, g, &w);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("running cost at {}", state_dump(t, g))));
        }
        Ok((f, DVector::from_element(1, r)))
    };
    lie_integrate(field, g0, &DVector::zeros(1), 0.0, t_end, cfg, opts)
}

fn annotate(e: Error, t: f64, g: &ProductElement) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} at {}", state_dump(t, g))),
        other => other,
    }
}

/// Total cost C = F(Γ(T)) + ∫₀ᵀ r dt without the gradient.
pub fn cost(spec: &CostSpec, ctrl: &ControllerSpec, body: &BodyParams, g0: &ProductElement, cfg: &SolverConfig) -> Result<GradientResult> {
    let traj = simulate(spec, ctrl, body, g0, spec.horizon, cfg, &LieOptions::default())?;
    let gt: ProductElement = traj.final_element()?;
    let terminal_cost = final_cost(spec, &gt);
    let integral_cost = traj.final_aux()[0];
    Ok(GradientResult {
        grad: DVector::zeros(0),
        cost: terminal_cost + integral_cost,
        terminal_cost,
        integral_cost,
        initial_costate: CoState::zeros(),
    })
}

pub fn cost_and_gradient(
    spec: &CostSpec,
    ctrl: &ControllerSpec,
    body: &BodyParams,
    g0: &ProductElement,
    cfg: &SolverConfig,
) -> Result<GradientResult> {
    cost_and_gradient_with(spec, ctrl, body, g0, cfg, &LieOptions::default())
}

/// As [`cost_and_gradient`], with control over the forward chart choice.
pub fn cost_and_gradient_with(
    spec: &CostSpec,
    ctrl: &ControllerSpec,
    body: &BodyParams,
    g0: &ProductElement,
    cfg: &SolverConfig,
    opts: &LieOptions,
) -> Result<GradientResult> {
    let horizon = spec.horizon;
    let traj = simulate(spec, ctrl, body, g0, horizon, cfg, opts)?;
    let gt: ProductElement = traj.final_element()?;
    let terminal_cost = final_cost(spec, &gt);
    let integral_cost = traj.final_aux()[0];
    let n = ctrl.param_count();

    let mut y0 = DVector::zeros(12 + n);
    y0.rows_mut(0, 12).copy_from(&terminal_costate(spec, &gt).to_vec());
    let y_end = if horizon > 0.0 {
        let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
            let g: ProductElement = traj.element_at(t)?;
            let lam = CoState::from_slice(&y.as_slice()[..12]);
            let (rate, dtheta) = costate_rate(spec, ctrl, body, &g, &lam, true).map_err(|e| annotate(e, t, &g))?;
            let mut dy = DVector::zeros(12 + n);
            dy.rows_mut(0, 12).copy_from(&rate.to_vec());
            // Backward in time: the accumulator grows by ∫ φ dt from T to 0.
            dy.rows_mut(12, n).copy_from(&(-dtheta));
            Ok(dy)
        };
        integrate_rn(rhs, &y0, horizon, 0.0, cfg)?.last().clone()
    } else {
        y0
    };
    let grad = y_end.rows(12, n).into_owned();
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("parameter gradient from initial {}", state_dump(0.0, g0))));
    }
    Ok(GradientResult {
        grad,
        cost: terminal_cost + integral_cost,
        terminal_cost,
        integral_cost,
        initial_costate: CoState::from_slice(&y_end.as_slice()[..12]),
    })
}

/// Angle ‖log(R_Fᵀ R)‖ and distance ‖p − p_F‖ to the goal.
pub fn goal_errors(spec: &CostSpec, h: &Pose) -> (f64, f64) {
    let rel = spec.goal.rot.transpose().compose_raw(&h.rot);
    (rel.angle(), (h.p - spec.goal.p).norm())
}
