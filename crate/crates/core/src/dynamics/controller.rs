//! Potential-shaping and damping-injection controllers,
//! W = −d_H V_θ(H) − B_θ(H, P)·P.

use nalgebra::{DVector, Matrix3, Matrix6, Vector3, Vector6};
use rand::Rng;

use super::BodyParams;
use crate::diff::{Activation, Architecture, MlpParams};
use crate::error::{ensure_finite, Error, Result};
use crate::lie::gradient::{intrinsic_gradient, perturbation_jacobian, perturbed_entries, EntryVector};
use crate::lie::se3::{Momentum, Pose, Wrench};
use crate::lie::so3;

pub const NN_HIDDEN: usize = 64;

/// V-net 12→64→1 (tanh, linear) and B-net 18→64→6 (softplus, linear).
pub fn nn_architectures() -> (Architecture, Architecture) {
    let v = Architecture::new(&[12, NN_HIDDEN, 1], &[Activation::Tanh, Activation::Linear]).expect("static");
    let b = Architecture::new(&[18, NN_HIDDEN, 6], &[Activation::Softplus, Activation::Linear]).expect("static");
    (v, b)
}

fn rot_block(e: &EntryVector) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| e[3 * a + b])
}

fn trans_block(e: &EntryVector) -> Vector3<f64> {
    Vector3::new(e[9], e[10], e[11])
}

fn pack(m: &Matrix3<f64>, v: &Vector3<f64>) -> EntryVector {
    let mut e = EntryVector::zeros();
    for a in 0..3 {
        for b in 0..3 {
            e[3 * a + b] = m[(a, b)];
        }
    }
    e.fixed_rows_mut::<3>(9).copy_from(v);
    e
}

/// Σ_k e_k ⟨g, entries(H Λ(e_k) Λ(c))⟩, the part of d_H⟨entries(HΛc), g⟩
/// coming from the moving contraction direction.
fn transport_term(h: &Pose, c: &Vector6<f64>, g: &EntryVector) -> Vector6<f64> {
    let r = h.r();
    let wc = so3::hat(&Vector3::new(c[0], c[1], c[2]));
    let vc = Vector3::new(c[3], c[4], c[5]);
    let mut out = Vector6::zeros();
    for k in 0..3 {
        let ek = Vector3::ith(k, 1.0);
        let m = r * so3::hat(&ek) * wc;
        let t = r * ek.cross(&vc);
        out[k] = pack(&m, &t).dot(g);
    }
    out
}

/// θ = (log K diag, log G diag, log B diag), 4 × 3 = 12 scalars with
/// K = diag(e^θ₁..₃), G = diag(e^θ₄..₆), B = diag(e^θ₇..₁₂).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticParams {
    pub theta: [f64; 12],
}

impl Default for QuadraticParams {
    fn default() -> Self {
        QuadraticParams { theta: [0.0; 12] }
    }
}

impl QuadraticParams {
    pub fn new(theta: [f64; 12]) -> Result<Self> {
        ensure_finite(&theta, "quadratic controller parameters")?;
        Ok(QuadraticParams { theta })
    }

    pub fn k(&self) -> Vector3<f64> {
        Vector3::from_fn(|i, _| self.theta[i].exp())
    }

    pub fn g(&self) -> Vector3<f64> {
        Vector3::from_fn(|i, _| self.theta[3 + i].exp())
    }

    pub fn b(&self) -> Vector6<f64> {
        Vector6::from_fn(|i, _| self.theta[6 + i].exp())
    }

    /// V_Q = ¼pᵀKp + ¼pᵀRKRᵀp − Tr(G(R − I)).
    pub fn potential(&self, h: &Pose) -> f64 {
        let (k, g) = (self.k(), self.g());
        let r = h.r();
        let rtp = r.transpose() * h.p;
        let quad = 0.25 * h.p.component_mul(&h.p).dot(&k) + 0.25 * rtp.component_mul(&rtp).dot(&k);
        let tr: f64 = (0..3).map(|i| g[i] * (r[(i, i)] - 1.0)).sum();
        quad - tr
    }

    /// ∂V/∂entries.
    pub fn entry_gradient(&self, h: &Pose) -> EntryVector {
        let kd = Matrix3::from_diagonal(&self.k());
        let r = h.r();
        let p = h.p;
        let gr = 0.5 * p * p.transpose() * r * kd - Matrix3::from_diagonal(&self.g());
        let gp = 0.5 * kd * p + 0.5 * r * kd * r.transpose() * p;
        pack(&gr, &gp)
    }

    /// ∂²V/∂entries² applied to `u`.
    pub fn entry_hvp(&self, h: &Pose, u: &EntryVector) -> EntryVector {
        let kd = Matrix3::from_diagonal(&self.k());
        let (r, p) = (h.r(), h.p);
        let (dr, dp) = (rot_block(u), trans_block(u));
        let hp = 0.5 * kd * dp + 0.5 * (dr * kd * r.transpose() * p + r * kd * dr.transpose() * p + r * kd * r.transpose() * dp);
        let hr = 0.5 * (dp * p.transpose() * r * kd + p * dp.transpose() * r * kd + p * p.transpose() * dr * kd);
        pack(&hr, &hp)
    }

    /// d_H V_Q in closed form.
    pub fn gradient(&self, h: &Pose) -> Wrench {
        intrinsic_gradient(h, &self.entry_gradient(h))
    }

    /// ∂/∂θ ⟨u, ∂V/∂entries⟩ for fixed u (only θ₁..θ₆ contribute).
    fn theta_grad_contraction(&self, h: &Pose, u: &EntryVector, out: &mut [f64]) {
        let (k, g) = (self.k(), self.g());
        let (r, p) = (h.r(), h.p);
        let (dr, dp) = (rot_block(u), trans_block(u));
        let rtp = r.transpose() * p;
        let rtdp = r.transpose() * dp;
        let drtp = dr.transpose() * p;
        for i in 0..3 {
            out[i] = 0.5 * k[i] * (dp[i] * p[i] + rtdp[i] * rtp[i] + drtp[i] * rtp[i]);
            out[3 + i] = -g[i] * dr[(i, i)];
        }
    }
}

#[derive(Clone, Debug)]
pub struct NnParams {
    pub v_net: MlpParams,
    pub b_net: MlpParams,
}

impl NnParams {
    pub fn new(v_net: MlpParams, b_net: MlpParams) -> Result<Self> {
        let (va, ba) = nn_architectures();
        if v_net.architecture() != va || b_net.architecture() != ba {
            return Err(Error::InvalidParameter("NN controller architecture must be 12-64-1 tanh/linear and 18-64-6 softplus/linear".into()));
        }
        Ok(NnParams { v_net, b_net })
    }

    pub fn zeros() -> Self {
        let (va, ba) = nn_architectures();
        NnParams { v_net: MlpParams::zeros(&va), b_net: MlpParams::zeros(&ba) }
    }

    pub fn xavier<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let (va, ba) = nn_architectures();
        NnParams { v_net: MlpParams::xavier(&va, rng), b_net: MlpParams::xavier(&ba, rng) }
    }

    fn v_input(h: &Pose) -> DVector<f64> {
        DVector::from_column_slice(h.entries().as_slice())
    }

    fn b_input(h: &Pose, p: &Momentum) -> DVector<f64> {
        let mut z = DVector::zeros(18);
        z.rows_mut(0, 12).copy_from_slice(h.entries().as_slice());
        z.rows_mut(12, 6).copy_from_slice(p.as_slice());
        z
    }

    pub fn potential(&self, h: &Pose) -> Result<f64> {
        Ok(self.v_net.forward(&Self::v_input(h))?[0])
    }

    pub fn gradient(&self, h: &Pose) -> Result<Wrench> {
        let g = self.v_net.vjp(&Self::v_input(h), &DVector::from_element(1, 1.0))?;
        Ok(intrinsic_gradient(h, &EntryVector::from_column_slice(g.as_slice())))
    }

    /// Diagonal of B = diag(exp(b_net(R, p, P))).
    pub fn damping(&self, h: &Pose, p: &Momentum) -> Result<Vector6<f64>> {
        let y = self.b_net.forward(&Self::b_input(h, p))?;
        Ok(Vector6::from_fn(|i, _| y[i].exp()))
    }
}

#[derive(Clone, Debug)]
pub enum Controller {
    Quadratic(QuadraticParams),
    Nn(NnParams),
    /// No control action; used for free-body reference runs.
    Free,
}

#[derive(Clone, Debug)]
pub struct ControllerSpec {
    pub controller: Controller,
    pub gravity_compensation: bool,
}

/// Decomposition of the applied wrench.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WrenchParts {
    /// −d_H V_θ
    pub potential: Wrench,
    /// −B_θ P
    pub damping: Wrench,
    /// W_θ = potential + damping
    pub controller: Wrench,
    /// d_H V_g when compensation is on, else zero.
    pub compensation: Wrench,
    pub total: Wrench,
}

/// Derivatives of cᵀW_θ(H, P) for a fixed covector c.
#[derive(Clone, Debug)]
pub struct WrenchVjp {
    pub d_h: Vector6<f64>,
    pub d_p: Vector6<f64>,
    pub d_theta: DVector<f64>,
}

impl ControllerSpec {
    pub fn new(controller: Controller, gravity_compensation: bool) -> Self {
        ControllerSpec { controller, gravity_compensation }
    }

    pub fn free() -> Self {
        Self::new(Controller::Free, false)
    }

    pub fn quadratic(params: QuadraticParams) -> Self {
        Self::new(Controller::Quadratic(params), false)
    }

    pub fn nn(params: NnParams) -> Self {
        Self::new(Controller::Nn(params), false)
    }

    pub fn kind(&self) -> &'static str {
        match self.controller {
            Controller::Quadratic(_) => "quadratic",
            Controller::Nn(_) => "nn",
            Controller::Free => "free",
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.controller {
            Controller::Quadratic(_) => 12,
            Controller::Nn(n) => n.v_net.param_count() + n.b_net.param_count(),
            Controller::Free => 0,
        }
    }

    /// Flat parameters: θ₁..θ₁₂, or V-net then B-net.
    pub fn params(&self) -> Vec<f64> {
        match &self.controller {
            Controller::Quadratic(q) => q.theta.to_vec(),
            Controller::Nn(n) => {
                let mut v = n.v_net.flatten();
                v.extend(n.b_net.flatten());
                v
            }
            Controller::Free => Vec::new(),
        }
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: flat.len() });
        }
        ensure_finite(flat, "controller parameters")?;
        match &mut self.controller {
            Controller::Quadratic(q) => q.theta.copy_from_slice(flat),
            Controller::Nn(n) => {
                let nv = n.v_net.param_count();
                n.v_net.set_flat(&flat[..nv])?;
                n.b_net.set_flat(&flat[nv..])?;
            }
            Controller::Free => {}
        }
        Ok(())
    }

    pub fn with_params(&self, flat: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.set_params(flat)?;
        Ok(s)
    }

    pub fn potential(&self, h: &Pose) -> Result<f64> {
        match &self.controller {
            Controller::Quadratic(q) => Ok(q.potential(h)),
            Controller::Nn(n) => n.potential(h),
            Controller::Free => Ok(0.0),
        }
    }

    /// d_H V_θ.
    pub fn potential_gradient(&self, h: &Pose) -> Result<Wrench> {
        match &self.controller {
            Controller::Quadratic(q) => Ok(q.gradient(h)),
            Controller::Nn(n) => n.gradient(h),
            Controller::Free => Ok(Wrench::zeros()),
        }
    }

    /// Diagonal of B_θ(H, P).
    pub fn damping(&self, h: &Pose, p: &Momentum) -> Result<Vector6<f64>> {
        match &self.controller {
            Controller::Quadratic(q) => Ok(q.b()),
            Controller::Nn(n) => n.damping(h, p),
            Controller::Free => Ok(Vector6::zeros()),
        }
    }

    pub fn wrench(&self, body: &BodyParams, h: &Pose, p: &Momentum) -> Result<WrenchParts> {
        let potential = -self.potential_gradient(h)?;
        let damping = -self.damping(h, p)?.component_mul(p);
        let controller = potential + damping;
        let compensation = if self.gravity_compensation { body.gravity_gradient(h) } else { Wrench::zeros() };
        let total = controller + compensation;
        ensure_finite(total.as_slice(), "control wrench")?;
        Ok(WrenchParts { potential, damping, controller, compensation, total })
    }

    /// d_H, d_P and (optionally) ∂/∂θ of cᵀW_θ(H, P).
    pub fn wrench_vjp(&self, h: &Pose, p: &Momentum, c: &Vector6<f64>, with_params: bool) -> Result<WrenchVjp> {
        let n = if with_params { self.param_count() } else { 0 };
        let mut d_theta = DVector::zeros(n);
        let u = perturbed_entries(h, c);
        let out = match &self.controller {
            Controller::Free => WrenchVjp { d_h: Vector6::zeros(), d_p: Vector6::zeros(), d_theta },
            Controller::Quadratic(q) => {
                let g = q.entry_gradient(h);
                let hu = q.entry_hvp(h, &u);
                let d_h = -(perturbation_jacobian(h).transpose() * hu + transport_term(h, c, &g));
                let b = q.b();
                let d_p = -b.component_mul(c);
                if with_params {
                    q.theta_grad_contraction(h, &u, &mut d_theta.as_mut_slice()[..6]);
                    for i in 0..6 {
                        d_theta[i] = -d_theta[i];
                        d_theta[6 + i] = -b[i] * c[i] * p[i];
                    }
                }
                WrenchVjp { d_h, d_p, d_theta }
            }
            Controller::Nn(nn) => {
                let x = NnParams::v_input(h);
                let so = nn.v_net.second_order(&x, &DVector::from_element(1, 1.0), &DVector::from_column_slice(u.as_slice()), with_params)?;
                let g = EntryVector::from_column_slice(so.gradient.as_slice());
                let hu = EntryVector::from_column_slice(so.hvp.as_slice());
                let jt = perturbation_jacobian(h).transpose();
                let mut d_h = -(jt * hu + transport_term(h, c, &g));

                let z = NnParams::b_input(h, p);
                let tr = nn.b_net.trace(&z)?;
                let y = tr.output();
                let eb = Vector6::from_fn(|i, _| y[i].exp());
                let seed = DVector::from_fn(6, |i, _| -c[i] * eb[i] * p[i]);
                let back = nn.b_net.backward(&tr, &seed, with_params)?;
                d_h += jt * EntryVector::from_column_slice(&back.input.as_slice()[..12]);
                let d_p = Vector6::from_fn(|i, _| back.input[12 + i] - c[i] * eb[i]);
                if with_params {
                    let nv = nn.v_net.param_count();
                    for (i, v) in so.params.iter().enumerate() {
                        d_theta[i] = -v;
                    }
                    d_theta.rows_mut(nv, back.params.len()).copy_from(&back.params);
                }
                WrenchVjp { d_h, d_p, d_theta }
            }
        };
        ensure_finite(out.d_h.as_slice(), "wrench derivative")?;
        ensure_finite(out.d_p.as_slice(), "wrench derivative")?;
        ensure_finite(out.d_theta.as_slice(), "wrench parameter derivative")?;
        Ok(out)
    }
}

/// Closed-form V_Q.
pub fn quadratic_potential(params: &QuadraticParams, h: &Pose) -> f64 {
    params.potential(h)
}

pub fn nn_potential(params: &NnParams, h: &Pose) -> Result<f64> {
    params.potential(h)
}

pub fn nn_damping(params: &NnParams, h: &Pose, p: &Momentum) -> Result<Matrix6<f64>> {
    Ok(Matrix6::from_diagonal(&params.damping(h, p)?))
}

/// Total applied wrench, including gravity compensation when enabled.
pub fn control_wrench(spec: &ControllerSpec, body: &BodyParams, h: &Pose, p: &Momentum) -> Result<Wrench> {
    Ok(spec.wrench(body, h, p)?.total)
}
