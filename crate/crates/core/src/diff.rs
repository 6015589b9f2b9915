//! Small feed-forward networks with exact first and directional second
//! derivatives.
//!
//! Gradients come from a layerwise reverse pass. Second-order quantities
//! (Hessian-vector products and ∂/∂θ of an input-gradient contraction) come
//! from pushing a forward-mode tangent through that same reverse pass.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
    Linear,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => {
                if z > 20.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                }
            }
            Activation::Linear => z,
        }
    }

    /// (σ′(z), σ″(z)).
    pub fn derivs(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d = 1.0 - t * t;
                (d, -2.0 * t * d)
            }
            Activation::Softplus => {
                let s = sigmoid(z);
                (s, s * (1.0 - s))
            }
            Activation::Linear => (1.0, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// out × in
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub act: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Architecture descriptor: layer widths and one activation per layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub dims: Vec<usize>,
    pub acts: Vec<Activation>,
}

impl Architecture {
    pub fn new(dims: &[usize], acts: &[Activation]) -> Result<Self> {
        if dims.len() < 2 || acts.len() != dims.len() - 1 || dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "bad architecture: {} widths, {} activations",
                dims.len(),
                acts.len()
            )));
        }
        Ok(Architecture { dims: dims.to_vec(), acts: acts.to_vec() })
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|d| d[1] * d[0] + d[1]).sum()
    }
}

/// Value and input Jacobian of a network at one point.
#[derive(Clone, Debug)]
pub struct DiffResult {
    pub value: DVector<f64>,
    pub input_jacobian: DMatrix<f64>,
}

/// Forward activations, kept for the reverse pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// a₀ = x, a₁, …, a_L
    acts: Vec<DVector<f64>>,
    /// z₁, …, z_L
    pre: Vec<DVector<f64>>,
}

impl Trace {
    pub fn output(&self) -> &DVector<f64> {
        self.acts.last().expect("trace")
    }
}

/// Gradients with respect to the input and every parameter.
#[derive(Clone, Debug)]
pub struct Backward {
    pub input: DVector<f64>,
    pub params: DVector<f64>,
}

/// Result of the forward-over-reverse pass along an input direction u:
/// `hvp` = ∂/∂x (seedᵀ ∂y/∂x · u) and `params` = ∂/∂θ (seedᵀ ∂y/∂x · u).
#[derive(Clone, Debug)]
pub struct SecondOrder {
    pub gradient: DVector<f64>,
    pub hvp: DVector<f64>,
    pub params: DVector<f64>,
}

impl MlpParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let layers = arch
            .dims
            .windows(2)
            .zip(&arch.acts)
            .map(|(d, act)| Layer { w: DMatrix::zeros(d[1], d[0]), b: DVector::zeros(d[1]), act: *act })
            .collect();
        MlpParams { layers }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        for layer in &mut net.layers {
            let (o, i) = layer.w.shape();
            let a = (6.0 / (i + o) as f64).sqrt();
            for v in layer.w.iter_mut() {
                *v = rng.random_range(-a..a);
            }
        }
        net
    }

    pub fn architecture(&self) -> Architecture {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.b.len()));
        Architecture { dims, acts: self.layers.iter().map(|l| l.act).collect() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("layer").b.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for r in 0..l.w.nrows() {
                out.extend(l.w.row(r).iter());
            }
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), got: flat.len() });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let (o, i) = l.w.shape();
            for r in 0..o {
                for c in 0..i {
                    l.w[(r, c)] = flat[k];
                    k += 1;
                }
            }
            for r in 0..o {
                l.b[r] = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    pub fn from_flat(arch: &Architecture, flat: &[f64]) -> Result<Self> {
        let mut net = Self::zeros(arch);
        net.set_flat(flat)?;
        Ok(net)
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    fn check_seed(&self, s: &DVector<f64>) -> Result<()> {
        if s.len() != self.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), got: s.len() });
        }
        Ok(())
    }

    pub fn trace(&self, x: &DVector<f64>) -> Result<Trace> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        for l in &self.layers {
            let z = &l.w * acts.last().expect("act") + &l.b;
            acts.push(z.map(|v| l.act.eval(v)));
            pre.push(z);
        }
        Ok(Trace { acts, pre })
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.trace(x)?.acts.pop().expect("act"))
    }

    /// Reverse pass of seedᵀ·y for a recorded trace.
    pub fn backward(&self, tr: &Trace, seed: &DVector<f64>, with_params: bool) -> Result<Backward> {
        self.check_seed(seed)?;
        let mut params = if with_params { DVector::zeros(self.param_count()) } else { DVector::zeros(0) };
        let mut offset = self.param_count();
        let mut abar = seed.clone();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let zbar = DVector::from_fn(abar.len(), |i, _| l.act.derivs(tr.pre[li][i]).0 * abar[i]);
            let (o, i) = l.w.shape();
            offset -= o * i + o;
            if with_params {
                let a_in = &tr.acts[li];
                for r in 0..o {
                    for c in 0..i {
                        params[offset + r * i + c] = zbar[r] * a_in[c];
                    }
                    params[offset + o * i + r] = zbar[r];
                }
            }
            abar = l.w.tr_mul(&zbar);
        }
        Ok(Backward { input: abar, params })
    }

    /// seedᵀ ∂y/∂x.
    pub fn vjp(&self, x: &DVector<f64>, seed: &DVector<f64>) -> Result<DVector<f64>> {
        self.backward(&self.trace(x)?, seed, false).map(|b| b.input)
    }

    /// ∂(seedᵀ y)/∂θ, flattened as in [`MlpParams::flatten`].
    pub fn param_gradient(&self, x: &DVector<f64>, seed: &DVector<f64>) -> Result<DVector<f64>> {
        self.backward(&self.trace(x)?, seed, true).map(|b| b.params)
    }

    pub fn input_gradient(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.evaluate(x).map(|r| r.input_jacobian)
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DiffResult> {
        let tr = self.trace(x)?;
        let m = self.output_dim();
        let mut jac = DMatrix::zeros(m, self.input_dim());
        for k in 0..m {
            let g = self.backward(&tr, &DVector::from_fn(m, |i, _| if i == k { 1.0 } else { 0.0 }), false)?;
            jac.row_mut(k).copy_from(&g.input.transpose());
        }
        Ok(DiffResult { value: tr.acts.last().expect("act").clone(), input_jacobian: jac })
    }

    /// Forward-over-reverse along input direction `u` for the scalar
    /// function seedᵀ y(x).
    pub fn second_order(&self, x: &DVector<f64>, seed: &DVector<f64>, u: &DVector<f64>, with_params: bool) -> Result<SecondOrder> {
        self.check_input(u)?;
        let tr = self.trace(x)?;
        self.check_seed(seed)?;
        let nl = self.layers.len();
        // Forward tangents ȧ_l, ż_l.
        let mut adot = Vec::with_capacity(nl + 1);
        let mut zdot = Vec::with_capacity(nl);
        adot.push(u.clone());
        for (li, l) in self.layers.iter().enumerate() {
            let zd = &l.w * &adot[li];
            let ad = DVector::from_fn(zd.len(), |i, _| l.act.derivs(tr.pre[li][i]).0 * zd[i]);
            zdot.push(zd);
            adot.push(ad);
        }
        let mut params = if with_params { DVector::zeros(self.param_count()) } else { DVector::zeros(0) };
        let mut offset = self.param_count();
        let mut abar = seed.clone();
        let mut abar_dot = DVector::zeros(seed.len());
        for (li, l) in self.layers.iter().enumerate().rev() {
            let n = abar.len();
            let mut zbar = DVector::zeros(n);
            let mut zbar_dot = DVector::zeros(n);
            for i in 0..n {
                let (d1, d2) = l.act.derivs(tr.pre[li][i]);
                zbar[i] = d1 * abar[i];
                zbar_dot[i] = d2 * zdot[li][i] * abar[i] + d1 * abar_dot[i];
            }
            let (o, ic) = l.w.shape();
            offset -= o * ic + o;
            if with_params {
                let a_in = &tr.acts[li];
                let a_in_dot = &adot[li];
                for r in 0..o {
                    for c in 0..ic {
                        params[offset + r * ic + c] = zbar_dot[r] * a_in[c] + zbar[r] * a_in_dot[c];
                    }
                    params[offset + o * ic + r] = zbar_dot[r];
                }
            }
            abar = l.w.tr_mul(&zbar);
            abar_dot = l.w.tr_mul(&zbar_dot);
        }
        Ok(SecondOrder { gradient: abar, hvp: abar_dot, params })
    }

    /// ∂/∂x (wᵀ ∂f/∂x) for a scalar network, i.e. the Hessian applied to w.
    pub fn directional_second(&self, x: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.scalar_seed()
            .and_then(|s| self.second_order(x, &s, w, false))
            .map(|r| r.hvp)
    }

    /// ∂/∂θ (wᵀ ∂f/∂x) for a scalar network.
    pub fn param_gradient_of_input_gradient(&self, x: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.scalar_seed()
            .and_then(|s| self.second_order(x, &s, w, true))
            .map(|r| r.params)
    }

    fn scalar_seed(&self) -> Result<DVector<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::InvalidParameter("second derivatives need a scalar network".into()));
        }
        Ok(DVector::from_element(1, 1.0))
    }
}
