//! Forward-sensitivity gradient for the momentum-only problem on ℝ⁶ with a
//! quadratic controller: the pose is frozen, so only P and S = ∂P/∂θ evolve.

use super::rigid::{quadratic_entry_grad, right_gradient};

pub struct FlatProblem {
    pub inertia: [f64; 6],
    pub weights: [f64; 9],
    /// Pinned pose entries (R row-major, p).
    pub pose: [f64; 12],
    pub horizon: f64,
    pub steps: usize,
}

/// [[ΛP_ω, ΛP_v], [ΛP_v, 0]], so that ad_Tᵀ P = C(P) T.
fn coadjoint(p: &[f64; 6]) -> [[f64; 6]; 6] {
    let hat = |a: f64, b: f64, c: f64| [[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]];
    let hw = hat(p[0], p[1], p[2]);
    let hv = hat(p[3], p[4], p[5]);
    let mut c = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = hw[i][j];
            c[i][3 + j] = hv[i][j];
            c[3 + i][j] = hv[i][j];
        }
    }
    c
}

/// ad_T as a 6×6 matrix for T = (ω; v).
fn ad(t: &[f64; 6]) -> [[f64; 6]; 6] {
    let hat = |a: f64, b: f64, c: f64| [[0.0, -c, b], [c, 0.0, -a], [-b, a, 0.0]];
    let hw = hat(t[0], t[1], t[2]);
    let hv = hat(t[3], t[4], t[5]);
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = hw[i][j];
            m[3 + i][3 + j] = hw[i][j];
            m[3 + i][j] = hv[i][j];
        }
    }
    m
}

const N: usize = 6 + 72 + 12 + 1;

impl FlatProblem {
    fn potential_parts(&self, theta: &[f64; 12]) -> ([f64; 6], [[f64; 6]; 6]) {
        let k: [f64; 3] = std::array::from_fn(|i| theta[i].exp());
        let g: [f64; 3] = std::array::from_fn(|i| theta[3 + i].exp());
        let grad = right_gradient(&self.pose, &quadratic_entry_grad(k, g, &self.pose));
        // V is linear in (K, G) = e^θ, so ∂/∂θ_j of the gradient is the
        // gradient with every other coefficient zeroed.
        let mut dgrad = [[0.0; 6]; 6];
        for j in 0..6 {
            let mut kk = [0.0; 3];
            let mut gg = [0.0; 3];
            if j < 3 {
                kk[j] = k[j];
            } else {
                gg[j - 3] = g[j - 3];
            }
            let col = right_gradient(&self.pose, &quadratic_entry_grad(kk, gg, &self.pose));
            for i in 0..6 {
                dgrad[i][j] = col[i];
            }
        }
        (grad, dgrad)
    }

    /// y = [P, S (6×12 row-major), ∫∂r/∂θ·, J].
    fn rhs(&self, theta: &[f64; 12], grad: &[f64; 6], dgrad: &[[f64; 6]; 6], y: &[f64; N]) -> [f64; N] {
        let w = &self.weights;
        let p: [f64; 6] = std::array::from_fn(|i| y[i]);
        let t: [f64; 6] = std::array::from_fn(|i| p[i] / self.inertia[i]);
        let b: [f64; 6] = std::array::from_fn(|i| theta[6 + i].exp());
        let c = coadjoint(&p);
        let adt = ad(&t);
        let wr: [f64; 6] = std::array::from_fn(|i| -grad[i] - b[i] * p[i]);

        // ∂f/∂P = ad_Tᵀ + C(P)𝓘⁻¹ − diag(b)
        let mut fp = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                fp[i][j] = adt[j][i] + c[i][j] / self.inertia[j];
            }
            fp[i][i] -= b[i];
        }
        // ∂W/∂θ: −∂grad/∂θ for θ₁..₆, −b_i P_i e_i for θ₇..₁₂.
        let mut wth = [[0.0; 12]; 6];
        for i in 0..6 {
            for j in 0..6 {
                wth[i][j] = -dgrad[i][j];
            }
            wth[i][6 + i] = -b[i] * p[i];
        }

        let mut dy = [0.0; N];
        for i in 0..6 {
            dy[i] = (0..6).map(|k| c[i][k] * t[k]).sum::<f64>() + wr[i];
        }
        let s = |i: usize, j: usize| y[6 + 12 * i + j];
        for i in 0..6 {
            for j in 0..12 {
                dy[6 + 12 * i + j] = (0..6).map(|k| fp[i][k] * s(k, j)).sum::<f64>() + wth[i][j];
            }
        }
        // ∂r/∂P = 2(w₇P_ω; w₈P_v) − 2w₉ b∘W ; ∂r/∂θ = 2w₉ Wᵀ∂W/∂θ
        let rp: [f64; 6] = std::array::from_fn(|i| 2.0 * (if i < 3 { w[6] } else { w[7] }) * p[i] - 2.0 * w[8] * b[i] * wr[i]);
        for j in 0..12 {
            let via_state: f64 = (0..6).map(|i| rp[i] * s(i, j)).sum();
            let direct: f64 = (0..6).map(|i| 2.0 * w[8] * wr[i] * wth[i][j]).sum();
            dy[78 + j] = via_state + direct;
        }
        let mom = w[6] * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) + w[7] * (p[3] * p[3] + p[4] * p[4] + p[5] * p[5]);
        dy[90] = mom + w[8] * wr.iter().map(|x| x * x).sum::<f64>();
        dy
    }

    /// dJ/dθ, with J the momentum-dependent part of the cost (the pose
    /// terms are constant and drop out of the gradient).
    pub fn gradient(&self, theta: &[f64; 12], p0: &[f64; 6]) -> ([f64; 12], f64) {
        let (grad, dgrad) = self.potential_parts(theta);
        let mut y = [0.0; N];
        y[..6].copy_from_slice(p0);
        let h = self.horizon / self.steps as f64;
        let f = |y: &[f64; N]| self.rhs(theta, &grad, &dgrad, y);
        let axpy = |y: &[f64; N], a: f64, k: &[f64; N]| -> [f64; N] { std::array::from_fn(|i| y[i] + a * k[i]) };
        for _ in 0..self.steps {
            let k1 = f(&y);
            let k2 = f(&axpy(&y, 0.5 * h, &k1));
            let k3 = f(&axpy(&y, 0.5 * h, &k2));
            let k4 = f(&axpy(&y, h, &k3));
            for i in 0..N {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let w = &self.weights;
        let ft: [f64; 6] = std::array::from_fn(|i| 2.0 * (if i < 3 { w[2] } else { w[3] }) * y[i]);
        let g = std::array::from_fn(|j| y[78 + j] + (0..6).map(|i| ft[i] * y[6 + 12 * i + j]).sum::<f64>());
        let fcost = w[2] * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) + w[3] * (y[3] * y[3] + y[4] * y[4] + y[5] * y[5]);
        (g, fcost + y[90])
    }
}
