//! Closed-loop cost of a controlled rigid body, written from scratch on
//! plain arrays. The pose is integrated in the embedding (R, p) with a
//! fixed-step Dormand–Prince 5 scheme; nothing here calls the library.

pub const V_IN: usize = 12;
pub const B_IN: usize = 18;
pub const HID: usize = 64;
pub const V_PARAMS: usize = HID * V_IN + HID + HID + 1;
pub const B_PARAMS: usize = HID * B_IN + HID + 6 * HID + 6;

#[derive(Clone, Copy)]
pub enum Law<'a> {
    /// (log K, log G, log B).
    Quadratic(&'a [f64]),
    /// V-net then B-net, each layer row-major weights then biases.
    Nn(&'a [f64]),
}

#[derive(Clone, Copy, Debug)]
pub struct Problem {
    pub inertia: [f64; 6],
    pub weights: [f64; 9],
    pub goal_r: [[f64; 3]; 3],
    pub goal_p: [f64; 3],
    pub horizon: f64,
    pub steps: usize,
}

/// R row-major, p, P.
pub type State = [f64; 18];

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn r_of(x: &[f64]) -> [[f64; 3]; 3] {
    [[x[0], x[1], x[2]], [x[3], x[4], x[5]], [x[6], x[7], x[8]]]
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Entry gradient of V = ¼ Σ K_k p_k² + ¼ Σ K_k (Rᵀp)_k² − Σ G_i (R_ii − 1).
/// Linear in (K, G).
pub fn quadratic_entry_grad(k: [f64; 3], gg: [f64; 3], x: &[f64; 12]) -> [f64; 12] {
    let mut g = [0.0; 12];
    let r = r_of(x);
    let p = [x[9], x[10], x[11]];
    let rtp: [f64; 3] = std::array::from_fn(|c| (0..3).map(|i| r[i][c] * p[i]).sum());
    for i in 0..3 {
        for c in 0..3 {
            g[3 * i + c] = 0.5 * k[c] * rtp[c] * p[i];
        }
        g[4 * i] -= gg[i];
        g[9 + i] = 0.5 * k[i] * p[i] + 0.5 * (0..3).map(|c| r[i][c] * k[c] * rtp[c]).sum::<f64>();
    }
    g
}

/// d/dε V(H exp(εΛξ)) from ∂V/∂(R, p): torque from M = RᵀG_R, force Rᵀ∂V/∂p.
pub fn right_gradient(x: &[f64; 12], ge: &[f64; 12]) -> [f64; 6] {
    let r = r_of(x);
    let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| r[k][i] * ge[3 * k + j]).sum()));
    [
        m[2][1] - m[1][2],
        m[0][2] - m[2][0],
        m[1][0] - m[0][1],
        (0..3).map(|k| r[k][0] * ge[9 + k]).sum(),
        (0..3).map(|k| r[k][1] * ge[9 + k]).sum(),
        (0..3).map(|k| r[k][2] * ge[9 + k]).sum(),
    ]
}

/// ∂V/∂R (row-major) and ∂V/∂p.
fn potential_entry_grad(law: Law, x: &[f64; 12]) -> [f64; 12] {
    match law {
        Law::Quadratic(th) => quadratic_entry_grad([th[0].exp(), th[1].exp(), th[2].exp()], [th[3].exp(), th[4].exp(), th[5].exp()], x),
        Law::Nn(th) => {
            let mut g = [0.0; 12];
            let (w1, rest) = th.split_at(HID * V_IN);
            let (b1, rest) = rest.split_at(HID);
            let w2 = &rest[..HID];
            for j in 0..HID {
                let row = &w1[j * V_IN..(j + 1) * V_IN];
                let z: f64 = b1[j] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let t = z.tanh();
                let s = w2[j] * (1.0 - t * t);
                for (gi, wi) in g.iter_mut().zip(row) {
                    *gi += s * wi;
                }
            }
            g
        }
    }
}

fn damping(law: Law, x: &[f64; 12], pm: &[f64]) -> [f64; 6] {
    match law {
        Law::Quadratic(th) => std::array::from_fn(|i| th[6 + i].exp()),
        Law::Nn(th) => {
            let th = &th[V_PARAMS..];
            let (w1, rest) = th.split_at(HID * B_IN);
            let (b1, rest) = rest.split_at(HID);
            let (w2, b2) = rest.split_at(6 * HID);
            let mut input = [0.0; B_IN];
            input[..12].copy_from_slice(x);
            input[12..].copy_from_slice(pm);
            let mut hidden = [0.0; HID];
            for j in 0..HID {
                let row = &w1[j * B_IN..(j + 1) * B_IN];
                hidden[j] = softplus(b1[j] + row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>());
            }
            std::array::from_fn(|i| {
                let row = &w2[i * HID..(i + 1) * HID];
                (b2[i] + row.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>()).exp()
            })
        }
    }
}

impl Problem {
    /// −a(tr(R_E) + 1) + b‖d‖² with E = H_F⁻¹H.
    fn pose_cost(&self, s: &[f64], a: f64, b: f64) -> f64 {
        let r = r_of(s);
        let rf = self.goal_r;
        let mut tr = 1.0;
        for i in 0..3 {
            tr += (0..3).map(|k| rf[k][i] * r[k][i]).sum::<f64>();
        }
        let dp = [s[9] - self.goal_p[0], s[10] - self.goal_p[1], s[11] - self.goal_p[2]];
        // ‖R_Fᵀ(p − p_F)‖ = ‖p − p_F‖
        -a * tr + b * (dp[0] * dp[0] + dp[1] * dp[1] + dp[2] * dp[2])
    }

    fn mom_cost(s: &[f64], a: f64, b: f64) -> f64 {
        a * (s[12] * s[12] + s[13] * s[13] + s[14] * s[14]) + b * (s[15] * s[15] + s[16] * s[16] + s[17] * s[17])
    }

    /// State derivative and running cost.
    fn rhs(&self, law: Law, s: &State) -> (State, f64) {
        let r = r_of(s);
        let mut x = [0.0; 12];
        x.copy_from_slice(&s[..12]);
        let pm = &s[12..18];
        let tw: [f64; 6] = std::array::from_fn(|i| pm[i] / self.inertia[i]);
        let (w, v) = ([tw[0], tw[1], tw[2]], [tw[3], tw[4], tw[5]]);

        let grad = right_gradient(&x, &potential_entry_grad(law, &x));
        let b = damping(law, &x, pm);
        let wr: [f64; 6] = std::array::from_fn(|i| -grad[i] - b[i] * pm[i]);

        let (pw, pv) = ([pm[0], pm[1], pm[2]], [pm[3], pm[4], pm[5]]);
        let a1 = cross(pw, w);
        let a2 = cross(pv, v);
        let a3 = cross(pv, w);
        let mut d = [0.0; 18];
        for i in 0..3 {
            for j in 0..3 {
                // (RΛω)_ij = Σ_k R_ik ε_kjl ω_l
                let rw = match j {
                    0 => r[i][1] * w[2] - r[i][2] * w[1],
                    1 => r[i][2] * w[0] - r[i][0] * w[2],
                    _ => r[i][0] * w[1] - r[i][1] * w[0],
                };
                d[3 * i + j] = rw;
            }
            d[9 + i] = (0..3).map(|k| r[i][k] * v[k]).sum();
            d[12 + i] = a1[i] + a2[i] + wr[i];
            d[15 + i] = a3[i] + wr[3 + i];
        }
        let wn: f64 = wr.iter().map(|c| c * c).sum();
        let wt = &self.weights;
        let run = self.pose_cost(s, wt[4], wt[5]) + Self::mom_cost(s, wt[6], wt[7]) + wt[8] * wn;
        (d, run)
    }

    /// F(Γ(T)) + ∫₀ᵀ r dt.
    pub fn cost(&self, law: Law, s0: &State) -> f64 {
        let h = self.horizon / self.steps as f64;
        let mut s = *s0;
        let mut integral = 0.0;
        let (mut k1, mut r1) = self.rhs(law, &s);
        for _ in 0..self.steps {
            let stage = |coef: &[(f64, &State)]| -> State {
                let mut y = s;
                for (c, k) in coef {
                    for i in 0..18 {
                        y[i] += h * c * k[i];
                    }
                }
                y
            };
            let (k2, _) = self.rhs(law, &stage(&[(1.0 / 5.0, &k1)]));
            let (k3, r3) = self.rhs(law, &stage(&[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]));
            let (k4, r4) = self.rhs(law, &stage(&[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]));
            let (k5, r5) = self.rhs(
                law,
                &stage(&[(19372.0 / 6561.0, &k1), (-25360.0 / 2187.0, &k2), (64448.0 / 6561.0, &k3), (-212.0 / 729.0, &k4)]),
            );
            let (k6, r6) = self.rhs(
                law,
                &stage(&[
                    (9017.0 / 3168.0, &k1),
                    (-355.0 / 33.0, &k2),
                    (46732.0 / 5247.0, &k3),
                    (49.0 / 176.0, &k4),
                    (-5103.0 / 18656.0, &k5),
                ]),
            );
            let bw = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
            s = stage(&[(bw[0], &k1), (bw[2], &k3), (bw[3], &k4), (bw[4], &k5), (bw[5], &k6)]);
            integral += h * (bw[0] * r1 + bw[2] * r3 + bw[3] * r4 + bw[4] * r5 + bw[5] * r6);
            (k1, r1) = self.rhs(law, &s);
        }
        let wt = &self.weights;
        self.pose_cost(&s, wt[0], wt[1]) + Self::mom_cost(&s, wt[2], wt[3]) + integral
    }
}

/// Fourth-order central difference of θ ↦ cost in coordinate i.
pub fn central_difference(prob: &Problem, quadratic: bool, theta: &[f64], s0: &State, i: usize, eps: f64) -> f64 {
    let mut th = theta.to_vec();
    let mut at = |d: f64| {
        th[i] = theta[i] + d;
        let law = if quadratic { Law::Quadratic(&th) } else { Law::Nn(&th) };
        prob.cost(law, s0)
    };
    let (p2, p1, m1, m2) = (at(2.0 * eps), at(eps), at(-eps), at(-2.0 * eps));
    (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * eps)
}
