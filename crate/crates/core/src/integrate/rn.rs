use nalgebra::DVector;

use super::{Method, SolverConfig};
use crate::error::{Error, Result};

const MIN_STEP: f64 = 1e-12;
const MAX_STEPS: usize = 2_000_000;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Accepted nodes (t, x, ẋ) with cubic Hermite interpolation between them.
#[derive(Clone, Debug, Default)]
pub struct DenseTrajectory {
    pub ts: Vec<f64>,
    pub xs: Vec<DVector<f64>>,
    pub fs: Vec<DVector<f64>>,
}

impl DenseTrajectory {
    fn push(&mut self, t: f64, x: DVector<f64>, f: DVector<f64>) {
        self.ts.push(t);
        self.xs.push(x);
        self.fs.push(f);
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().expect("empty trajectory")
    }

    pub fn last(&self) -> &DVector<f64> {
        self.xs.last().expect("empty trajectory")
    }

    fn span(&self) -> (f64, f64) {
        let (a, b) = (self.t_start(), self.t_end());
        (a.min(b), a.max(b))
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.span();
        t >= lo && t <= hi
    }

    /// Interpolated state; works for trajectories integrated in either
    /// direction.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        if self.is_empty() {
            return Err(Error::Internal("evaluating an empty trajectory".into()));
        }
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { t, start: lo, end: hi });
        }
        if self.len() == 1 {
            return Ok(self.xs[0].clone());
        }
        let forward = self.t_end() >= self.t_start();
        // First node index i with ts[i+1] beyond t in integration order.
        let idx = if forward {
            self.ts.partition_point(|&s| s <= t)
        } else {
            self.ts.partition_point(|&s| s >= t)
        };
        let i = idx.saturating_sub(1).min(self.len() - 2);
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        if t == t0 {
            return Ok(self.xs[i].clone());
        }
        if t == t1 {
            return Ok(self.xs[i + 1].clone());
        }
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(&self.xs[i] * h00 + &self.fs[i] * (h10 * h) + &self.xs[i + 1] * h01 + &self.fs[i + 1] * (h11 * h))
    }
}

fn error_norm(err: &DVector<f64>, x0: &DVector<f64>, x1: &DVector<f64>, cfg: &SolverConfig) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..err.len() {
        let scale = cfg.atol + cfg.rtol * x0[i].abs().max(x1[i].abs());
        worst = worst.max((err[i] / scale).abs());
    }
    worst
}

fn check_finite(v: &DVector<f64>, t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("right-hand side at t = {t}")))
    }
}

/// Out-of-chart errors raised inside a trial step shrink the step instead of
/// aborting the solve.
fn recoverable(e: &Error) -> bool {
    matches!(e, Error::OutOfChart { .. })
}

fn initial_step(x: &DVector<f64>, f: &DVector<f64>, cfg: &SolverConfig, span: f64) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..x.len() {
        let sc = cfg.atol + cfg.rtol * x[i].abs();
        d0 = d0.max((x[i] / sc).abs());
        d1 = d1.max((f[i] / sc).abs());
    }
    let guess = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    guess.min(cfg.initial_step).min(cfg.max_step).min(span)
}

struct Dopri<'a, F> {
    rhs: &'a mut F,
    cfg: &'a SolverConfig,
}

impl<F> Dopri<'_, F>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    /// One trial step; returns (x₁, f(t+h, x₁), scaled error).
    fn trial(&mut self, t: f64, x: &DVector<f64>, f0: &DVector<f64>, h: f64) -> Result<(DVector<f64>, DVector<f64>, f64)> {
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(f0.clone());
        for s in 1..7 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    xs.axpy(h * A[s][j], kj, 1.0);
                }
            }
            if s == 6 {
                // The seventh stage is evaluated at the new point (FSAL).
                let f1 = (self.rhs)(t + h, &xs)?;
                check_finite(&f1, t + h)?;
                k.push(f1);
                let mut err = DVector::zeros(x.len());
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        err.axpy(h * E[j], kj, 1.0);
                    }
                }
                let norm = error_norm(&err, x, &xs, self.cfg);
                let f1 = k.pop().expect("stage");
                return Ok((xs, f1, norm));
            }
            let ks = (self.rhs)(t + C[s] * h, &xs)?;
            check_finite(&ks, t + C[s] * h)?;
            k.push(ks);
        }
        unreachable!()
    }
}

fn rk4_step<F>(rhs: &mut F, t: f64, x: &DVector<f64>, f0: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k2 = rhs(t + 0.5 * h, &(x + f0 * (0.5 * h)))?;
    let k3 = rhs(t + 0.5 * h, &(x + &k2 * (0.5 * h)))?;
    let k4 = rhs(t + h, &(x + &k3 * h))?;
    let out = x + (f0 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    check_finite(&out, t + h)?;
    Ok(out)
}

/// Integrates from t0 towards t1 and stops early after the first accepted
/// step for which `stop(t, x)` holds. Returns the dense trajectory and
/// whether the stop predicate fired. `t1 < t0` integrates backwards.
pub fn integrate_until<F, S>(
    rhs: F,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    stop: S,
) -> Result<(DenseTrajectory, bool)>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    S: FnMut(f64, &DVector<f64>) -> bool,
{
    drive(rhs, x0, t0, t1, cfg, None, stop).map(|(traj, stopped, _)| (traj, stopped))
}

/// Core loop. `h_init` carries the adaptive step across restarts; the last
/// tuple entry is the step the controller would try next.
pub(crate) fn drive<F, S>(
    mut rhs: F,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    h_init: Option<f64>,
    mut stop: S,
) -> Result<(DenseTrajectory, bool, f64)>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    S: FnMut(f64, &DVector<f64>) -> bool,
{
    cfg.validate()?;
    check_finite(x0, t0)?;
    let mut traj = DenseTrajectory::default();
    let f0 = rhs(t0, x0)?;
    check_finite(&f0, t0)?;
    traj.push(t0, x0.clone(), f0);
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok((traj, false, h_init.unwrap_or(cfg.initial_step)));
    }
    let dir = (t1 - t0).signum();

    match cfg.method {
        Method::Rk4 => {
            let n = ((span / cfg.initial_step) - 1e-9).ceil().max(1.0) as usize;
            let h = (t1 - t0) / n as f64;
            for i in 0..n {
                let t = t0 + i as f64 * h;
                let t_next = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };
                let x = traj.xs.last().expect("node").clone();
                let f = traj.fs.last().expect("node").clone();
                let x1 = rk4_step(&mut rhs, t, &x, &f, t_next - t)?;
                let f1 = rhs(t_next, &x1)?;
                check_finite(&f1, t_next)?;
                traj.push(t_next, x1, f1);
                if i + 1 < n && stop(t_next, traj.last()) {
                    return Ok((traj, true, h.abs()));
                }
            }
            Ok((traj, false, h.abs()))
        }
        Method::Dopri5 => {
            let mut t = t0;
            let mut h = dir
                * match h_init {
                    Some(h) => h.abs().min(cfg.max_step),
                    None => initial_step(x0, &traj.fs[0], cfg, span),
                };
            let mut dopri = Dopri { rhs: &mut rhs, cfg };
            let mut steps = 0usize;
            loop {
                steps += 1;
                if steps > MAX_STEPS {
                    return Err(Error::StepUnderflow { t, h });
                }
                let remaining = t1 - t;
                let last = h.abs() >= remaining.abs();
                if last {
                    h = remaining;
                }
                let x = traj.last().clone();
                let f = traj.fs.last().expect("node").clone();
                let (x1, f1, err) = match dopri.trial(t, &x, &f, h) {
                    Ok(v) => v,
                    Err(e) if recoverable(&e) => (x.clone(), f.clone(), f64::INFINITY),
                    Err(e) => return Err(e),
                };
                if err <= 1.0 {
                    t = if last { t1 } else { t + h };
                    traj.push(t, x1, f1);
                    if last {
                        return Ok((traj, false, h.abs()));
                    }
                    let factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
                    h = dir * (h.abs() * factor).min(cfg.max_step);
                    if stop(t, traj.last()) {
                        return Ok((traj, true, h.abs()));
                    }
                } else {
                    let factor = if err.is_finite() { (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0) } else { 0.25 };
                    h *= factor;
                    if h.abs() < MIN_STEP {
                        return Err(Error::StepUnderflow { t, h });
                    }
                }
            }
        }
    }
}

/// Integrates ẋ = rhs(t, x) from t0 to t1 with dense output.
pub fn integrate_rn<F>(rhs: F, x0: &DVector<f64>, t0: f64, t1: f64, cfg: &SolverConfig) -> Result<DenseTrajectory>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    integrate_until(rhs, x0, t0, t1, cfg, |_, _| false).map(|(traj, _)| traj)
}
