//! Acceptance suite. Prints one PASS/FAIL line per criterion. With
//! GEONODE_ACCEPTANCE_STRICT=1 any failure also makes the exit status
//! nonzero.
//!
//!   cargo test -p geonode --test acceptance            all criteria
//!   cargo test -p geonode --test acceptance -- 3 5     a subset

mod oracle;

use std::process::ExitCode;
use std::time::Instant;

use geonode::adjoint::{cost_and_gradient, momentum_cost_and_gradient, simulate, CostSpec, GradientResult, MomentumProblem};
use geonode::dynamics::{hamiltonian, BodyParams, Controller, ControllerSpec, Gravity, NnParams, QuadraticParams};
use geonode::integrate::{lie_integrate, LieOptions, SolverConfig};
use geonode::lie::{self, se3, so3, GroupTag, Pose, ProductElement, Rotation};
use geonode::training::{evaluate_states, sample_initial, EpochRecord, Restart, SamplerSpec, TrainConfig, Trainer};
use nalgebra::{DVector, Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use oracle::flat::FlatProblem;
use oracle::rigid::{central_difference, Law, Problem, State, B_PARAMS, V_PARAMS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(normal(rng), normal(rng), normal(rng));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// Uniform (Haar) rotation from a random unit quaternion.
fn haar_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q = nalgebra::Vector4::new(normal(rng), normal(rng), normal(rng), normal(rng)).normalize();
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

fn twist_matrix(t: &[f64]) -> Matrix4<f64> {
    Matrix4::new(0.0, -t[2], t[1], t[3], t[2], 0.0, -t[0], t[4], -t[1], t[0], 0.0, t[5], 0.0, 0.0, 0.0, 0.0)
}

fn twist_of(m: &Matrix4<f64>) -> [f64; 6] {
    [m[(2, 1)], m[(0, 2)], m[(1, 0)], m[(0, 3)], m[(1, 3)], m[(2, 3)]]
}

// ---------------------------------------------------------------- 1

fn exp_log_roundtrip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for tag in [GroupTag::So3, GroupTag::Se3, GroupTag::Product, GroupTag::Vec(6)] {
        for _ in 0..1000 {
            let mut a = DVector::from_fn(tag.dim(), |_, _| 2.0 * normal(&mut rng));
            if tag != GroupTag::Vec(6) {
                let w = unit(&mut rng) * rng.random_range(0.0..std::f64::consts::PI - 0.1);
                a.rows_mut(0, 3).copy_from(&w);
            }
            match lie::exp_group(&a, tag).and_then(|g| lie::log_group(&g)) {
                Ok(b) => worst = worst.max((b - &a).amax()),
                Err(_) => failures += 1,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && worst < 1e-8 && secs < 1.0,
        format!("4000 vectors over SO(3), SE(3), SE(3)xR6, R6: max coordinate error {worst:.2e} (< 1e-8), {failures} failures, {secs:.3} s (< 1 s)"),
    )
}

// ---------------------------------------------------------------- 2

fn partition_of_unity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_sum = 0.0f64;
    let mut min_max = f64::INFINITY;
    let mut negative = 0;
    for _ in 0..100_000 {
        let r = Rotation::from_matrix_unchecked(haar_rotation(&mut rng));
        let h = Pose::new(r, Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)));
        let s = geonode::atlas::partition(&h);
        negative += s.iter().filter(|x| **x < 0.0).count();
        worst_sum = worst_sum.max((s.iter().sum::<f64>() - 1.0).abs());
        min_max = min_max.min(s.iter().cloned().fold(f64::MIN, f64::max));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_sum < 1e-12 && min_max >= 0.25 && negative == 0 && secs < 5.0,
        format!("1e5 poses: max |sum - 1| {worst_sum:.2e} (< 1e-12), min over poses of max sigma {min_max:.4} (>= 0.25), {secs:.2} s (< 5 s)"),
    )
}

// ---------------------------------------------------------------- 3

fn dexp_matches_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let identity_exact = se3::dexp(&Vector6::zeros()) == Matrix6::identity();
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let w = unit(&mut rng) * rng.random_range(0.0..std::f64::consts::PI - 0.1);
        let q = Vector6::new(w[0], w[1], w[2], normal(&mut rng), normal(&mut rng), normal(&mut rng));
        let inv = twist_matrix(q.as_slice()).exp().try_inverse().expect("exp is invertible");
        let mut fd = Matrix6::zeros();
        for j in 0..6 {
            let mut qp = q;
            let mut qm = q;
            qp[j] += eps;
            qm[j] -= eps;
            let d = (twist_matrix(qp.as_slice()).exp() - twist_matrix(qm.as_slice()).exp()) / (2.0 * eps);
            let col = twist_of(&(inv * d));
            for i in 0..6 {
                fd[(i, j)] = col[i];
            }
        }
        let k = se3::dexp(&q);
        worst = worst.max((k - fd).norm() / k.norm());
    }
    outcome(
        identity_exact && worst < 1e-5,
        format!("1000 twists: max relative error vs matrix-exponential differences {worst:.2e} (< 1e-5); K(0) == I exactly: {identity_exact}"),
    )
}

// ---------------------------------------------------------------- 4

fn chart_switching() -> Outcome {
    let xi = Vector6::new(1.1, -0.6, 0.9, 0.3, 0.5, -0.4);
    let g0 = se3::exp(&Vector6::new(0.4, 0.2, -0.3, 1.0, -0.5, 0.2));
    let field = move |_: f64, _: &Pose| Ok((DVector::from_column_slice(xi.as_slice()), DVector::zeros(0)));
    let traj = match lie_integrate(field, &g0, &DVector::zeros(0), 0.0, 2.0, &SolverConfig::dopri5(1e-8, 1e-8), &LieOptions::default()) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("integration failed: {e}")),
    };
    let exact = g0.to_matrix() * (twist_matrix(xi.as_slice()) * 2.0).exp();
    let end: Pose = traj.final_element().expect("final element");
    let err = (end.to_matrix() - exact).norm();
    let mut drift = end.rot.orthonormality_error();
    for (_, s) in traj.samples() {
        drift = drift.max(s.element::<Pose>().expect("sample").rot.orthonormality_error());
    }
    let n = traj.switches.len();
    outcome(
        n >= 1 && err < 1e-6 && drift < 1e-8,
        format!("rotation 2|w| = {:.2} rad, {n} chart switches, Frobenius error {err:.2e} (< 1e-6), orthonormality drift {drift:.2e} (< 1e-8)", 2.0 * xi.fixed_rows::<3>(0).norm()),
    )
}

// ---------------------------------------------------------------- 5

const GRAD_INERTIA: [f64; 6] = [1.0, 1.4, 0.8, 1.2, 0.9, 1.1];
const QUAD_WEIGHTS: [f64; 9] = [4.0, 20.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
const NN_WEIGHTS: [f64; 9] = [4.0, 10.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
const FD_EPS: f64 = 1e-3;
const FD_STEPS: usize = 40;
const GRAD_CASES: usize = 20;

struct GradCase {
    quadratic: bool,
    theta: Vec<f64>,
    g0: ProductElement,
}

fn grad_goal() -> Pose {
    Pose::new(so3::exp(&Vector3::new(0.2, -0.1, 0.3)), Vector3::new(0.3, -0.2, 0.1))
}

fn grad_body() -> BodyParams {
    BodyParams::new(Matrix6::from_diagonal(&Vector6::from_column_slice(&GRAD_INERTIA)), None).expect("valid inertia")
}

fn grad_cases() -> Vec<GradCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sampler = SamplerSpec::default();
    let mut cases = Vec::new();
    for quadratic in [true, false] {
        for _ in 0..GRAD_CASES {
            let g0 = sample_initial(&sampler, &mut rng);
            let theta = if quadratic {
                (0..12).map(|_| rng.random_range(-0.5..0.5)).collect()
            } else {
                let base = ControllerSpec::nn(NnParams::xavier(&mut rng)).params();
                assert_eq!(base.len(), V_PARAMS + B_PARAMS, "network layout");
                base.iter().map(|x| x + 0.05 * normal(&mut rng)).collect()
            };
            cases.push(GradCase { quadratic, theta, g0 });
        }
    }
    cases
}

fn controller_for(quadratic: bool, theta: &[f64]) -> ControllerSpec {
    let base = if quadratic { ControllerSpec::quadratic(QuadraticParams::default()) } else { ControllerSpec::nn(NnParams::zeros()) };
    base.with_params(theta).expect("parameter count")
}

fn library_gradient(case: &GradCase) -> geonode::Result<GradientResult> {
    let weights = if case.quadratic { QUAD_WEIGHTS } else { NN_WEIGHTS };
    let spec = CostSpec::new(grad_goal(), weights, 0.5)?;
    cost_and_gradient(&spec, &controller_for(case.quadratic, &case.theta), &grad_body(), &case.g0, &SolverConfig::rk4(1e-3))
}

fn oracle_problem(quadratic: bool) -> Problem {
    let goal = grad_goal();
    let r = goal.r();
    Problem {
        inertia: GRAD_INERTIA,
        weights: if quadratic { QUAD_WEIGHTS } else { NN_WEIGHTS },
        goal_r: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])),
        goal_p: [goal.p[0], goal.p[1], goal.p[2]],
        horizon: 0.5,
        steps: FD_STEPS,
    }
}

fn oracle_state(g: &ProductElement) -> State {
    let mut s = [0.0; 18];
    let r = g.pose.r();
    for i in 0..3 {
        for j in 0..3 {
            s[3 * i + j] = r[(i, j)];
        }
        s[9 + i] = g.pose.p[i];
    }
    s[12..].copy_from_slice(g.mom.as_slice());
    s
}

fn oracle_fd(case: &GradCase, indices: &[usize]) -> Vec<f64> {
    let prob = oracle_problem(case.quadratic);
    let s0 = oracle_state(&case.g0);
    indices.par_iter().map(|&i| central_difference(&prob, case.quadratic, &case.theta, &s0, i, FD_EPS)).collect()
}

fn entry_ok(g: f64, fd: f64) -> bool {
    if g.abs() < 1e-8 {
        (g - fd).abs() < 1e-6
    } else {
        (g - fd).abs() / g.abs() < 1e-3
    }
}

struct GradRun {
    library: Vec<Vec<f64>>,
    fd: Vec<Vec<f64>>,
}

fn adjoint_gradient(run: &mut Option<GradRun>) -> Outcome {
    let start = Instant::now();
    let cases = grad_cases();
    let mut library = Vec::new();
    let mut fds = Vec::new();
    let mut lines = Vec::new();
    let mut passed = true;
    for quadratic in [true, false] {
        let (mut checked, mut bad, mut worst_rel, mut worst_abs, mut cost_gap) = (0usize, 0usize, 0.0f64, 0.0f64, 0.0f64);
        for case in cases.iter().filter(|c| c.quadratic == quadratic) {
            let lib = match library_gradient(case) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("library gradient failed: {e}")),
            };
            let law = if quadratic { Law::Quadratic(&case.theta) } else { Law::Nn(&case.theta) };
            let c_or = oracle_problem(quadratic).cost(law, &oracle_state(&case.g0));
            cost_gap = cost_gap.max((c_or - lib.cost).abs() / lib.cost.abs().max(1.0));
            let all: Vec<usize> = (0..case.theta.len()).collect();
            let fd = oracle_fd(case, &all);
            for (g, d) in lib.grad.iter().zip(&fd) {
                checked += 1;
                if !entry_ok(*g, *d) {
                    bad += 1;
                }
                if g.abs() < 1e-8 {
                    worst_abs = worst_abs.max((g - d).abs());
                } else {
                    worst_rel = worst_rel.max((g - d).abs() / g.abs());
                }
            }
            library.push(lib.grad.as_slice().to_vec());
            fds.push(fd);
        }
        passed &= bad == 0;
        lines.push(format!(
            "{}: {checked} entries, {bad} outside tolerance, max rel {worst_rel:.2e} (< 1e-3), max abs on tiny entries {worst_abs:.2e} (< 1e-6), oracle/library cost gap {cost_gap:.1e}",
            if quadratic { "quadratic" } else { "nn" }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    *run = Some(GradRun { library, fd: fds });
    outcome(passed && secs < 300.0, format!("{} x 2 families, T = 0.5, rk4 h = 1e-3; {}; {secs:.0} s (< 300 s)", GRAD_CASES, lines.join("; ")))
}

// ---------------------------------------------------------------- 6

fn flat_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let inertia = [1.3, 0.7, 1.1, 2.0, 1.5, 0.9];
    let body = BodyParams::new(Matrix6::from_diagonal(&Vector6::from_column_slice(&inertia)), None).expect("valid inertia");
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let theta: [f64; 12] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
        let pose = Pose::new(Rotation::from_matrix_unchecked(haar_rotation(&mut rng)), Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)));
        let p0 = Vector6::from_fn(|_, _| normal(&mut rng));
        let weights: [f64; 9] = std::array::from_fn(|_| rng.random_range(0.1..2.0));
        let cost = CostSpec::new(grad_goal(), weights, 1.0).expect("valid cost");
        let prob = MomentumProblem { cost, controller: controller_for(true, &theta), body: body.clone(), pose };
        let lib = match momentum_cost_and_gradient(&prob, &p0, &SolverConfig::dopri5(1e-12, 1e-12)) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("momentum gradient failed: {e}")),
        };
        let e = pose.entries();
        let flat = FlatProblem { inertia, weights, pose: std::array::from_fn(|i| e[i]), horizon: 1.0, steps: 4000 };
        let (g, _) = flat.gradient(&theta, &std::array::from_fn(|i| p0[i]));
        let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let diff = lib.grad.iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(diff / scale);
    }
    outcome(worst < 1e-8, format!("10 pinned poses, quadratic controller: max |g - g_ref| / max(1, |g_ref|) {worst:.2e} (< 1e-8)"))
}

// ---------------------------------------------------------------- 7

fn energy_monotone(ctrl: &ControllerSpec, body: &BodyParams, cost: &CostSpec, g0: &ProductElement) -> geonode::Result<f64> {
    let traj = simulate(cost, ctrl, body, g0, cost.horizon, &SolverConfig::dopri5(1e-10, 1e-10), &LieOptions::default())?;
    let mut prev = None;
    let mut e0 = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for (_, s) in traj.samples() {
        let g: ProductElement = s.element()?;
        let e = hamiltonian(body, ctrl, &g.pose, &g.mom)?.total;
        match prev {
            None => e0 = e,
            Some(p) => worst = worst.max((e - p) / e0.abs()),
        }
        prev = Some(e);
    }
    Ok(worst)
}

fn passivity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let body = BodyParams::default();
    let cost = CostSpec::new(Pose::identity(), QUAD_WEIGHTS, 3.0).expect("valid cost");
    let sampler = SamplerSpec::default();
    let mut parts = Vec::new();
    let mut passed = true;
    for quadratic in [true, false] {
        let mut worst = f64::NEG_INFINITY;
        let mut errors = 0;
        let jobs: Vec<(ControllerSpec, ProductElement)> = (0..100)
            .map(|_| {
                let ctrl = if quadratic {
                    let th: [f64; 12] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                    ControllerSpec::quadratic(QuadraticParams::new(th).expect("finite"))
                } else {
                    ControllerSpec::nn(NnParams::xavier(&mut rng))
                };
                (ctrl, sample_initial(&sampler, &mut rng))
            })
            .collect();
        let res: Vec<_> = jobs.par_iter().map(|(c, g)| energy_monotone(c, &body, &cost, g)).collect();
        for r in res {
            match r {
                Ok(w) => worst = worst.max(w),
                Err(_) => errors += 1,
            }
        }
        passed &= errors == 0 && worst <= 1e-6;
        parts.push(format!("{}: largest step change of E {worst:.2e} x E(0) (<= 1e-6), {errors} failures", if quadratic { "quadratic" } else { "nn" }));
    }
    match train_quadratic() {
        Ok(ctrl) => {
            let states: Vec<ProductElement> = (0..100).map(|_| sample_initial(&sampler, &mut rng)).collect();
            let report = evaluate_states(&ctrl, &body, &cost, &states, &SolverConfig::dopri5(1e-10, 1e-10), 1);
            let ratios: Vec<f64> = report.trajectories.iter().map(|t| t.final_kinetic / t.initial_energy).collect();
            let worst = ratios.iter().cloned().fold(0.0, f64::max);
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let kin: f64 = report.trajectories.iter().map(|t| t.final_kinetic).sum();
            let tot: f64 = report.trajectories.iter().map(|t| t.initial_energy).sum();
            passed &= report.failures.is_empty() && worst < 0.01;
            parts.push(format!(
                "trained quadratic, T = 3: E_kin(T)/E(0) worst trajectory {:.2}% (< 1%), mean {:.2}%, aggregate {:.2}%",
                100.0 * worst,
                100.0 * mean,
                100.0 * kin / tot
            ));
        }
        Err(e) => {
            passed = false;
            parts.push(format!("training the quadratic controller failed: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(passed, format!("100 trajectories per family, no gravity, dopri5 1e-10; {}; {secs:.0} s", parts.join("; ")))
}

// ---------------------------------------------------------------- 8

struct TrainRun {
    records: Vec<EpochRecord>,
    params: Vec<f64>,
    adam: (Vec<f64>, Vec<f64>, u64),
    initial: (f64, f64),
    rng_word_pos: u128,
}

fn quadratic_trainer(epochs: usize, seed: u64, restart: Option<Restart>) -> Trainer {
    let config = TrainConfig {
        epochs,
        batch_size: 64,
        eta: 1e-3,
        gamma: 0.999,
        seed,
        restart,
        eval_every: 10,
        holdout_size: 256,
        holdout_seed: 88,
        beta1: 0.9,
        beta2: 0.999,
        adam_eps: 1e-8,
    };
    let cost = CostSpec::new(Pose::identity(), QUAD_WEIGHTS, 3.0).expect("valid cost");
    Trainer::new(
        config,
        ControllerSpec::quadratic(QuadraticParams::default()),
        cost,
        BodyParams::default(),
        SamplerSpec::default(),
        SolverConfig::dopri5(1e-5, 1e-4),
    )
    .expect("valid trainer")
}

/// The full quadratic schedule (1200 epochs, rate restart at 1000) on
/// small batches.
fn train_quadratic() -> geonode::Result<ControllerSpec> {
    let mut trainer = quadratic_trainer(1200, 7, Some(Restart { epoch: 1000, eta: 1e-2 }));
    geonode::training::train(&mut trainer, |_, _| Ok(()))?;
    Ok(trainer.controller)
}

fn run_training() -> geonode::Result<TrainRun> {
    let mut trainer = quadratic_trainer(50, 8, None);
    let h0 = trainer.evaluate_holdout();
    let records = geonode::training::train(&mut trainer, |_, _| Ok(()))?;
    Ok(TrainRun {
        records,
        params: trainer.controller.params(),
        adam: (trainer.adam.m.clone(), trainer.adam.v.clone(), trainer.adam.t),
        initial: (h0.mean_final_angle, h0.mean_final_distance),
        rng_word_pos: trainer.state().rng_word_pos,
    })
}

fn desk_training(run: &mut Option<TrainRun>) -> Outcome {
    let start = Instant::now();
    let r = match run_training() {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let ma = |end: usize| r.records[end - 10..end].iter().map(|x| x.loss).sum::<f64>() / 10.0;
    let (ma10, ma50) = (ma(10), ma(50));
    let last = r.records.last().and_then(|x| x.holdout.clone());
    let (a50, d50) = last.map_or((f64::NAN, f64::NAN), |h| (h.mean_final_angle, h.mean_final_distance));
    let (a0, d0) = r.initial;
    let passed = ma50 < ma10 && a50 < a0 && d50 < d0 && secs < 1800.0;
    *run = Some(r);
    outcome(
        passed,
        format!(
            "quadratic, 50 epochs x 64: loss MA10 {ma10:.4} -> {ma50:.4}; held-out angle {a0:.4} -> {a50:.4}, distance {d0:.4} -> {d50:.4}; {secs:.0} s (< 1800 s)"
        ),
    )
}

// ---------------------------------------------------------------- 9

fn max_gap(a: &ProductElement, b: &ProductElement) -> f64 {
    (a.pose.to_matrix() - b.pose.to_matrix()).amax().max((a.mom - b.mom).amax())
}

fn final_state(ctrl: &ControllerSpec, body: &BodyParams, cost: &CostSpec, g0: &ProductElement) -> geonode::Result<ProductElement> {
    simulate(cost, ctrl, body, g0, cost.horizon, &SolverConfig::default(), &LieOptions::default())?.final_element()
}

fn gravity_compensation() -> Outcome {
    let gravity = Gravity { mass: 1.3, g_vec: [0.0, 0.0, -9.81] };
    let heavy = BodyParams::new(Matrix6::identity(), Some(gravity)).expect("valid body");
    let light = BodyParams::default();
    let cost = CostSpec::new(Pose::identity(), NN_WEIGHTS, 3.0).expect("valid cost");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let starts: Vec<ProductElement> = (0..10).map(|_| sample_initial(&SamplerSpec::default(), &mut rng)).collect();
    let pairs = [
        ("zero nn", Controller::Nn(NnParams::zeros())),
        ("free", Controller::Free),
    ];
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, c) in pairs {
        let compensated = ControllerSpec::new(c.clone(), true);
        let plain = ControllerSpec::new(c.clone(), false);
        let (mut gap, mut uncompensated) = (0.0f64, f64::INFINITY);
        for g0 in &starts {
            let run = || -> geonode::Result<(f64, f64)> {
                let a = final_state(&compensated, &heavy, &cost, g0)?;
                let b = final_state(&plain, &light, &cost, g0)?;
                let c = final_state(&plain, &heavy, &cost, g0)?;
                Ok((max_gap(&a, &b), max_gap(&c, &b)))
            };
            match run() {
                Ok((x, y)) => {
                    gap = gap.max(x);
                    uncompensated = uncompensated.min(y);
                }
                Err(e) => return outcome(false, format!("{name}: simulation failed: {e}")),
            }
        }
        passed &= gap <= 1e-10 && uncompensated > 1e-2;
        parts.push(format!("{name}: max gap with compensation {gap:.1e} (<= 1e-10), min gap without {uncompensated:.2}"));
    }
    outcome(passed, format!("10 starts, T = 3, gravity-free reference with the same controller; {}", parts.join("; ")))
}

// ---------------------------------------------------------------- 10

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn record_bits(r: &EpochRecord) -> Vec<u64> {
    let mut out = bits(&[r.loss, r.terminal_loss, r.integral_loss, r.eta]);
    out.push(r.epoch as u64);
    out.push(r.dropped as u64);
    if let Some(h) = &r.holdout {
        out.extend(bits(&[h.mean_final_angle, h.mean_final_distance]));
        out.push(h.failures as u64);
    }
    out
}

fn determinism(grad: &mut Option<GradRun>, train: &mut Option<TrainRun>) -> Outcome {
    let start = Instant::now();
    if grad.is_none() {
        adjoint_gradient(grad);
    }
    if train.is_none() {
        desk_training(train);
    }
    let (Some(g), Some(t)) = (grad.as_ref(), train.as_ref()) else {
        return outcome(false, "reference runs unavailable".into());
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().expect("thread pool");
    let cases = grad_cases();
    let (lib_same, fd_same, train_same) = pool.install(|| {
        let lib_same = cases.iter().zip(&g.library).all(|(c, r)| library_gradient(c).is_ok_and(|x| bits(x.grad.as_slice()) == bits(r)));
        // Every quadratic entry and a spread of network entries.
        let fd_same = cases.iter().zip(&g.fd).step_by(7).all(|(c, r)| {
            let idx: Vec<usize> = (0..c.theta.len()).step_by(if c.quadratic { 1 } else { 97 }).collect();
            let again = oracle_fd(c, &idx);
            idx.iter().zip(&again).all(|(&i, x)| x.to_bits() == r[i].to_bits())
        });
        let train_same = run_training().is_ok_and(|again| {
            again.records.len() == t.records.len()
                && again.records.iter().zip(&t.records).all(|(a, b)| record_bits(a) == record_bits(b))
                && bits(&again.params) == bits(&t.params)
                && bits(&again.adam.0) == bits(&t.adam.0)
                && bits(&again.adam.1) == bits(&t.adam.1)
                && again.adam.2 == t.adam.2
                && again.rng_word_pos == t.rng_word_pos
        });
        (lib_same, fd_same, train_same)
    });
    let secs = start.elapsed().as_secs_f64();
    outcome(
        lib_same && fd_same && train_same,
        format!(
            "reruns on a 3-thread pool (wall time excluded): adjoint gradients identical {lib_same}, finite differences identical {fd_same}, training records, parameters, optimizer and rng state identical {train_same}; {secs:.0} s"
        ),
    )
}

// ----------------------------------------------------------------

const TITLES: [&str; 10] = [
    "exp/log round trip",
    "partition of unity",
    "dexp vs finite differences",
    "chart switching",
    "adjoint gradient vs finite differences",
    "flat-space reduction",
    "passivity",
    "desk-scale training",
    "gravity compensation",
    "determinism",
];

fn selection() -> Option<Vec<usize>> {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let ids: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).filter(|i| (1..=10).contains(i)).collect();
    if !ids.is_empty() {
        return Some(ids);
    }
    // A name filter from `cargo test NAME` that does not address this
    // target skips the suite.
    if args.is_empty() || args.iter().any(|a| "acceptance".contains(a.as_str())) {
        Some((1..=10).collect())
    } else {
        None
    }
}

fn main() -> ExitCode {
    let Some(ids) = selection() else {
        println!("acceptance: skipped by filter");
        return ExitCode::SUCCESS;
    };
    let mut grad = None;
    let mut train: Option<TrainRun> = None;
    let mut failed = 0;
    for id in ids {
        let start = Instant::now();
        let o = match id {
            1 => exp_log_roundtrip(),
            2 => partition_of_unity(),
            3 => dexp_matches_differences(),
            4 => chart_switching(),
            5 => adjoint_gradient(&mut grad),
            6 => flat_reduction(),
            7 => passivity(),
            8 => desk_training(&mut train),
            9 => gravity_compensation(),
            _ => determinism(&mut grad, &mut train),
        };
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} [{id}] {}: {} ({:.1} s)",
            if o.passed { "PASS" } else { "FAIL" },
            TITLES[id - 1],
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        return ExitCode::SUCCESS;
    }
    println!("{failed} criteria failed");
    if std::env::var("GEONODE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
