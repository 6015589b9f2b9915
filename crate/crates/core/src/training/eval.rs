//! Closed-loop evaluation over sets of initial conditions.

use rand::Rng;
use rayon::prelude::*;

use super::{sample_initial, SamplerSpec};
use crate::adjoint::{goal_errors, simulate, CostSpec};
use crate::dynamics::{hamiltonian, BodyParams, ControllerSpec};
use crate::error::Result;
use crate::integrate::{LieOptions, SolverConfig};
use crate::lie::ProductElement;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySummary {
    pub index: usize,
    pub initial_angle: f64,
    pub initial_distance: f64,
    pub final_angle: f64,
    pub final_distance: f64,
    pub initial_energy: f64,
    pub final_kinetic: f64,
    pub final_potential: f64,
}

/// Means over successful trajectories at one time sample.
#[derive(Clone, Debug, PartialEq)]
pub struct BinMeans {
    pub t: f64,
    pub angle: f64,
    pub distance: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// E_kin / (E_kin + V − V(H_F)), averaged where the denominator is positive.
    pub kinetic_share: f64,
    pub potential_share: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub trajectories: Vec<TrajectorySummary>,
    pub bins: Vec<BinMeans>,
    /// (index, error message) of trajectories that failed to integrate.
    pub failures: Vec<(usize, String)>,
}

impl EvalReport {
    pub fn mean_final_angle(&self) -> f64 {
        mean(self.trajectories.iter().map(|t| t.final_angle))
    }

    pub fn mean_final_distance(&self) -> f64 {
        mean(self.trajectories.iter().map(|t| t.final_distance))
    }

    pub fn mean_initial_angle(&self) -> f64 {
        mean(self.trajectories.iter().map(|t| t.initial_angle))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { f64::NAN } else { s / n as f64 }
}

struct Sampled {
    summary: TrajectorySummary,
    /// (angle, distance, kinetic, potential, shifted potential) per time sample.
    rows: Vec<[f64; 5]>,
}

fn run_one(
    index: usize,
    ctrl: &ControllerSpec,
    body: &BodyParams,
    cost: &CostSpec,
    g0: &ProductElement,
    solver: &SolverConfig,
    times: &[f64],
) -> Result<Sampled> {
    let v_goal = ctrl.potential(&cost.goal)?;
    let traj = simulate(cost, ctrl, body, g0, cost.horizon, solver, &LieOptions::default())?;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let g: ProductElement = traj.element_at(t)?;
        let (a, d) = goal_errors(cost, &g.pose);
        let e = hamiltonian(body, ctrl, &g.pose, &g.mom)?;
        rows.push([a, d, e.kinetic, e.potential, e.potential - v_goal]);
    }
    let e0 = hamiltonian(body, ctrl, &g0.pose, &g0.mom)?;
    let (first, last) = (rows[0], *rows.last().expect("at least one sample"));
    Ok(Sampled {
        summary: TrajectorySummary {
            index,
            initial_angle: first[0],
            initial_distance: first[1],
            final_angle: last[0],
            final_distance: last[1],
            initial_energy: e0.total,
            final_kinetic: last[2],
            final_potential: last[3],
        },
        rows,
    })
}

/// Simulates every initial state over [0, T] and reports per-trajectory
/// finals plus means on `bins + 1` uniform time samples.
pub fn evaluate_states(
    ctrl: &ControllerSpec,
    body: &BodyParams,
    cost: &CostSpec,
    states: &[ProductElement],
    solver: &SolverConfig,
    bins: usize,
) -> EvalReport {
    let nb = bins.max(1);
    let times: Vec<f64> = (0..=nb).map(|i| cost.horizon * i as f64 / nb as f64).collect();
    let results: Vec<Result<Sampled>> = states
        .par_iter()
        .enumerate()
        .map(|(i, g0)| run_one(i, ctrl, body, cost, g0, solver, &times))
        .collect();
    let mut report = EvalReport::default();
    let mut ok = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => report.failures.push((i, e.to_string())),
        }
    }
    for (k, &t) in times.iter().enumerate() {
        let col = |j: usize| mean(ok.iter().map(|s| s.rows[k][j]));
        let shares: Vec<(f64, f64)> = ok
            .iter()
            .filter_map(|s| {
                let [_, _, kin, _, pot] = s.rows[k];
                let tot = kin + pot;
                (tot > 0.0).then(|| (kin / tot, pot / tot))
            })
            .collect();
        report.bins.push(BinMeans {
            t,
            angle: col(0),
            distance: col(1),
            kinetic: col(2),
            potential: col(3),
            kinetic_share: mean(shares.iter().map(|s| s.0)),
            potential_share: mean(shares.iter().map(|s| s.1)),
        });
    }
    report.trajectories = ok.into_iter().map(|s| s.summary).collect();
    report
}

/// Draws `n` initial conditions from the sampler and evaluates them.
pub fn evaluate<R: Rng + ?Sized>(
    ctrl: &ControllerSpec,
    body: &BodyParams,
    cost: &CostSpec,
    sampler: &SamplerSpec,
    n: usize,
    rng: &mut R,
    solver: &SolverConfig,
    bins: usize,
) -> EvalReport {
    let states: Vec<ProductElement> = (0..n).map(|_| sample_initial(sampler, rng)).collect();
    evaluate_states(ctrl, body, cost, &states, solver, bins)
}
