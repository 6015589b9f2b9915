//! Chart-switching integration on groups with an exponential atlas.
//!
//! The state is integrated in one chart q̇ = K(q)⁻¹ f̃(x⁻¹(q), t) until σ of
//! the active chart drops below [`SIGMA_MIN`] after an accepted step; the
//! endpoint is then transferred to the chart with the largest σ and the
//! solve restarts there. Optional auxiliary quadratures ride along.

use nalgebra::DVector;

use super::rn::{drive, DenseTrajectory};
use super::SolverConfig;
use crate::atlas::{select_chart, ChartState, ExpAtlas, SIGMA_MIN};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct LieOptions {
    /// Start in this chart instead of the argmax chart.
    pub initial_chart: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    pub from: usize,
    pub to: usize,
}

/// A stretch of the solution in a single chart. Node states are
/// [q; aux].
#[derive(Clone, Debug)]
pub struct ChartSegment {
    pub chart: usize,
    pub traj: DenseTrajectory,
}

#[derive(Clone, Debug)]
pub struct ChartTrajectory {
    pub dim: usize,
    pub segments: Vec<ChartSegment>,
    pub switches: Vec<SwitchEvent>,
}

impl ChartTrajectory {
    pub fn t_start(&self) -> f64 {
        self.segments[0].traj.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().expect("segment").traj.t_end()
    }

    /// The segment active at t; at a switch time this is the later one.
    fn segment_at(&self, t: f64) -> Result<&ChartSegment> {
        let (lo, hi) = (self.t_start(), self.t_end());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange { t, start: lo, end: hi });
        }
        let idx = self.segments.partition_point(|s| s.traj.t_start() <= t);
        Ok(&self.segments[idx.saturating_sub(1)])
    }

    fn full_at(&self, t: f64) -> Result<(usize, DVector<f64>)> {
        let seg = self.segment_at(t)?;
        Ok((seg.chart, seg.traj.eval(t)?))
    }

    pub fn dense_eval(&self, t: f64) -> Result<ChartState> {
        let (chart, x) = self.full_at(t)?;
        Ok(ChartState::new(chart, x.rows(0, self.dim).into_owned()))
    }

    pub fn aux_at(&self, t: f64) -> Result<DVector<f64>> {
        let (_, x) = self.full_at(t)?;
        Ok(x.rows(self.dim, x.len() - self.dim).into_owned())
    }

    pub fn element_at<G: ExpAtlas>(&self, t: f64) -> Result<G> {
        self.dense_eval(t)?.element()
    }

    pub fn final_state(&self) -> ChartState {
        let seg = self.segments.last().expect("segment");
        ChartState::new(seg.chart, seg.traj.last().rows(0, self.dim).into_owned())
    }

    pub fn final_aux(&self) -> DVector<f64> {
        let x = self.segments.last().expect("segment").traj.last();
        x.rows(self.dim, x.len() - self.dim).into_owned()
    }

    pub fn final_element<G: ExpAtlas>(&self) -> Result<G> {
        self.final_state().element()
    }

    /// Accepted nodes with strictly increasing times. At a switch only the
    /// post-switch node is kept.
    pub fn samples(&self) -> Vec<(f64, ChartState)> {
        let mut out: Vec<(f64, ChartState)> = Vec::new();
        for seg in &self.segments {
            for (t, x) in seg.traj.ts.iter().zip(&seg.traj.xs) {
                let state = ChartState::new(seg.chart, x.rows(0, self.dim).into_owned());
                match out.last_mut() {
                    Some(last) if last.0 == *t => *last = (*t, state),
                    _ => out.push((*t, state)),
                }
            }
        }
        out
    }

    /// Number of accepted steps over all segments.
    pub fn step_count(&self) -> usize {
        self.segments.iter().map(|s| s.traj.len() - 1).sum()
    }
}

/// q̇ = K(q)⁻¹ f̃(x_j⁻¹(q), t).
pub fn chart_rhs<G, F>(f: &mut F, state: &ChartState, t: f64) -> Result<DVector<f64>>
where
    G: ExpAtlas,
    F: FnMut(f64, &G) -> Result<DVector<f64>>,
{
    let g = G::from_chart(&state.q, state.chart)?;
    let ft = f(t, &g)?;
    G::dexp_solve(&state.q, &ft).map_err(|e| match e {
        Error::OutOfChart { reason, .. } => Error::OutOfChart { chart: state.chart, reason },
        other => other,
    })
}

/// Integrates ġ = g·Λ(f̃(g, t)) from g0 over [t0, t1] with chart switching.
/// `f` returns the algebra field and the rates of the auxiliary states.
pub fn lie_integrate<G, F>(
    mut f: F,
    g0: &G,
    aux0: &DVector<f64>,
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    opts: &LieOptions,
) -> Result<ChartTrajectory>
where
    G: ExpAtlas,
    F: FnMut(f64, &G) -> Result<(DVector<f64>, DVector<f64>)>,
{
    if !(t1 >= t0) {
        return Err(Error::InvalidParameter(format!("lie_integrate needs t1 ≥ t0 (got {t0} → {t1})")));
    }
    let n = G::DIM;
    let naux = aux0.len();
    let mut chart = match opts.initial_chart {
        Some(j) => j,
        None => select_chart(g0),
    };
    let mut q = g0.to_chart(chart)?;
    let mut aux = aux0.clone();
    let mut t = t0;
    let mut h: Option<f64> = None;
    let mut out = ChartTrajectory { dim: n, segments: Vec::new(), switches: Vec::new() };

    loop {
        let mut x = DVector::zeros(n + naux);
        x.rows_mut(0, n).copy_from(&q);
        x.rows_mut(n, naux).copy_from(&aux);
        let j = chart;
        let rhs = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> {
            let qs = x.rows(0, n).into_owned();
            let g = G::from_chart(&qs, j)?;
            let (ft, arate) = f(t, &g)?;
            if arate.len() != naux {
                return Err(Error::DimensionMismatch { expected: naux, got: arate.len() });
            }
            let qdot = G::dexp_solve(&qs, &ft).map_err(|e| match e {
                Error::OutOfChart { reason, .. } => Error::OutOfChart { chart: j, reason },
                other => other,
            })?;
            let mut dx = DVector::zeros(n + naux);
            dx.rows_mut(0, n).copy_from(&qdot);
            dx.rows_mut(n, naux).copy_from(&arate);
            Ok(dx)
        };
        let stop = |_t: f64, x: &DVector<f64>| match G::from_chart(&x.rows(0, n).into_owned(), j) {
            Ok(g) => g.sigma(j) < SIGMA_MIN,
            Err(_) => true,
        };
        let (traj, stopped, h_next) = drive(rhs, &x, t, t1, cfg, h, stop)?;
        h = Some(h_next);
        t = traj.t_end();
        let end = traj.last().clone();
        out.segments.push(ChartSegment { chart, traj });
        if !stopped {
            return Ok(out);
        }
        let g = G::from_chart(&end.rows(0, n).into_owned(), chart)?;
        let next = select_chart(&g);
        if next == chart {
            return Err(Error::Internal(format!("chart {chart} left but still the best chart")));
        }
        log::debug!("chart switch {chart} -> {next} at t = {t}");
        out.switches.push(SwitchEvent { t, from: chart, to: next });
        q = g.to_chart(next)?;
        aux = end.rows(n, naux).into_owned();
        chart = next;
    }
}
