//! Minimal exponential atlases.
//!
//! SO(3) and SE(3) are covered by four charts x_j(g) = log(g_j⁻¹g) centred at
//! the identity and the three half turns about the coordinate axes. The
//! partition of unity σ_j vanishes exactly on the cut locus of chart j, so the
//! chart with the largest σ is always far from its singularity.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SVector, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::lie::product::{self, ProductElement, ProductVector};
use crate::lie::se3::{self, Pose};
use crate::lie::so3::{self, Rotation};
use crate::lie::vecn::VecElement;

/// Charts are abandoned once their σ drops below this value.
pub const SIGMA_MIN: f64 = 0.2;

/// Diagonals of the rotation chart centres R₀..R₃.
const CENTRE_DIAGONALS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// Rotation angles at which K(q) is considered numerically singular.
const DEXP_SINGULAR_ANGLE: f64 = 2.0 * std::f64::consts::PI - 1e-3;

pub fn rotation_centre(j: usize) -> Rotation {
    let d = CENTRE_DIAGONALS[j];
    Rotation::from_matrix_unchecked(Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2])))
}

pub fn pose_centre(j: usize) -> Pose {
    Pose::new(rotation_centre(j), Vector3::zeros())
}

fn rotation_sigmas(r: &Matrix3<f64>) -> [f64; 4] {
    let mut s = [0.0; 4];
    for (j, d) in CENTRE_DIAGONALS.iter().enumerate() {
        let tr = d[0] * r[(0, 0)] + d[1] * r[(1, 1)] + d[2] * r[(2, 2)];
        s[j] = ((tr + 1.0) / 4.0).clamp(0.0, 1.0);
    }
    s
}

fn check_chart(j: usize, count: usize) -> Result<()> {
    if j >= count {
        return Err(Error::InvalidParameter(format!("chart index {j} out of range (atlas has {count})")));
    }
    Ok(())
}

fn relabel(err: Error, chart: usize) -> Error {
    match err {
        Error::OutOfChart { reason, .. } => Error::OutOfChart { chart, reason },
        other => other,
    }
}

fn rotation_to_chart(r: &Rotation, j: usize, sigma: f64) -> Result<Vector3<f64>> {
    if sigma <= 0.0 {
        return Err(Error::OutOfChart { chart: j, reason: "σ = 0".into() });
    }
    so3::log(&rotation_centre(j).transpose().compose_raw(r)).map_err(|e| relabel(e, j))
}

fn check_dexp_domain(theta: f64) -> Result<()> {
    if !(theta < DEXP_SINGULAR_ANGLE) {
        return Err(Error::OutOfChart {
            chart: 0,
            reason: format!("dexp singular at rotation angle {theta}"),
        });
    }
    Ok(())
}

/// A group with a finite exponential atlas.
pub trait ExpAtlas: Clone + Send + Sync + 'static {
    /// Algebra dimension.
    const DIM: usize;
    const CHARTS: usize;

    fn partition(&self) -> Vec<f64>;
    fn to_chart(&self, j: usize) -> Result<DVector<f64>>;
    fn from_chart(q: &DVector<f64>, j: usize) -> Result<Self>;
    fn dexp(q: &DVector<f64>) -> DMatrix<f64>;

    /// Solves K(q)·x = rhs.
    fn dexp_solve(q: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let k = Self::dexp(q);
        k.lu().solve(rhs).ok_or_else(|| Error::OutOfChart {
            chart: 0,
            reason: "singular dexp".into(),
        })
    }

    fn sigma(&self, j: usize) -> f64 {
        self.partition()[j]
    }

    /// Frobenius distance between the defining blocks.
    fn distance(&self, other: &Self) -> f64;
}

impl ExpAtlas for Rotation {
    const DIM: usize = 3;
    const CHARTS: usize = 4;

    fn partition(&self) -> Vec<f64> {
        rotation_sigmas(self.matrix()).to_vec()
    }

    fn to_chart(&self, j: usize) -> Result<DVector<f64>> {
        check_chart(j, 4)?;
        let w = rotation_to_chart(self, j, self.sigma(j))?;
        Ok(DVector::from_column_slice(w.as_slice()))
    }

    fn from_chart(q: &DVector<f64>, j: usize) -> Result<Self> {
        check_chart(j, 4)?;
        dim_check(q, 3)?;
        Ok(rotation_centre(j).compose_raw(&so3::exp(&Vector3::from_column_slice(q.as_slice()))))
    }

    fn dexp(q: &DVector<f64>) -> DMatrix<f64> {
        let k = so3::dexp(&Vector3::from_column_slice(q.as_slice()));
        DMatrix::from_column_slice(3, 3, k.as_slice())
    }

    fn distance(&self, other: &Self) -> f64 {
        (self.matrix() - other.matrix()).norm()
    }
}

impl ExpAtlas for Pose {
    const DIM: usize = 6;
    const CHARTS: usize = 4;

    fn partition(&self) -> Vec<f64> {
        rotation_sigmas(self.r()).to_vec()
    }

    fn to_chart(&self, j: usize) -> Result<DVector<f64>> {
        check_chart(j, 4)?;
        pose_to_chart(self, j).map(|t| DVector::from_column_slice(t.as_slice()))
    }

    fn from_chart(q: &DVector<f64>, j: usize) -> Result<Self> {
        check_chart(j, 4)?;
        dim_check(q, 6)?;
        Ok(pose_from_chart(&Vector6::from_column_slice(q.as_slice()), j))
    }

    fn dexp(q: &DVector<f64>) -> DMatrix<f64> {
        let k = se3::dexp(&Vector6::from_column_slice(q.as_slice()));
        DMatrix::from_column_slice(6, 6, k.as_slice())
    }

    fn dexp_solve(q: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let t = Vector6::from_column_slice(q.as_slice());
        let x = se3_dexp_solve(&t, &Vector6::from_column_slice(rhs.as_slice()))?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    fn distance(&self, other: &Self) -> f64 {
        (self.to_matrix() - other.to_matrix()).norm()
    }
}

impl<const K: usize> ExpAtlas for VecElement<K> {
    const DIM: usize = K;
    const CHARTS: usize = 1;

    fn partition(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn to_chart(&self, j: usize) -> Result<DVector<f64>> {
        check_chart(j, 1)?;
        Ok(DVector::from_column_slice(self.0.as_slice()))
    }

    fn from_chart(q: &DVector<f64>, j: usize) -> Result<Self> {
        check_chart(j, 1)?;
        dim_check(q, K)?;
        Ok(VecElement(SVector::from_column_slice(q.as_slice())))
    }

    fn dexp(_q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(K, K)
    }

    fn dexp_solve(_q: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(rhs.clone())
    }

    fn distance(&self, other: &Self) -> f64 {
        (self.0 - other.0).norm()
    }
}

impl ExpAtlas for ProductElement {
    const DIM: usize = 12;
    const CHARTS: usize = 4;

    fn partition(&self) -> Vec<f64> {
        rotation_sigmas(self.pose.r()).to_vec()
    }

    fn to_chart(&self, j: usize) -> Result<DVector<f64>> {
        check_chart(j, 4)?;
        let t = pose_to_chart(&self.pose, j)?;
        Ok(DVector::from_column_slice(product::join(&t, &self.mom).as_slice()))
    }

    fn from_chart(q: &DVector<f64>, j: usize) -> Result<Self> {
        check_chart(j, 4)?;
        dim_check(q, 12)?;
        let (t, p) = product::split(&ProductVector::from_column_slice(q.as_slice()));
        Ok(ProductElement::new(pose_from_chart(&t, j), p))
    }

    fn dexp(q: &DVector<f64>) -> DMatrix<f64> {
        let k = product::dexp(&ProductVector::from_column_slice(q.as_slice()));
        DMatrix::from_column_slice(12, 12, k.as_slice())
    }

    fn dexp_solve(q: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let t = Vector6::from_column_slice(&q.as_slice()[..6]);
        let x = se3_dexp_solve(&t, &Vector6::from_column_slice(&rhs.as_slice()[..6]))?;
        let mut out = rhs.clone();
        out.rows_mut(0, 6).copy_from(&x);
        Ok(out)
    }

    fn distance(&self, other: &Self) -> f64 {
        ((self.pose.to_matrix() - other.pose.to_matrix()).norm_squared()
            + (self.mom - other.mom).norm_squared())
        .sqrt()
    }
}

fn dim_check(q: &DVector<f64>, n: usize) -> Result<()> {
    if q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.len() });
    }
    Ok(())
}

fn pose_to_chart(h: &Pose, j: usize) -> Result<Vector6<f64>> {
    let sigma = rotation_sigmas(h.r())[j];
    if sigma <= 0.0 {
        return Err(Error::OutOfChart { chart: j, reason: "σ = 0".into() });
    }
    se3::log(&pose_centre(j).inverse().compose_raw(h)).map_err(|e| relabel(e, j))
}

fn pose_from_chart(q: &Vector6<f64>, j: usize) -> Pose {
    pose_centre(j).compose_raw(&se3::exp(q))
}

pub(crate) fn se3_dexp_solve(q: &Vector6<f64>, rhs: &Vector6<f64>) -> Result<Vector6<f64>> {
    check_dexp_domain(q.fixed_rows::<3>(0).norm())?;
    let k: Matrix6<f64> = se3::dexp(q);
    k.lu().solve(rhs).ok_or_else(|| Error::OutOfChart {
        chart: 0,
        reason: "singular dexp".into(),
    })
}

/// Algorithm-1 array entry: chart index and coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartState {
    pub chart: usize,
    pub q: DVector<f64>,
}

impl ChartState {
    pub fn new(chart: usize, q: DVector<f64>) -> Self {
        ChartState { chart, q }
    }

    pub fn of<G: ExpAtlas>(g: &G) -> Result<Self> {
        let chart = select_chart(g);
        Ok(ChartState { chart, q: g.to_chart(chart)? })
    }

    pub fn element<G: ExpAtlas>(&self) -> Result<G> {
        G::from_chart(&self.q, self.chart)
    }
}

pub fn partition<G: ExpAtlas>(g: &G) -> Vec<f64> {
    g.partition()
}

/// Index of the largest σ; ties go to the lowest index.
pub fn select_chart<G: ExpAtlas>(g: &G) -> usize {
    let s = g.partition();
    let mut best = 0;
    for (j, v) in s.iter().enumerate().skip(1) {
        if *v > s[best] {
            best = j;
        }
    }
    best
}

pub fn chart_transition<G: ExpAtlas>(state: &ChartState, j_new: usize) -> Result<ChartState> {
    if j_new == state.chart {
        return Ok(state.clone());
    }
    let g = G::from_chart(&state.q, state.chart)?;
    Ok(ChartState { chart: j_new, q: g.to_chart(j_new)? })
}
