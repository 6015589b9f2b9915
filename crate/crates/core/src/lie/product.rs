//! The product group SE(3) × Vec(6) of rigid-body poses and body momenta.
//!
//! Elements are stored as blocks (H, P). The 11×11 matrix embedding is only
//! materialized on request.

use nalgebra::{SMatrix, SVector};

use super::se3::{self, Momentum, Pose, Twist};
use crate::error::{Error, Result};

pub type ProductVector = SVector<f64, 12>;
pub type ProductMatrix = SMatrix<f64, 12, 12>;

/// Γ = (H, P) with composition (H₁H₂, P₁ + P₂).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductElement {
    pub pose: Pose,
    pub mom: Momentum,
}

impl ProductElement {
    pub fn new(pose: Pose, mom: Momentum) -> Self {
        ProductElement { pose, mom }
    }

    pub fn identity() -> Self {
        ProductElement { pose: Pose::identity(), mom: Momentum::zeros() }
    }

    pub fn compose(&self, other: &Self) -> Self {
        ProductElement { pose: self.pose.compose(&other.pose), mom: self.mom + other.mom }
    }

    pub fn inverse(&self) -> Self {
        ProductElement { pose: self.pose.inverse(), mom: -self.mom }
    }

    pub fn to_matrix(&self) -> SMatrix<f64, 11, 11> {
        let mut m = SMatrix::<f64, 11, 11>::zeros();
        m.fixed_view_mut::<4, 4>(0, 0).copy_from(&self.pose.to_matrix());
        for i in 4..11 {
            m[(i, i)] = 1.0;
        }
        m.fixed_view_mut::<6, 1>(4, 10).copy_from(&self.mom);
        m
    }
}

pub(crate) fn split(a: &ProductVector) -> (Twist, Momentum) {
    (a.fixed_rows::<6>(0).into_owned(), a.fixed_rows::<6>(6).into_owned())
}

pub(crate) fn join(t: &Twist, p: &Momentum) -> ProductVector {
    let mut a = ProductVector::zeros();
    a.fixed_rows_mut::<6>(0).copy_from(t);
    a.fixed_rows_mut::<6>(6).copy_from(p);
    a
}

pub fn hat(a: &ProductVector) -> SMatrix<f64, 11, 11> {
    let (t, p) = split(a);
    let mut m = SMatrix::<f64, 11, 11>::zeros();
    m.fixed_view_mut::<4, 4>(0, 0).copy_from(&se3::hat(&t));
    m.fixed_view_mut::<6, 1>(4, 10).copy_from(&p);
    m
}

pub fn vee(m: &SMatrix<f64, 11, 11>) -> Result<ProductVector> {
    let t = se3::vee(&m.fixed_view::<4, 4>(0, 0).into_owned())?;
    let mut off = m.clone_owned();
    off.fixed_view_mut::<4, 4>(0, 0).fill(0.0);
    off.fixed_view_mut::<6, 1>(4, 10).fill(0.0);
    let residual = off.norm();
    if !(residual <= super::so3::ALGEBRA_TOL) {
        return Err(Error::InvalidAlgebra { residual });
    }
    Ok(join(&t, &m.fixed_view::<6, 1>(4, 10).into_owned()))
}

/// block-diag(ad_T, 0).
pub fn ad(a: &ProductVector) -> ProductMatrix {
    let (t, _) = split(a);
    let mut m = ProductMatrix::zeros();
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(&se3::ad(&t));
    m
}

pub fn exp(a: &ProductVector) -> ProductElement {
    let (t, p) = split(a);
    ProductElement { pose: se3::exp(&t), mom: p }
}

pub fn log(g: &ProductElement) -> Result<ProductVector> {
    Ok(join(&se3::log(&g.pose)?, &g.mom))
}

/// block-diag(K_se(3)(T), I₆).
pub fn dexp(a: &ProductVector) -> ProductMatrix {
    let (t, _) = split(a);
    let mut m = ProductMatrix::identity();
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(&se3::dexp(&t));
    m
}
