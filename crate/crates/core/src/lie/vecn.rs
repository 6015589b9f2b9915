//! (ℝᵏ, +) realized as the matrix group Vec(k, ℝ) ⊂ GL(k+1, ℝ).

use nalgebra::{DMatrix, DVector, SVector};

use crate::error::{Error, Result};

/// An element [[I, p], [0, 1]] of Vec(K, ℝ), stored as p.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VecElement<const K: usize>(pub SVector<f64, K>);

impl<const K: usize> VecElement<K> {
    pub fn identity() -> Self {
        VecElement(SVector::zeros())
    }

    pub fn compose(&self, other: &Self) -> Self {
        VecElement(self.0 + other.0)
    }

    pub fn inverse(&self) -> Self {
        VecElement(-self.0)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(K + 1, K + 1);
        m.view_mut((0, K), (K, 1)).copy_from(&self.0);
        m
    }
}

pub fn hat(v: &DVector<f64>) -> DMatrix<f64> {
    let k = v.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    m.view_mut((0, k), (k, 1)).copy_from(v);
    m
}

pub fn vee(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let k = m.nrows() - 1;
    let mut residual = m.view((0, 0), (k, k)).norm_squared();
    residual += m.row(k).norm_squared();
    let residual = residual.sqrt();
    if !(residual <= super::so3::ALGEBRA_TOL) {
        return Err(Error::InvalidAlgebra { residual });
    }
    Ok(m.view((0, k), (k, 1)).column(0).into_owned())
}

/// exp(Λ(v)) = I + Λ(v); the group element is identified with v itself.
pub fn exp(v: &DVector<f64>) -> DVector<f64> {
    v.clone()
}

pub fn log(p: &DVector<f64>) -> DVector<f64> {
    p.clone()
}

/// The algebra is abelian, so ad_v is the k×k zero matrix.
pub fn ad(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::zeros(v.len(), v.len())
}
