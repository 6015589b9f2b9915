//! Matrix Lie group primitives.
//!
//! Each group has a typed module with fixed-size operations. This module adds
//! a tag-dispatched API over dynamically sized vectors for callers that work
//! with several groups at once.

pub mod gradient;
pub mod product;
pub mod se3;
pub mod so3;
pub mod vecn;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, SMatrix, Vector3, Vector6};

pub use gradient::{intrinsic_gradient, intrinsic_gradient_with, perturbation_jacobian};
pub use product::{ProductElement, ProductVector};
pub use se3::{Momentum, Pose, Twist, Wrench};
pub use so3::Rotation;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupTag {
    So3,
    Se3,
    Vec(usize),
    Product,
}

impl GroupTag {
    /// Dimension of the algebra.
    pub fn dim(&self) -> usize {
        match self {
            GroupTag::So3 => 3,
            GroupTag::Se3 => 6,
            GroupTag::Vec(k) => *k,
            GroupTag::Product => 12,
        }
    }

    /// Side length of the defining matrices.
    pub fn matrix_size(&self) -> usize {
        match self {
            GroupTag::So3 => 3,
            GroupTag::Se3 => 4,
            GroupTag::Vec(k) => k + 1,
            GroupTag::Product => 11,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    So3(Rotation),
    Se3(Pose),
    Vec(DVector<f64>),
    Product(ProductElement),
}

impl GroupElement {
    pub fn tag(&self) -> GroupTag {
        match self {
            GroupElement::So3(_) => GroupTag::So3,
            GroupElement::Se3(_) => GroupTag::Se3,
            GroupElement::Vec(v) => GroupTag::Vec(v.len()),
            GroupElement::Product(_) => GroupTag::Product,
        }
    }

    pub fn identity(tag: GroupTag) -> Self {
        match tag {
            GroupTag::So3 => GroupElement::So3(Rotation::identity()),
            GroupTag::Se3 => GroupElement::Se3(Pose::identity()),
            GroupTag::Vec(k) => GroupElement::Vec(DVector::zeros(k)),
            GroupTag::Product => GroupElement::Product(ProductElement::identity()),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            GroupElement::So3(r) => to_dmatrix(r.matrix()),
            GroupElement::Se3(h) => to_dmatrix(&h.to_matrix()),
            GroupElement::Vec(v) => DMatrix::identity(v.len() + 1, v.len() + 1) + vecn::hat(v),
            GroupElement::Product(g) => to_dmatrix(&g.to_matrix()),
        }
    }
}

fn to_dmatrix<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

fn check_len(a: &DVector<f64>, tag: GroupTag) -> Result<()> {
    if a.len() != tag.dim() {
        return Err(Error::DimensionMismatch { expected: tag.dim(), got: a.len() });
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

fn v3(a: &DVector<f64>) -> Vector3<f64> {
    Vector3::from_column_slice(a.as_slice())
}

fn v6(a: &DVector<f64>) -> Vector6<f64> {
    Vector6::from_column_slice(a.as_slice())
}

fn v12(a: &DVector<f64>) -> ProductVector {
    ProductVector::from_column_slice(a.as_slice())
}

/// Λ(a) for the group named by `tag`.
pub fn hat(a: &DVector<f64>, tag: GroupTag) -> Result<DMatrix<f64>> {
    check_len(a, tag)?;
    Ok(match tag {
        GroupTag::So3 => to_dmatrix(&so3::hat(&v3(a))),
        GroupTag::Se3 => to_dmatrix(&se3::hat(&v6(a))),
        GroupTag::Vec(_) => vecn::hat(a),
        GroupTag::Product => to_dmatrix(&product::hat(&v12(a))),
    })
}

/// Λ⁻¹(m); fails when m is not in the algebra within `1e-9`.
pub fn vee(m: &DMatrix<f64>, tag: GroupTag) -> Result<DVector<f64>> {
    check_square(m, tag.matrix_size())?;
    Ok(match tag {
        GroupTag::So3 => {
            let w = so3::vee(&Matrix3::from_column_slice(m.as_slice()))?;
            DVector::from_column_slice(w.as_slice())
        }
        GroupTag::Se3 => {
            let t = se3::vee(&Matrix4::from_column_slice(m.as_slice()))?;
            DVector::from_column_slice(t.as_slice())
        }
        GroupTag::Vec(_) => vecn::vee(m)?,
        GroupTag::Product => {
            let a = product::vee(&SMatrix::<f64, 11, 11>::from_column_slice(m.as_slice()))?;
            DVector::from_column_slice(a.as_slice())
        }
    })
}

/// ad_a as an n×n matrix.
pub fn adjoint_rep(a: &DVector<f64>, tag: GroupTag) -> Result<DMatrix<f64>> {
    check_len(a, tag)?;
    Ok(match tag {
        GroupTag::So3 => to_dmatrix(&so3::ad(&v3(a))),
        GroupTag::Se3 => to_dmatrix(&se3::ad(&v6(a))),
        GroupTag::Vec(_) => vecn::ad(a),
        GroupTag::Product => to_dmatrix(&product::ad(&v12(a))),
    })
}

pub fn exp_group(a: &DVector<f64>, tag: GroupTag) -> Result<GroupElement> {
    check_len(a, tag)?;
    crate::error::ensure_finite(a.as_slice(), "exp argument")?;
    Ok(match tag {
        GroupTag::So3 => GroupElement::So3(so3::exp(&v3(a))),
        GroupTag::Se3 => GroupElement::Se3(se3::exp(&v6(a))),
        GroupTag::Vec(_) => GroupElement::Vec(vecn::exp(a)),
        GroupTag::Product => GroupElement::Product(product::exp(&v12(a))),
    })
}

pub fn log_group(g: &GroupElement) -> Result<DVector<f64>> {
    Ok(match g {
        GroupElement::So3(r) => DVector::from_column_slice(so3::log(r)?.as_slice()),
        GroupElement::Se3(h) => DVector::from_column_slice(se3::log(h)?.as_slice()),
        GroupElement::Vec(v) => vecn::log(v),
        GroupElement::Product(x) => DVector::from_column_slice(product::log(x)?.as_slice()),
    })
}

/// K(q), the derivative of the exponential in left-trivialized form.
pub fn dexp(q: &DVector<f64>, tag: GroupTag) -> Result<DMatrix<f64>> {
    check_len(q, tag)?;
    Ok(match tag {
        GroupTag::So3 => to_dmatrix(&so3::dexp(&v3(q))),
        GroupTag::Se3 => to_dmatrix(&se3::dexp(&v6(q))),
        GroupTag::Vec(k) => DMatrix::identity(k, k),
        GroupTag::Product => to_dmatrix(&product::dexp(&v12(q))),
    })
}

/// Truncated series Σ_{k=0}^{order} (−1)ᵏ/(k+1)! adᵏ.
pub fn dexp_series(ad: &DMatrix<f64>, order: usize) -> DMatrix<f64> {
    let n = ad.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=order {
        term = &term * ad * (-1.0 / (k as f64 + 1.0));
        sum += &term;
    }
    sum
}

pub fn compose(g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
    Ok(match (g, h) {
        (GroupElement::So3(a), GroupElement::So3(b)) => GroupElement::So3(a.compose(b)),
        (GroupElement::Se3(a), GroupElement::Se3(b)) => GroupElement::Se3(a.compose(b)),
        (GroupElement::Vec(a), GroupElement::Vec(b)) if a.len() == b.len() => GroupElement::Vec(a + b),
        (GroupElement::Product(a), GroupElement::Product(b)) => GroupElement::Product(a.compose(b)),
        _ => {
            return Err(Error::DimensionMismatch {
                expected: g.tag().dim(),
                got: h.tag().dim(),
            })
        }
    })
}

pub fn inverse(g: &GroupElement) -> GroupElement {
    match g {
        GroupElement::So3(a) => GroupElement::So3(a.inverse()),
        GroupElement::Se3(a) => GroupElement::Se3(a.inverse()),
        GroupElement::Vec(a) => GroupElement::Vec(-a),
        GroupElement::Product(a) => GroupElement::Product(a.inverse()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TAGS: [GroupTag; 4] = [GroupTag::So3, GroupTag::Se3, GroupTag::Vec(6), GroupTag::Product];

    /// Coordinates whose rotational part has norm `angle`.
    fn algebra_vector(tag: GroupTag, raw: &[f64], angle: f64) -> DVector<f64> {
        let mut a = DVector::from_column_slice(&raw[..tag.dim()]);
        if matches!(tag, GroupTag::So3 | GroupTag::Se3 | GroupTag::Product) {
            let n = a.rows(0, 3).norm().max(1e-12);
            let scaled = a.rows(0, 3) * (angle / n);
            a.rows_mut(0, 3).copy_from(&scaled);
        }
        a
    }

    #[test]
    fn dimension_errors() {
        let a = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(hat(&a, GroupTag::So3), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            compose(&GroupElement::identity(GroupTag::So3), &GroupElement::identity(GroupTag::Se3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn so3_ad_of_e3_is_hat() {
        let a = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_eq!(adjoint_rep(&a, GroupTag::So3).unwrap(), hat(&a, GroupTag::So3).unwrap());
    }

    #[test]
    fn vec_ad_is_zero() {
        let a = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        assert_eq!(adjoint_rep(&a, GroupTag::Vec(6)).unwrap(), DMatrix::zeros(6, 6));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for tag in TAGS {
            let g = exp_group(&DVector::zeros(tag.dim()), tag).unwrap();
            assert_eq!(g.to_matrix(), DMatrix::identity(tag.matrix_size(), tag.matrix_size()));
        }
    }

    #[test]
    fn product_dexp_matches_series() {
        let a = DVector::from_fn(12, |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.3);
        let closed = dexp(&a, GroupTag::Product).unwrap();
        let series = dexp_series(&adjoint_rep(&a, GroupTag::Product).unwrap(), 40);
        assert_relative_eq!(closed, series, epsilon = 1e-12);
    }

    #[test]
    fn so3_dexp_matches_order_twelve_series_at_moderate_angle() {
        let a = DVector::from_vec(vec![0.2, -0.3, 0.4]);
        let series = dexp_series(&adjoint_rep(&a, GroupTag::So3).unwrap(), 12);
        assert_relative_eq!(dexp(&a, GroupTag::So3).unwrap(), series, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn exp_log_roundtrip(raw in proptest::collection::vec(-3.0f64..3.0, 12), angle in 0.0f64..(std::f64::consts::PI - 0.1)) {
            for tag in TAGS {
                let a = algebra_vector(tag, &raw, angle);
                let back = log_group(&exp_group(&a, tag).unwrap()).unwrap();
                prop_assert!((back - &a).amax() < 1e-8, "{tag:?}");
            }
        }

        #[test]
        fn hat_vee_and_bracket(raw in proptest::collection::vec(-2.0f64..2.0, 24)) {
            for tag in TAGS {
                let n = tag.dim();
                let a = DVector::from_column_slice(&raw[..n]);
                let b = DVector::from_column_slice(&raw[12..12 + n]);
                let (ha, hb) = (hat(&a, tag).unwrap(), hat(&b, tag).unwrap());
                prop_assert_eq!(vee(&ha, tag).unwrap(), a.clone());
                let bracket = vee(&(&ha * &hb - &hb * &ha), tag).unwrap();
                let via_ad = adjoint_rep(&a, tag).unwrap() * &b;
                prop_assert!((bracket - via_ad).amax() < 1e-12);
            }
        }

        #[test]
        fn inverse_composes_to_identity(raw in proptest::collection::vec(-2.0f64..2.0, 12)) {
            for tag in TAGS {
                let g = exp_group(&DVector::from_column_slice(&raw[..tag.dim()]), tag).unwrap();
                let e = compose(&g, &inverse(&g)).unwrap().to_matrix();
                let n = tag.matrix_size();
                prop_assert!((e - DMatrix::identity(n, n)).amax() < 1e-10);
                let neg = exp_group(&-DVector::from_column_slice(&raw[..tag.dim()]), tag).unwrap();
                prop_assert!((inverse(&g).to_matrix() - neg.to_matrix()).amax() < 1e-12);
            }
        }

        #[test]
        fn dexp_defining_relation(raw in proptest::collection::vec(-1.0f64..1.0, 12), angle in 0.0f64..3.0) {
            let q = algebra_vector(GroupTag::Se3, &raw, angle);
            let qdot = DVector::from_column_slice(&raw[6..12]);
            let eps = 1e-6;
            let plus = exp_group(&(&q + &qdot * eps), GroupTag::Se3).unwrap().to_matrix();
            let minus = exp_group(&(&q - &qdot * eps), GroupTag::Se3).unwrap().to_matrix();
            let ginv = inverse(&exp_group(&q, GroupTag::Se3).unwrap()).to_matrix();
            let fd = &ginv * (plus - minus) / (2.0 * eps);
            let lhs = hat(&(dexp(&q, GroupTag::Se3).unwrap() * &qdot), GroupTag::Se3).unwrap();
            prop_assert!((lhs - fd).amax() < 1e-5);
        }
    }
}
