//! The rotation group SO(3) and its algebra so(3).
//!
//! Coordinates ω ∈ ℝ³ map to skew-symmetric matrices through [`hat`]. The
//! exponential is Rodrigues' formula; the logarithm is defined on rotations
//! whose angle stays strictly below π.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this angle the closed forms switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Logarithms are refused within this margin of the cut locus θ = π.
pub const LOG_BOUNDARY_MARGIN: f64 = 1e-6;

/// Tolerance used when checking that a matrix lies in the algebra.
pub const ALGEBRA_TOL: f64 = 1e-9;

const ORTHO_REPAIR_TRIGGER: f64 = 1e-7;

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates orthonormality and orientation within `1e-9`.
    pub fn new(r: Matrix3<f64>) -> Result<Self> {
        let ortho = (r.transpose() * r - Matrix3::identity()).norm();
        let det = r.determinant();
        if !ortho.is_finite() || ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "not a rotation matrix (|RᵀR - I| = {ortho:e}, det = {det})"
            )));
        }
        Ok(Rotation(r))
    }

    pub fn from_matrix_unchecked(r: Matrix3<f64>) -> Self {
        Rotation(r)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Composition with one Newton re-orthonormalization step when the
    /// product has drifted by more than `1e-7`.
    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(reorthonormalize(self.0 * other.0))
    }

    /// Plain matrix product, no drift repair.
    pub fn compose_raw(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    /// ‖RᵀR − I‖_F
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> f64 {
        let a = skew_part_vee(&self.0);
        let c = 0.5 * (self.0.trace() - 1.0);
        a.norm().atan2(c)
    }
}

pub(crate) fn reorthonormalize(r: Matrix3<f64>) -> Matrix3<f64> {
    let gram = r.transpose() * r;
    if (gram - Matrix3::identity()).norm() > ORTHO_REPAIR_TRIGGER {
        r * (Matrix3::identity() * 3.0 - gram) * 0.5
    } else {
        r
    }
}

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`]; rejects matrices that are not skew-symmetric.
pub fn vee(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let residual = (m + m.transpose()).norm();
    if !(residual <= ALGEBRA_TOL) {
        return Err(Error::InvalidAlgebra { residual });
    }
    Ok(vee_unchecked(m))
}

pub fn vee_unchecked(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

fn skew_part_vee(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// ad_ω = Λ(ω).
pub fn ad(w: &Vector3<f64>) -> Matrix3<f64> {
    hat(w)
}

/// sin θ / θ, (1 − cos θ) / θ², (θ − sin θ) / θ³ with Taylor fallbacks.
pub(crate) fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        (s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta))
    }
}

pub fn exp(w: &Vector3<f64>) -> Rotation {
    let theta = w.norm();
    let (a, b, _) = rodrigues_coefficients(theta);
    let k = hat(w);
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// Principal logarithm. Fails with [`Error::OutOfChart`] when the angle is
/// within `1e-6` of π.
pub fn log(r: &Rotation) -> Result<Vector3<f64>> {
    let m = r.matrix();
    let a = skew_part_vee(m);
    let c = (0.5 * (m.trace() - 1.0)).clamp(-1.0, 1.0);
    let s = a.norm();
    let theta = s.atan2(c);
    if !theta.is_finite() {
        return Err(Error::NonFinite("rotation logarithm".into()));
    }
    if theta > std::f64::consts::PI - LOG_BOUNDARY_MARGIN {
        return Err(Error::OutOfChart {
            chart: 0,
            reason: format!("rotation angle {theta} too close to π"),
        });
    }
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        return Ok(a * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if c >= 0.0 {
        return Ok(a * (theta / s));
    }
    // Beyond π/2 the skew part is small; recover the axis from the
    // symmetric part (1 − cos θ) n nᵀ instead.
    let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * c;
    let col = (0..3)
        .max_by(|&i, &j| sym[(i, i)].total_cmp(&sym[(j, j)]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = sym.column(col).into_owned();
    axis /= axis.norm();
    if axis.dot(&a) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Closed-form derivative of the exponential,
/// K(ω) = Σ (−1)ᵏ/(k+1)! ad_ωᵏ = I − (1−cos θ)/θ² Λω + (θ − sin θ)/θ³ Λω².
pub fn dexp(w: &Vector3<f64>) -> Matrix3<f64> {
    let (_, b, c) = rodrigues_coefficients(w.norm());
    let k = hat(w);
    Matrix3::identity() - k * b + k * k * c
}
