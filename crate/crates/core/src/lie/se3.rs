//! Rigid motions SE(3) with twist coordinates T = (ω; v).

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use super::so3::{self, Rotation};
use crate::error::{Error, Result};

/// Below this angle the dexp coefficients a₂..a₅ use their Taylor series.
pub const DEXP_SMALL_ANGLE: f64 = 1e-3;

/// Body twist (ω; v).
pub type Twist = Vector6<f64>;
/// Body momentum (P_ω; P_v).
pub type Momentum = Vector6<f64>;
/// Wrench (torque; force), dual to [`Twist`].
pub type Wrench = Vector6<f64>;

/// An element H = [[R, p], [0, 1]] of SE(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rot: Rotation,
    pub p: Vector3<f64>,
}

impl Pose {
    pub fn new(rot: Rotation, p: Vector3<f64>) -> Self {
        Pose { rot, p }
    }

    pub fn identity() -> Self {
        Pose { rot: Rotation::identity(), p: Vector3::zeros() }
    }

    pub fn from_translation(p: Vector3<f64>) -> Self {
        Pose { rot: Rotation::identity(), p }
    }

    pub fn r(&self) -> &Matrix3<f64> {
        self.rot.matrix()
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.p);
        m
    }

    /// Reads the rotation and translation blocks; the bottom row is checked.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = (m[(3, 0)].abs() + m[(3, 1)].abs() + m[(3, 2)].abs() + (m[(3, 3)] - 1.0).abs())
            .max(0.0);
        if bottom > 1e-9 {
            return Err(Error::InvalidParameter("bottom row of SE(3) matrix is not (0,0,0,1)".into()));
        }
        let rot = Rotation::new(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Pose { rot, p: m.fixed_view::<3, 1>(0, 3).into_owned() })
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rot: self.rot.compose(&other.rot),
            p: self.r() * other.p + self.p,
        }
    }

    pub fn compose_raw(&self, other: &Pose) -> Pose {
        Pose {
            rot: self.rot.compose_raw(&other.rot),
            p: self.r() * other.p + self.p,
        }
    }

    /// (Rᵀ, −Rᵀp); never a general matrix inverse.
    pub fn inverse(&self) -> Pose {
        let rt = self.rot.transpose();
        Pose { p: -(rt.matrix() * self.p), rot: rt }
    }

    /// Flattened embedding entries: R row-major (9) followed by p (3).
    pub fn entries(&self) -> nalgebra::SVector<f64, 12> {
        let r = self.r();
        let mut x = nalgebra::SVector::<f64, 12>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                x[3 * i + j] = r[(i, j)];
            }
        }
        x.fixed_rows_mut::<3>(9).copy_from(&self.p);
        x
    }
}

pub fn hat(t: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&so3::hat(&t.fixed_rows::<3>(0).into_owned()));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t.fixed_rows::<3>(3));
    m
}

pub fn vee(m: &Matrix4<f64>) -> Result<Twist> {
    let bottom = m.row(3).norm();
    if !(bottom <= so3::ALGEBRA_TOL) {
        return Err(Error::InvalidAlgebra { residual: bottom });
    }
    let w = so3::vee(&m.fixed_view::<3, 3>(0, 0).into_owned())?;
    let mut t = Twist::zeros();
    t.fixed_rows_mut::<3>(0).copy_from(&w);
    t.fixed_rows_mut::<3>(3).copy_from(&m.fixed_view::<3, 1>(0, 3));
    Ok(t)
}

pub(crate) fn split(t: &Vector6<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (t.fixed_rows::<3>(0).into_owned(), t.fixed_rows::<3>(3).into_owned())
}

pub(crate) fn join(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// ad_T = [[Λω, 0], [Λv, Λω]].
pub fn ad(t: &Twist) -> Matrix6<f64> {
    let (w, v) = split(t);
    let wh = so3::hat(&w);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&so3::hat(&v));
    m
}

pub fn exp(t: &Twist) -> Pose {
    let (w, v) = split(t);
    let theta = w.norm();
    let (a, b, c) = so3::rodrigues_coefficients(theta);
    let k = so3::hat(&w);
    let k2 = k * k;
    let r = Matrix3::identity() + k * a + k2 * b;
    let left_jacobian = Matrix3::identity() + k * b + k2 * c;
    Pose { rot: Rotation::from_matrix_unchecked(r), p: left_jacobian * v }
}

/// Principal logarithm, valid while the rotation angle stays below π.
pub fn log(h: &Pose) -> Result<Twist> {
    let w = so3::log(&h.rot)?;
    let theta = w.norm();
    let k = so3::hat(&w);
    let c2 = if theta < so3::SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let (s, c) = theta.sin_cos();
        (2.0 * s - theta * (1.0 + c)) / (2.0 * theta * theta * s)
    };
    let q = Matrix3::identity() - k * 0.5 + k * k * c2;
    Ok(join(&w, &(q * h.p)))
}

/// Coefficients a₀..a₅ of K(q) = Σ aᵢ ad_qⁱ.
pub fn dexp_coefficients(theta: f64) -> [f64; 6] {
    if theta < DEXP_SMALL_ANGLE {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        [
            1.0,
            -0.5,
            1.0 / 6.0 - t4 / 5040.0,
            -1.0 / 24.0 + t4 / 40320.0,
            1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0,
            -1.0 / 720.0 + t2 / 20160.0 - t4 / 1209600.0,
        ]
    } else {
        let (s, c) = theta.sin_cos();
        let sinc = s / theta;
        // 1 − cos θ without cancellation.
        let vers = 2.0 * (0.5 * theta).sin().powi(2);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        [
            1.0,
            -0.5,
            (8.0 + 2.0 * c - 10.0 * sinc) / (4.0 * t2),
            (-4.0 * theta + 12.0 * vers / theta - 2.0 * s) / (4.0 * t3),
            (4.0 + 2.0 * c - 6.0 * sinc) / (4.0 * t2 * t2),
            (-2.0 * theta + 8.0 * vers / theta - 2.0 * s) / (4.0 * t2 * t3),
        ]
    }
}

/// Closed-form derivative of the exponential on se(3).
pub fn dexp(q: &Twist) -> Matrix6<f64> {
    let theta = q.fixed_rows::<3>(0).norm();
    let a = dexp_coefficients(theta);
    let adq = ad(q);
    // Horner evaluation of Σ aᵢ adⁱ.
    let mut k = Matrix6::identity() * a[5];
    for coeff in a[..5].iter().rev() {
        k = adq * k + Matrix6::identity() * *coeff;
    }
    k
}
