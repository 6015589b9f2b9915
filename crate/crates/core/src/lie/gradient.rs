//! Intrinsic gradients of scalar functions of the embedded matrix entries.
//!
//! For f: SE(3) → ℝ given through its gradient with respect to the entries
//! (R row-major, then p), the left-trivialized differential is
//! d_H f = ∂/∂q f(H(I + Λq)) = Jᵀ ∂f/∂entries.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector6};

use super::se3::Pose;
use super::so3::{self, Rotation};
use crate::error::Result;

pub type EntryVector = SVector<f64, 12>;

/// 12×6 map from twist coordinates to the first-order change of the entries
/// of H(I + Λq).
pub fn perturbation_jacobian(h: &Pose) -> SMatrix<f64, 12, 6> {
    let r = h.r();
    let mut j = SMatrix::<f64, 12, 6>::zeros();
    for k in 0..3 {
        let dr = r * so3::hat(&Vector3::ith(k, 1.0));
        for a in 0..3 {
            for b in 0..3 {
                j[(3 * a + b, k)] = dr[(a, b)];
            }
        }
        j.fixed_view_mut::<3, 1>(9, 3 + k).copy_from(&r.column(k));
    }
    j
}

/// 9×3 analogue on SO(3), entries row-major.
pub fn perturbation_jacobian_so3(rot: &Rotation) -> SMatrix<f64, 9, 3> {
    let r = rot.matrix();
    let mut j = SMatrix::<f64, 9, 3>::zeros();
    for k in 0..3 {
        let dr = r * so3::hat(&Vector3::ith(k, 1.0));
        for a in 0..3 {
            for b in 0..3 {
                j[(3 * a + b, k)] = dr[(a, b)];
            }
        }
    }
    j
}

pub fn intrinsic_gradient(h: &Pose, entry_grad: &EntryVector) -> Vector6<f64> {
    perturbation_jacobian(h).transpose() * entry_grad
}

/// Same as [`intrinsic_gradient`] with the entry gradient supplied by a
/// fallible callback.
pub fn intrinsic_gradient_with<F>(h: &Pose, f: F) -> Result<Vector6<f64>>
where
    F: FnOnce(&Pose) -> Result<EntryVector>,
{
    Ok(intrinsic_gradient(h, &f(h)?))
}

/// Entries of H·Λ(q) without the implicit bottom row: (RΛω, Rv).
pub(crate) fn perturbed_entries(h: &Pose, q: &Vector6<f64>) -> EntryVector {
    let w = Vector3::new(q[0], q[1], q[2]);
    let v = Vector3::new(q[3], q[4], q[5]);
    let dr: Matrix3<f64> = h.r() * so3::hat(&w);
    let mut e = EntryVector::zeros();
    for a in 0..3 {
        for b in 0..3 {
            e[3 * a + b] = dr[(a, b)];
        }
    }
    e.fixed_rows_mut::<3>(9).copy_from(&(h.r() * v));
    e
}
