//! Optimization of dynamic systems on matrix Lie groups with the generalized
//! adjoint method, specialized to energy-shaping control of a rigid body.

pub mod error;
pub mod integrate;
pub mod atlas;
pub mod diff;
pub mod adjoint;
pub mod dynamics;
pub mod lie;
pub mod training;

pub use error::{Error, Result};
