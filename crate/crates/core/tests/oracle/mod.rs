//! Reference implementations used only by the acceptance suite.

pub mod flat;
pub mod rigid;
