//! ODE integration on ℝⁿ and on Lie groups through exponential charts.

mod lie;
mod rn;

pub use lie::{chart_rhs, lie_integrate, ChartSegment, ChartTrajectory, LieOptions, SwitchEvent};
pub use rn::{integrate_rn, integrate_until, DenseTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dopri5,
    Rk4,
}

/// Solver settings. For `rk4` the step is `initial_step`, shortened so that
/// an integer number of steps covers the interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub initial_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::Dopri5, rtol: 1e-5, atol: 1e-4, max_step: 0.1, initial_step: 1e-2 }
    }
}

impl SolverConfig {
    pub fn dopri5(rtol: f64, atol: f64) -> Self {
        SolverConfig { rtol, atol, ..Default::default() }
    }

    pub fn rk4(step: f64) -> Self {
        SolverConfig { method: Method::Rk4, initial_step: step, max_step: step, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rtol) || !positive(self.atol) {
            return Err(Error::Config("solver rtol and atol must be positive".into()));
        }
        if !positive(self.max_step) || !positive(self.initial_step) {
            return Err(Error::Config("solver max_step and initial_step must be positive".into()));
        }
        Ok(())
    }
}
