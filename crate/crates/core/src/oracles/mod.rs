//! Reference evolutions with no closure: symplectic particle ensembles,
//! split-step wavefunctions, and a semi-Lagrangian Liouville grid.

mod leapfrog;
mod liouville;
mod splitstep;

pub use leapfrog::{leapfrog_evolve, leapfrog_moments, EnsembleSeries};
pub use liouville::{liouville_evolve, LiouvilleConfig, SigmaBudget, Splitting};
pub use splitstep::{splitstep_evolve, splitstep_moments};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step size, horizon and output stride shared by the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Emit every `stride`-th step (the initial and final states always).
    pub stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64, stride: usize) -> Result<Self> {
        let c = IntegratorConfig { dt, t_final, stride };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("t_final", "must be non-negative"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn sample_due(&self, step: usize, steps: usize) -> bool {
        (step + 1).is_multiple_of(self.stride) || step + 1 == steps
    }
}
