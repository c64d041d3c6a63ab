//! Equilibrium and regularized-equilibrium solvers for complete games.

mod lp;
mod mrcp;
mod nash;
mod newton;
mod qre;
mod rd;

pub use mrcp::{mrcp, MrcpConfig};
pub use nash::{nash_2p, nash_np, NashConfig};
pub use qre::{logit_residual, qre_logit, qre_logit_with_history, QreConfig, QRE_CONVERGED};
pub use rd::{fixed_rd, prd, rd_step, rrd};

use crate::error::{Error, Result};
use crate::game::MixedProfile;

/// Replicator-dynamics parameters shared by RRD, PRD and fixed-step RD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdConfig {
    pub step_size: f64,
    pub max_steps: usize,
    /// RRD stops as soon as empirical regret is at or below this value.
    pub regret_threshold: f64,
    /// PRD probability floor.
    pub prd_lower_bound: f64,
}

impl RdConfig {
    pub const DEFAULT_STEP_SIZE: f64 = 1e-3;
    pub const DEFAULT_MAX_STEPS: usize = 100_000;
    pub const DEFAULT_PRD_FLOOR: f64 = 1e-10;

    /// Default step size and step budget with the given regret threshold.
    /// There is no universal threshold; 0.35 worked best for two-player
    /// Leduc poker.
    pub fn with_threshold(regret_threshold: f64) -> Self {
        RdConfig {
            step_size: Self::DEFAULT_STEP_SIZE,
            max_steps: Self::DEFAULT_MAX_STEPS,
            regret_threshold,
            prd_lower_bound: Self::DEFAULT_PRD_FLOOR,
        }
    }

    /// PRD defaults: step 1e-3, 1e5 steps, floor 1e-10.
    pub fn prd_defaults() -> Self {
        Self::with_threshold(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(self.regret_threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "regret_threshold must be non-negative, got {}",
                self.regret_threshold
            )));
        }
        if !(self.prd_lower_bound >= 0.0 && self.prd_lower_bound < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "prd_lower_bound must lie in [0, 1), got {}",
                self.prd_lower_bound
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub profile: MixedProfile,
    /// Regret of `profile` in the game the solver ran on.
    pub regret_total: f64,
    pub steps_used: usize,
    /// RRD: threshold reached. QRE: residual below 1e-8. Otherwise false.
    pub hit_threshold: bool,
    /// Logit fixed-point residual (QRE only).
    pub residual: Option<f64>,
}
