//! Numerical engines: dense simplex LP, Frank-Wolfe over polytopes,
//! 1-D convex search, weight-simplex minimisation and smoothed max-min.

mod frank_wolfe;
mod lp;
mod maxmin;
mod scalar;
mod simplex;
mod vertices;

pub use frank_wolfe::{frank_wolfe, ActiveSet, FwResult, LinearOracle, LpOracle, SmoothObjective};
pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
pub(crate) use maxmin::cholesky_solve;
pub use maxmin::{maximize_min, ConcaveFamily, ConcavePiece, MaxMinResult, BETA_SCHEDULE};
pub use scalar::{bracket_upward, find_root_increasing, minimize_convex_1d, Scalar1d};
pub use simplex::{minimize_over_simplex, SimplexResult};
pub use vertices::enumerate_vertices;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and iteration caps shared by the engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub lp_max_pivots: usize,
    pub fw_max_iterations: usize,
    pub scalar_max_iterations: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            lp_max_pivots: 1_000_000,
            fw_max_iterations: 50_000,
            scalar_max_iterations: 200,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::Parse(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.lp_max_pivots == 0 || self.fw_max_iterations == 0 || self.scalar_max_iterations == 0 {
            return Err(Error::Parse("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
