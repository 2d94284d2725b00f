//! Model-free bounds `inf/sup E_Q[Psi]` over calibrated martingale measures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimize::{solve_lp, LpStatus, SolveOptions};
use crate::polytope::MartingalePolytope;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotBounds {
    pub low: f64,
    pub high: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
}

impl MotBounds {
    /// `1 + |low| + |high|`, the unit for relative tolerances.
    pub fn scale(&self) -> f64 {
        1.0 + self.low.abs() + self.high.abs()
    }
}

pub fn mot_bounds(poly: &MartingalePolytope, psi: &[f64], opts: &SolveOptions) -> Result<MotBounds> {
    if psi.len() != poly.n_paths() {
        return Err(Error::LatticeMismatch);
    }
    let low = solve_lp(&poly.program(psi.to_vec())?, opts)?;
    let high = solve_lp(&poly.program(psi.iter().map(|v| -v).collect())?, opts)?;
    for s in [&low, &high] {
        match s.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::InfeasiblePolytope),
            LpStatus::Unbounded => return Err(Error::Numerical("bounded polytope reported unbounded".into())),
        }
    }
    Ok(MotBounds { low: low.value, high: -high.value, argmin: low.primal, argmax: high.primal })
}
