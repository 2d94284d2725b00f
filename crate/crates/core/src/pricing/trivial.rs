//! Ambiguity set equal to all calibrated martingale measures.

use std::sync::Arc;

use serde::Serialize;

use super::bounds::mot_bounds;
use super::dual::PricingContext;
use super::indifference::{indifference_prices_with, zero_claim_value};
use crate::divergence::{AmbiguitySet, UtilitySpec};
use crate::error::{Error, Result};
use crate::market::MarginalSystem;
use crate::optimize::{enumerate_vertices, SolveOptions};
use crate::polytope::{build_lattice, polytope_on, PathMeasure};

pub const TRIVIAL_PATH_LIMIT: usize = 200;

/// Vertex count above which the check is refused.
pub const TRIVIAL_VERTEX_LIMIT: usize = 1000;

const MAX_BASES: usize = 2_000_000;
const TRIVIAL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrivialCaseReport {
    pub n_vertices: usize,
    pub mot_low: f64,
    pub mot_high: f64,
    pub p_sell: f64,
    pub p_buy: f64,
    pub sell_error: f64,
    pub buy_error: f64,
    pub passed: bool,
}

/// With the priors set to the vertices of the calibrated polytope and
/// exponential utility, indifference prices must hit the model-free bounds.
pub fn trivial_case_check(sys: &MarginalSystem, psi: &[f64], opts: &SolveOptions) -> Result<TrivialCaseReport> {
    trivial_case_check_with(sys, psi, opts, TRIVIAL_VERTEX_LIMIT)
}

/// As [`trivial_case_check`] with a custom cap on the number of vertices.
pub fn trivial_case_check_with(
    sys: &MarginalSystem,
    psi: &[f64],
    opts: &SolveOptions,
    max_vertices: usize,
) -> Result<TrivialCaseReport> {
    let lattice = match build_lattice(sys, TRIVIAL_PATH_LIMIT) {
        Err(Error::SizeLimit { paths, cap }) => {
            return Err(Error::HarnessLimit(format!("{paths} paths exceed the vertex enumeration limit of {cap}")))
        }
        other => Arc::new(other?),
    };
    let poly = polytope_on(lattice.clone(), sys)?;
    let vertices = enumerate_vertices(poly.rows(), poly.rhs(), MAX_BASES)?;
    if vertices.is_empty() {
        return Err(Error::InfeasiblePolytope);
    }
    if vertices.len() > max_vertices {
        return Err(Error::HarnessLimit(format!("{} vertices exceed the limit of {max_vertices}", vertices.len())));
    }
    let priors = vertices
        .iter()
        .map(|v| PathMeasure::new(lattice.clone(), v.iter().map(|x| x.max(0.0)).collect()))
        .collect::<Result<Vec<_>>>()?;
    let amb = AmbiguitySet::new(priors)?;
    let ctx = PricingContext::new(sys, &poly, &amb, UtilitySpec::Exponential { a: 1.0 }, opts)?;
    let bounds = mot_bounds(&poly, psi, opts)?;
    let u0 = zero_claim_value(&ctx)?;
    let prices = indifference_prices_with(&ctx, psi, u0, &bounds)?;
    let sell_error = (prices.p_sell - bounds.high).abs();
    let buy_error = (prices.p_buy - bounds.low).abs();
    Ok(TrivialCaseReport {
        n_vertices: vertices.len(),
        mot_low: bounds.low,
        mot_high: bounds.high,
        p_sell: prices.p_sell,
        p_buy: prices.p_buy,
        sell_error,
        buy_error,
        passed: sell_error <= TRIVIAL_TOL && buy_error <= TRIVIAL_TOL,
    })
}
