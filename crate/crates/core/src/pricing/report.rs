//! End-to-end pricing report.

use serde::Serialize;

use super::bounds::mot_bounds;
use super::dual::{dual_value, DualSolution, PricingContext};
use super::indifference::{indifference_prices_with, zero_claim_value, PriceCertificate};
use super::primal::{primal_value, PrimalSolution};
use crate::error::Result;

pub const SCHEMA_VERSION: &str = "semistatic.price/1";

/// Relative duality gap accepted as converged.
pub const DUALITY_GAP_TOL: f64 = 1e-3;

/// Sandwich slack around the model-free bounds.
const SANDWICH_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub scale: f64,
    pub u0_at_0: f64,
    pub relative_gap: f64,
    pub primal_below_dual: bool,
    pub gap_within_tolerance: bool,
    pub sandwich_holds: bool,
    pub sell: PriceCertificate,
    pub buy: PriceCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingReport {
    pub schema_version: &'static str,
    pub x: f64,
    pub mot_low: f64,
    pub mot_high: f64,
    pub u_psi_at_x: f64,
    pub dual: DualSolution,
    pub primal: PrimalSolution,
    pub duality_gap: f64,
    pub p_sell: f64,
    pub p_buy: f64,
    pub diagnostics: Diagnostics,
}

/// Runs every pricing sub-solve for `psi` at initial capital `x`.
pub fn price(ctx: &PricingContext<'_>, psi: &[f64], x: f64) -> Result<PricingReport> {
    let bounds = mot_bounds(ctx.poly, psi, &ctx.opts)?;
    let dual = dual_value(ctx, x, psi)?;
    let primal = primal_value(ctx, x, psi)?;
    let u0 = zero_claim_value(ctx)?;
    let prices = indifference_prices_with(ctx, psi, u0, &bounds)?;
    let duality_gap = dual.value - primal.value;
    let relative_gap = duality_gap / dual.value.abs().max(f64::MIN_POSITIVE);
    let sandwich_holds = bounds.low - SANDWICH_SLACK <= prices.p_buy
        && prices.p_buy <= prices.p_sell + SANDWICH_SLACK
        && prices.p_sell <= bounds.high + SANDWICH_SLACK;
    let diagnostics = Diagnostics {
        scale: bounds.scale(),
        u0_at_0: u0,
        relative_gap,
        primal_below_dual: primal.value <= dual.value + 1e-12 * (1.0 + dual.value.abs()),
        gap_within_tolerance: relative_gap <= DUALITY_GAP_TOL,
        sandwich_holds,
        sell: prices.sell,
        buy: prices.buy,
    };
    Ok(PricingReport {
        schema_version: SCHEMA_VERSION,
        x,
        mot_low: bounds.low,
        mot_high: bounds.high,
        u_psi_at_x: dual.value,
        dual,
        primal,
        duality_gap,
        p_sell: prices.p_sell,
        p_buy: prices.p_buy,
        diagnostics,
    })
}
