//! Seller and buyer indifference prices, each computed along two routes.

use serde::Serialize;

use super::bounds::{mot_bounds, MotBounds};
use super::dual::{dual_closed_form, dual_generic, PricingContext};
use crate::divergence::{gamma_raw, DivergenceEvaluator, IntegrandSpec, UtilitySpec, GRADIENT_CAP};
use crate::error::{Error, Result};
use crate::optimize::{find_root_increasing, frank_wolfe, ActiveSet, SmoothObjective};

/// Relative agreement demanded between the two routes.
pub const CROSS_CHECK_TOL: f64 = 1e-4;

/// `u_0(0)`: the value of holding nothing with zero initial capital.
pub fn zero_claim_value(ctx: &PricingContext<'_>) -> Result<f64> {
    let zeros = vec![0.0; ctx.poly.n_paths()];
    Ok(super::dual::dual_value(ctx, 0.0, &zeros)?.value)
}

/// `gamma(Q) - E_Q[Psi]`.
struct PenaltyObjective<'e, 'a> {
    eval: DivergenceEvaluator<'a>,
    spec: &'a IntegrandSpec,
    psi: &'e [f64],
    u0: f64,
    ctx: &'e PricingContext<'a>,
    last_gamma: f64,
}

impl SmoothObjective for PenaltyObjective<'_, '_> {
    fn interior(&self) -> bool {
        true
    }

    fn value_and_gradient(&mut self, q: &[f64]) -> (f64, Vec<f64>) {
        let lin: f64 = q.iter().zip(self.psi).map(|(a, b)| a * b).sum();
        match gamma_raw(&mut self.eval, q, self.u0, &self.ctx.opts) {
            Ok(gp) if gp.gamma.is_finite() => {
                let pw = self.ctx.amb.mixture(&gp.weights);
                let grad = q
                    .iter()
                    .zip(&pw)
                    .zip(self.psi)
                    .enumerate()
                    .map(|(j, ((qj, pj), s))| {
                        let slope = if *pj > 0.0 { self.spec.conj_prime_at(j, gp.lambda * qj / pj) } else { GRADIENT_CAP };
                        slope - s
                    })
                    .collect();
                self.last_gamma = gp.gamma;
                (gp.gamma - lin, grad)
            }
            _ => (f64::INFINITY, vec![0.0; q.len()]),
        }
    }
}

/// Both routes for one side of the market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceCertificate {
    /// `sup_Q E_Q[Psi] - gamma(Q)` by Frank-Wolfe.
    pub optimisation: f64,
    /// Root of `u_Psi(x) = u_0(0)`.
    pub bisection: f64,
    /// Maximising measure of the optimisation route.
    pub measure: Vec<f64>,
    pub gamma: f64,
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndifferencePrices {
    pub p_sell: f64,
    pub p_buy: f64,
    pub u0_at_0: f64,
    pub scale: f64,
    pub sell: PriceCertificate,
    pub buy: PriceCertificate,
}

/// `sup_Q E_Q[Psi] - gamma(Q)` over calibrated measures.
pub fn seller_price_by_optimisation(ctx: &PricingContext<'_>, psi: &[f64], u0: f64) -> Result<(f64, Vec<f64>, f64, f64, bool)> {
    let spec = IntegrandSpec::utility(ctx.utility);
    let mut obj = PenaltyObjective {
        eval: DivergenceEvaluator::new(ctx.amb, &spec, &ctx.opts),
        spec: &spec,
        psi,
        u0,
        ctx,
        last_gamma: f64::NAN,
    };
    let fw = frank_wolfe(ctx.oracle(), &mut obj, ctx.start().clone(), &ctx.opts)?;
    let _ = obj.value_and_gradient(&fw.point);
    Ok((-fw.value, fw.point, obj.last_gamma, fw.gap, fw.converged))
}

/// Smallest `x` with `u_Psi(x) >= u_0(0)`, searched on `[low - 1, high + 1]`.
pub fn seller_price_by_bisection(ctx: &PricingContext<'_>, psi: &[f64], u0: f64, bounds: &MotBounds) -> Result<f64> {
    let mut warm: ActiveSet = ctx.start().clone();
    let mut failure = None;
    let mut g = |x: f64| -> f64 {
        let r = match ctx.utility {
            UtilitySpec::Exponential { .. } => dual_closed_form(ctx, x, psi, &mut warm),
            _ => dual_generic(ctx, x, psi, &mut warm),
        };
        match r {
            Ok(s) => s.value - u0,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let root = find_root_increasing(&mut g, (bounds.low - 1.0, bounds.high + 1.0), &ctx.opts);
    if let Some(e) = failure {
        return Err(e);
    }
    root
}

fn seller_side(ctx: &PricingContext<'_>, psi: &[f64], u0: f64, bounds: &MotBounds) -> Result<PriceCertificate> {
    let (optimisation, measure, gamma, gap, converged) = seller_price_by_optimisation(ctx, psi, u0)?;
    let bisection = seller_price_by_bisection(ctx, psi, u0, bounds)?;
    Ok(PriceCertificate { optimisation, bisection, measure, gamma, gap, converged })
}

/// `p_sell(Psi)` and `p_buy(Psi) = -p_sell(-Psi)`, each cross-checked.
pub fn indifference_prices(ctx: &PricingContext<'_>, psi: &[f64]) -> Result<IndifferencePrices> {
    let bounds = mot_bounds(ctx.poly, psi, &ctx.opts)?;
    let u0 = zero_claim_value(ctx)?;
    indifference_prices_with(ctx, psi, u0, &bounds)
}

pub fn indifference_prices_with(ctx: &PricingContext<'_>, psi: &[f64], u0: f64, bounds: &MotBounds) -> Result<IndifferencePrices> {
    let scale = bounds.scale();
    let sell = seller_side(ctx, psi, u0, bounds)?;
    let neg: Vec<f64> = psi.iter().map(|v| -v).collect();
    let neg_bounds = MotBounds { low: -bounds.high, high: -bounds.low, argmin: bounds.argmax.clone(), argmax: bounds.argmin.clone() };
    let mut buy = seller_side(ctx, &neg, u0, &neg_bounds)?;
    buy.optimisation = -buy.optimisation;
    buy.bisection = -buy.bisection;
    for c in [&sell, &buy] {
        if (c.optimisation - c.bisection).abs() > CROSS_CHECK_TOL * scale {
            return Err(Error::CrossCheckFailed { optimisation: c.optimisation, bisection: c.bisection });
        }
    }
    Ok(IndifferencePrices { p_sell: sell.optimisation, p_buy: buy.optimisation, u0_at_0: u0, scale, sell, buy })
}
