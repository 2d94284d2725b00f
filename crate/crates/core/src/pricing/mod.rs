//! Model-free bounds, robust utility duality and indifference prices.

mod bounds;
mod dual;
mod indifference;
mod payoff;
mod primal;
mod report;
mod strategy;
mod trivial;

pub use bounds::{mot_bounds, MotBounds};
pub use dual::{dual_value, dual_value_generic, DualRoute, DualSolution, PricingContext};
pub use indifference::{
    indifference_prices, indifference_prices_with, seller_price_by_bisection, seller_price_by_optimisation, zero_claim_value,
    IndifferencePrices, PriceCertificate, CROSS_CHECK_TOL,
};
pub use payoff::{piecewise_linear, Payoff};
pub use primal::{primal_value, primal_value_in, PrimalSolution};
pub use report::{price, Diagnostics, PricingReport, DUALITY_GAP_TOL, SCHEMA_VERSION};
pub use strategy::{call_span_restrict, gain_dynamic, gain_static, CallSpan, DynamicStrategy, StaticBasis, StaticPosition};
pub use trivial::{trivial_case_check, trivial_case_check_with, TrivialCaseReport, TRIVIAL_PATH_LIMIT, TRIVIAL_VERTEX_LIMIT};
