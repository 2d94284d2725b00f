//! Utility pairs, normal integrands, the robust integral functional and the
//! robust divergence, plus a finite-state conjugacy harness.

mod conjugacy;
mod functional;
mod integrand;
mod utility;

pub use conjugacy::{conjugacy_check, ConjugacyReport, CONJUGACY_TOL, HARNESS_PATH_LIMIT};
pub(crate) use functional::gamma_raw;
pub use functional::{
    divergence_robust, divergence_single, gamma_penalty, robust_integral, AmbiguitySet, DivergenceEvaluator,
    GammaPenalty, RobustDivergence, LAMBDA_FLOOR,
};
pub use integrand::{BaseIntegrand, IntegrandSpec, GRADIENT_CAP};
pub use utility::UtilitySpec;
