//! The dual side: divergence minimisation over calibrated martingale measures.

use serde::Serialize;

use crate::divergence::{AmbiguitySet, BaseIntegrand, DivergenceEvaluator, IntegrandSpec, UtilitySpec, LAMBDA_FLOOR};
use crate::error::{Error, Result};
use crate::market::MarginalSystem;
use crate::optimize::{frank_wolfe, minimize_convex_1d, solve_lp, ActiveSet, LinearProgram, LpStatus, SmoothObjective, SolveOptions};
use crate::polytope::{feasibility, FaceOracle, MartingalePolytope, PolytopeVerdict};

/// Everything the pricing solvers share for one calibrated instance.
pub struct PricingContext<'a> {
    pub sys: &'a MarginalSystem,
    pub poly: &'a MartingalePolytope,
    pub amb: &'a AmbiguitySet,
    pub utility: UtilitySpec,
    pub opts: SolveOptions,
    oracle: FaceOracle,
    start: ActiveSet,
}

impl<'a> PricingContext<'a> {
    /// Checks feasibility and that some calibrated martingale measure is
    /// absolutely continuous with respect to the prior hull, which is what
    /// makes `J(lambda Q)` finite for the built-in utilities.
    pub fn new(
        sys: &'a MarginalSystem,
        poly: &'a MartingalePolytope,
        amb: &'a AmbiguitySet,
        utility: UtilitySpec,
        opts: &SolveOptions,
    ) -> Result<Self> {
        opts.validate()?;
        utility.validate()?;
        if amb.lattice().as_ref() != poly.lattice().as_ref() {
            return Err(Error::LatticeMismatch);
        }
        if let PolytopeVerdict::Infeasible { .. } = feasibility(poly, opts)? {
            return Err(Error::InfeasiblePolytope);
        }
        let columns: Vec<usize> = amb.support().iter().enumerate().filter(|(_, s)| **s).map(|(j, _)| j).collect();
        let rows: Vec<Vec<f64>> = poly.rows().iter().map(|r| columns.iter().map(|&j| r[j]).collect()).collect();
        let restricted = LinearProgram::new(vec![0.0; columns.len()], rows, poly.rhs().to_vec())?;
        if solve_lp(&restricted, opts)?.status != LpStatus::Optimal {
            return Err(Error::AssumptionViolated(
                "no calibrated martingale measure is absolutely continuous with respect to the priors".into(),
            ));
        }
        let oracle = FaceOracle::new(poly, columns, opts);
        let start = oracle.interior_start()?;
        Ok(Self { sys, poly, amb, utility, opts: opts.clone(), oracle, start })
    }

    pub fn oracle(&self) -> &FaceOracle {
        &self.oracle
    }

    pub fn start(&self) -> &ActiveSet {
        &self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualRoute {
    ClosedForm,
    Generic,
}

/// Minimiser `(lambda, Q, w)` of `J(lambda Q) - lambda E_Q[Psi] + lambda x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    pub route: DualRoute,
    pub value: f64,
    pub lambda: f64,
    pub q: Vec<f64>,
    pub weights: Vec<f64>,
    /// Frank-Wolfe gap of the inner problem at the returned point.
    pub gap: f64,
    pub converged: bool,
    /// Set when the optimal `lambda` sits on the search bracket.
    pub lambda_at_edge: bool,
}

/// `E(Q) - a E_Q[Psi]` up to a constant, with `E` the robust relative entropy.
struct EntropyObjective<'e, 'a> {
    eval: DivergenceEvaluator<'a>,
    psi: &'e [f64],
    a: f64,
    weights: Vec<f64>,
}

impl SmoothObjective for EntropyObjective<'_, '_> {
    fn interior(&self) -> bool {
        true
    }

    fn value_and_gradient(&mut self, q: &[f64]) -> (f64, Vec<f64>) {
        let (r, g) = self.eval.value_and_gradient(q);
        if !r.value.is_finite() {
            return (f64::INFINITY, g);
        }
        let mass: f64 = q.iter().sum();
        let lin: f64 = q.iter().zip(self.psi).map(|(a, b)| a * b).sum();
        self.weights = r.weights;
        (r.value + mass - self.a * lin, g.iter().zip(self.psi).map(|(gj, p)| gj + 1.0 - self.a * p).collect())
    }
}

/// `J(lambda Q) - lambda E_Q[Psi]` for a fixed `lambda`.
struct ScaledObjective<'e, 'a> {
    eval: DivergenceEvaluator<'a>,
    psi: &'e [f64],
    lambda: f64,
    weights: Vec<f64>,
}

impl SmoothObjective for ScaledObjective<'_, '_> {
    fn interior(&self) -> bool {
        true
    }

    fn value_and_gradient(&mut self, q: &[f64]) -> (f64, Vec<f64>) {
        let nu: Vec<f64> = q.iter().map(|v| self.lambda * v).collect();
        let (r, g) = self.eval.value_and_gradient(&nu);
        if !r.value.is_finite() {
            return (f64::INFINITY, g);
        }
        let lin: f64 = q.iter().zip(self.psi).map(|(a, b)| a * b).sum();
        self.weights = r.weights;
        (r.value - self.lambda * lin, g.iter().zip(self.psi).map(|(gj, p)| self.lambda * (gj - p)).collect())
    }
}

/// `min_Q E_P(Q) - a E_Q[Psi]` and its minimiser, warm-started from `warm`.
pub(crate) fn entropy_tilt(ctx: &PricingContext<'_>, psi: &[f64], a: f64, warm: &mut ActiveSet) -> Result<(f64, DualSolution)> {
    let spec = IntegrandSpec::new(BaseIntegrand::Exp);
    let mut obj = EntropyObjective { eval: DivergenceEvaluator::new(ctx.amb, &spec, &ctx.opts), psi, a, weights: vec![] };
    let fw = frank_wolfe(&ctx.oracle, &mut obj, warm.clone(), &ctx.opts)?;
    *warm = fw.active.clone();
    // refresh the mixture at the returned point
    let _ = obj.value_and_gradient(&fw.point);
    let sol = DualSolution {
        route: DualRoute::ClosedForm,
        value: f64::NAN,
        lambda: f64::NAN,
        q: fw.point,
        weights: obj.weights,
        gap: fw.gap,
        converged: fw.converged,
        lambda_at_edge: false,
    };
    Ok((fw.value, sol))
}

fn check_psi(ctx: &PricingContext<'_>, psi: &[f64]) -> Result<()> {
    if psi.len() != ctx.poly.n_paths() {
        return Err(Error::LatticeMismatch);
    }
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("payoff must be finite".into()));
    }
    Ok(())
}

/// Exponential utility: `u = -(1/a) exp(-a x - m)` with `m = min_Q E_P(Q) - a E_Q[Psi]`.
pub(crate) fn dual_closed_form(ctx: &PricingContext<'_>, x: f64, psi: &[f64], warm: &mut ActiveSet) -> Result<DualSolution> {
    let UtilitySpec::Exponential { a } = ctx.utility else {
        return Err(Error::AssumptionViolated("closed form needs exponential utility".into()));
    };
    check_psi(ctx, psi)?;
    let (m, mut sol) = entropy_tilt(ctx, psi, a, warm)?;
    sol.lambda = (-m - a * x).exp();
    sol.value = -(-a * x - m).exp() / a;
    Ok(sol)
}

/// Outer golden-section search over `log lambda`, inner Frank-Wolfe over `Q`.
pub(crate) fn dual_generic(ctx: &PricingContext<'_>, x: f64, psi: &[f64], warm: &mut ActiveSet) -> Result<DualSolution> {
    check_psi(ctx, psi)?;
    let spec = IntegrandSpec::utility(ctx.utility);
    let mut best: Option<DualSolution> = None;
    let mut failure: Option<Error> = None;
    let mut inner = |s: f64| -> f64 {
        let lambda = s.exp();
        let mut obj = ScaledObjective { eval: DivergenceEvaluator::new(ctx.amb, &spec, &ctx.opts), psi, lambda, weights: vec![] };
        match frank_wolfe(&ctx.oracle, &mut obj, warm.clone(), &ctx.opts) {
            Ok(fw) => {
                *warm = fw.active.clone();
                let _ = obj.value_and_gradient(&fw.point);
                let value = fw.value + lambda * x;
                if best.as_ref().is_none_or(|b| value < b.value) {
                    best = Some(DualSolution {
                        route: DualRoute::Generic,
                        value,
                        lambda,
                        q: fw.point,
                        weights: obj.weights,
                        gap: fw.gap,
                        converged: fw.converged,
                        lambda_at_edge: false,
                    });
                }
                value
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let lo = LAMBDA_FLOOR.ln();
    let mut hi = 0.0_f64;
    let mut prev = inner(hi);
    for _ in 0..400 {
        hi += 1.0;
        let v = inner(hi);
        if v > prev {
            break;
        }
        prev = v;
    }
    let search = ctx.opts.clone().with_tolerance(1e-9);
    let r = minimize_convex_1d(&mut inner, (lo, hi), &search)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut sol = best.ok_or_else(|| Error::AssumptionViolated("no finite divergence point found".into()))?;
    if !sol.value.is_finite() {
        return Err(Error::AssumptionViolated("no finite divergence point found".into()));
    }
    let edge = 1e-6 * (hi - lo);
    sol.lambda_at_edge = r.argmin - lo <= edge || hi - r.argmin <= edge;
    Ok(sol)
}

/// `u_Psi(x)` by duality, through the closed form for exponential utility.
pub fn dual_value(ctx: &PricingContext<'_>, x: f64, psi: &[f64]) -> Result<DualSolution> {
    let mut warm = ctx.start.clone();
    match ctx.utility {
        UtilitySpec::Exponential { .. } => dual_closed_form(ctx, x, psi, &mut warm),
        _ => dual_generic(ctx, x, psi, &mut warm),
    }
}

/// Always runs the outer `lambda` search, whatever the utility.
pub fn dual_value_generic(ctx: &PricingContext<'_>, x: f64, psi: &[f64]) -> Result<DualSolution> {
    let mut warm = ctx.start.clone();
    dual_generic(ctx, x, psi, &mut warm)
}
