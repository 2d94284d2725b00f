//! Property suite run by the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::instance::Instance;
use crate::divergence::{conjugacy_check, divergence_single, BaseIntegrand, IntegrandSpec, HARNESS_PATH_LIMIT};
use crate::error::{Error, Result};
use crate::market::{check_strassen, Grid};
use crate::optimize::{solve_lp, LpStatus};
use crate::polytope::{feasibility, polytope_on, PathMeasure};
use crate::pricing::{
    gain_dynamic, gain_static, price, trivial_case_check_with, DynamicStrategy, PricingContext, StaticPosition,
    TRIVIAL_PATH_LIMIT,
};

pub const VERIFY_SCHEMA: &str = "semistatic.verify/1";

const CONJUGACY_TRIALS: usize = 10;
const WEAK_DUALITY_DRAWS: usize = 50;
const GAIN_TOL: f64 = 1e-9;
const VERIFY_VERTEX_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    pub residual: f64,
    pub detail: String,
}

impl PropertyResult {
    fn new(name: &str, passed: bool, residual: f64, detail: String) -> Self {
        Self { name: name.into(), passed, skipped: false, residual, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub n_paths: usize,
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
    pub passed: bool,
}

/// Runs the conjugacy harness, weak-duality sampling, martingale gain
/// identities, the pricing sandwich and, when small enough, the trivial case.
pub fn verify_instance(inst: &Instance) -> Result<VerifyReport> {
    let lattice = inst.lattice()?;
    let n = lattice.n_paths();
    if n > HARNESS_PATH_LIMIT {
        return Err(Error::HarnessLimit(format!("{n} paths exceed the verification limit of {HARNESS_PATH_LIMIT}")));
    }
    let opts = &inst.opts;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut props = Vec::new();

    let poly = polytope_on(lattice.clone(), &inst.sys)?;
    let strassen = check_strassen(&inst.sys).is_feasible();
    let lp = feasibility(&poly, opts)?.is_feasible();
    props.push(PropertyResult::new(
        "strassen_lp_agreement",
        strassen == lp,
        0.0,
        format!("strassen feasible: {strassen}, lp feasible: {lp}"),
    ));
    if !lp {
        return Ok(finish(n, opts.seed, props));
    }

    let amb = inst.ambiguity(&lattice)?;
    let v_spec = IntegrandSpec::utility(inst.file.utility);
    for (name, spec) in [
        ("conjugacy_quadratic", IntegrandSpec::new(BaseIntegrand::Quadratic)),
        ("conjugacy_exp", IntegrandSpec::new(BaseIntegrand::Exp)),
        ("conjugacy_utility", v_spec.clone()),
    ] {
        let r = conjugacy_check(&spec, &amb, CONJUGACY_TRIALS, rng.gen(), opts)?;
        let residual = [r.conjugate_residual, r.attainment_residual, r.meta_residual, r.shift_residual, r.young_excess.max(0.0)]
            .into_iter()
            .fold(0.0, f64::max);
        props.push(PropertyResult::new(name, r.passed, residual, format!("{} trials", r.trials)));
    }

    let psi = inst.payoff_values(&lattice)?;
    let x = inst.file.x;
    let grids: Vec<Grid> = inst.sys.marginals().iter().map(|m| m.grid().clone()).collect();

    // calibrated measures: mixtures of LP vertices for random objectives
    let mut vertices = Vec::new();
    for _ in 0..4 {
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = solve_lp(&poly.program(c)?, opts)?;
        if s.status == LpStatus::Optimal {
            vertices.push(s.primal);
        }
    }
    let sample_q = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let w: Vec<f64> = vertices.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let t: f64 = w.iter().sum();
        (0..n).map(|j| vertices.iter().zip(&w).map(|(v, wk)| v[j] * wk / t).sum::<f64>().max(0.0)).collect()
    };
    let random_position = |rng: &mut ChaCha8Rng| -> Result<(DynamicStrategy, StaticPosition)> {
        let h = DynamicStrategy::from_values(&lattice, (0..lattice.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let f = StaticPosition { values: grids.iter().map(|g| (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect() };
        Ok((h, f))
    };

    let mut worst_gain = 0.0_f64;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..WEAK_DUALITY_DRAWS {
        let q = sample_q(&mut rng);
        let (h, f) = random_position(&mut rng)?;
        let gains: Vec<f64> = (0..n)
            .map(|j| Ok(gain_dynamic(&h, &lattice, j) + gain_static(&f, &inst.sys, lattice.path(j))?))
            .collect::<Result<_>>()?;
        worst_gain = worst_gain.max(q.iter().zip(&gains).map(|(a, b)| a * b).sum::<f64>().abs());

        let w: Vec<f64> = (0..amb.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / t).collect();
        let p = PathMeasure::new(lattice.clone(), amb.mixture(&w))?;
        let lambda = rng.gen_range(-3.0f64..2.0).exp();
        let lhs: f64 = (0..n).map(|j| p.weights()[j] * inst.file.utility.u(x + gains[j] - psi[j])).sum();
        let nu = PathMeasure::new(lattice.clone(), q.iter().map(|v| lambda * v).collect())?;
        let eq_psi: f64 = q.iter().zip(&psi).map(|(a, b)| a * b).sum();
        let rhs = divergence_single(&nu, &p, &v_spec)? - lambda * eq_psi + lambda * x;
        if rhs.is_finite() {
            worst_excess = worst_excess.max((lhs - rhs) / (1.0 + rhs.abs()));
        }
    }
    props.push(PropertyResult::new(
        "martingale_gains_vanish",
        worst_gain <= GAIN_TOL,
        worst_gain,
        format!("{WEAK_DUALITY_DRAWS} draws"),
    ));
    props.push(PropertyResult::new(
        "weak_duality",
        worst_excess <= 1e-12,
        worst_excess.max(0.0),
        format!("{WEAK_DUALITY_DRAWS} draws"),
    ));

    let ctx = PricingContext::new(&inst.sys, &poly, &amb, inst.file.utility, opts)?;
    let r = price(&ctx, &psi, x)?;
    props.push(PropertyResult::new(
        "duality_gap",
        r.diagnostics.primal_below_dual && r.diagnostics.gap_within_tolerance,
        r.diagnostics.relative_gap,
        format!("primal {} dual {}", r.primal.value, r.dual.value),
    ));
    props.push(PropertyResult::new(
        "sandwich",
        r.diagnostics.sandwich_holds,
        0.0,
        format!("[{}, {}] contains [{}, {}]", r.mot_low, r.mot_high, r.p_buy, r.p_sell),
    ));

    if n <= TRIVIAL_PATH_LIMIT {
        match trivial_case_check_with(&inst.sys, &psi, opts, VERIFY_VERTEX_LIMIT) {
            Ok(t) => props.push(PropertyResult::new(
                "trivial_case",
                t.passed,
                t.sell_error.max(t.buy_error),
                format!("{} vertices", t.n_vertices),
            )),
            Err(Error::HarnessLimit(msg)) => props.push(PropertyResult {
                name: "trivial_case".into(),
                passed: true,
                skipped: true,
                residual: 0.0,
                detail: msg,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(finish(n, opts.seed, props))
}

fn finish(n_paths: usize, seed: u64, properties: Vec<PropertyResult>) -> VerifyReport {
    let passed = properties.iter().all(|p| p.passed);
    VerifyReport { schema_version: VERIFY_SCHEMA, command: "verify", n_paths, seed, properties, passed }
}
