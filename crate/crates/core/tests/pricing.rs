use std::sync::Arc;

use semistatic::divergence::{AmbiguitySet, UtilitySpec};
use semistatic::market::{Grid, Marginal, MarginalSystem};
use semistatic::optimize::SolveOptions;
use semistatic::polytope::{build_lattice, polytope_on, MartingalePolytope, PathLattice, PathMeasure};
use semistatic::pricing::*;

fn m(points: &[f64], pmf: &[f64]) -> Marginal {
    Marginal::new(Grid::new(points.to_vec()).unwrap(), pmf.to_vec()).unwrap()
}

fn unique_coupling() -> MarginalSystem {
    MarginalSystem::new(0.0, vec![m(&[-1.0, 1.0], &[0.5, 0.5]), m(&[-2.0, 0.0, 2.0], &[0.25, 0.5, 0.25])]).unwrap()
}

/// Two-period instance with a non-degenerate calibrated polytope.
fn wide() -> MarginalSystem {
    MarginalSystem::new(
        0.0,
        vec![m(&[-1.0, 0.0, 1.0], &[0.25, 0.5, 0.25]), m(&[-3.0, -1.0, 0.0, 1.0, 3.0], &[0.1, 0.2, 0.4, 0.2, 0.1])],
    )
    .unwrap()
}

struct Setup {
    sys: MarginalSystem,
    lattice: Arc<PathLattice>,
    poly: MartingalePolytope,
}

fn setup(sys: MarginalSystem) -> Setup {
    let lattice = Arc::new(build_lattice(&sys, 10_000).unwrap());
    let poly = polytope_on(lattice.clone(), &sys).unwrap();
    Setup { sys, lattice, poly }
}

fn straddle(l: &PathLattice) -> Vec<f64> {
    Payoff::Straddle { i: 1, j: 2 }.values(l).unwrap()
}

#[test]
fn unique_coupling_closed_form() {
    let s = setup(unique_coupling());
    let amb = AmbiguitySet::new(vec![PathMeasure::uniform(s.lattice.clone())]).unwrap();
    let opts = SolveOptions::default();
    let ctx = PricingContext::new(&s.sys, &s.poly, &amb, UtilitySpec::Exponential { a: 1.0 }, &opts).unwrap();
    let zero = vec![0.0; s.lattice.n_paths()];
    let u0 = dual_value(&ctx, 0.0, &zero).unwrap();
    assert!((u0.value + 2.0 / 3.0).abs() < 1e-9, "{}", u0.value);
    assert!((u0.lambda - 2.0 / 3.0).abs() < 1e-9);
    // exponential cash factoring
    let u1 = dual_value(&ctx, 1.3, &zero).unwrap();
    assert!((u1.value - (-1.3f64).exp() * u0.value).abs() < 1e-12);
    let generic = dual_value_generic(&ctx, 0.0, &zero).unwrap();
    assert!((generic.value - u0.value).abs() < 1e-6 * u0.value.abs());
    assert!(!generic.lambda_at_edge);

    let psi = straddle(&s.lattice);
    let b = mot_bounds(&s.poly, &psi, &opts).unwrap();
    assert!((b.low - 1.0).abs() < 1e-12 && (b.high - 1.0).abs() < 1e-12);
    for x in [-1.0, 0.0, 1.0] {
        let expected = -(-x - (1.5f64.ln() - 1.0)).exp();
        let d = dual_value(&ctx, x, &psi).unwrap();
        assert!((d.value - expected).abs() < 1e-9);
        let p = primal_value(&ctx, x, &psi).unwrap();
        assert!(p.value <= d.value + 1e-12);
        assert!((p.value - expected).abs() < 1e-3, "primal {} vs {expected}", p.value);
    }
    let prices = indifference_prices(&ctx, &psi).unwrap();
    assert!((prices.p_sell - 1.0).abs() < 1e-6 && (prices.p_buy - 1.0).abs() < 1e-6, "{prices:?}");
}

#[test]
fn entropic_quadratic_matches_grid_search() {
    // Q is unique, so the dual reduces to a search over lambda alone
    let s = setup(unique_coupling());
    let amb = AmbiguitySet::new(vec![PathMeasure::uniform(s.lattice.clone())]).unwrap();
    let u = UtilitySpec::EntropicQuadratic { kappa: 0.5 };
    let ctx = PricingContext::new(&s.sys, &s.poly, &amb, u, &SolveOptions::default()).unwrap();
    let psi = straddle(&s.lattice);
    let q = [0.25, 0.25, 0.0, 0.0, 0.25, 0.25];
    let p = 1.0 / 6.0;
    let oracle = (1..200_000)
        .map(|k| k as f64 * 1e-5)
        .map(|lam| q.iter().map(|qj| p * u.v(lam * qj / p)).sum::<f64>() - lam * 1.0 + lam * 0.5)
        .fold(f64::INFINITY, f64::min);
    let d = dual_value(&ctx, 0.5, &psi).unwrap();
    assert!((d.value - oracle).abs() < 1e-4, "{} vs {oracle}", d.value);
}

#[test]
fn trivial_payoffs_and_vanillas() {
    let s = setup(wide());
    let amb = AmbiguitySet::new(vec![PathMeasure::uniform(s.lattice.clone())]).unwrap();
    let opts = SolveOptions::default();
    for u in [UtilitySpec::Exponential { a: 1.0 }, UtilitySpec::EntropicQuadratic { kappa: 0.5 }] {
        let ctx = PricingContext::new(&s.sys, &s.poly, &amb, u, &opts).unwrap();
        let zero = vec![0.0; s.lattice.n_paths()];
        let p = indifference_prices(&ctx, &zero).unwrap();
        assert!(p.p_sell.abs() < 1e-6 && p.p_buy.abs() < 1e-6, "{p:?}");
        let knots = vec![(-1.0, 0.5), (0.0, 0.0), (3.0, 2.0)];
        let g = Payoff::Vanilla { maturity: 2, knots: knots.clone() }.values(&s.lattice).unwrap();
        let mu_g = s.sys.marginal(2).expectation_of(|x| piecewise_linear(&knots, x));
        let b = mot_bounds(&s.poly, &g, &opts).unwrap();
        assert!((b.low - mu_g).abs() < 1e-9 && (b.high - mu_g).abs() < 1e-9);
        let p = indifference_prices(&ctx, &g).unwrap();
        assert!((p.p_sell - mu_g).abs() < 1e-6 && (p.p_buy - mu_g).abs() < 1e-6, "{p:?} vs {mu_g}");
    }
}

#[test]
fn full_report_on_wide_instance() {
    let s = setup(wide());
    let priors = [PathMeasure::uniform(s.lattice.clone()),
        PathMeasure::new(s.lattice.clone(), (0..s.lattice.n_paths()).map(|j| 1.0 + (j % 3) as f64).collect::<Vec<_>>())
            .unwrap()];
    let w: f64 = priors[1].weights().iter().sum();
    let priors = vec![priors[0].clone(), priors[1].scaled(1.0 / w).unwrap()];
    let amb = AmbiguitySet::new(priors).unwrap();
    let opts = SolveOptions::default();
    let psi = straddle(&s.lattice);
    for u in [UtilitySpec::Exponential { a: 1.0 }, UtilitySpec::EntropicQuadratic { kappa: 0.5 }] {
        let ctx = PricingContext::new(&s.sys, &s.poly, &amb, u, &opts).unwrap();
        let r = price(&ctx, &psi, 0.0).unwrap();
        assert!(r.diagnostics.primal_below_dual);
        assert!(r.diagnostics.gap_within_tolerance, "gap {}", r.diagnostics.relative_gap);
        assert!(r.diagnostics.sandwich_holds);
        assert!(r.mot_low < r.mot_high - 0.1);
        let calls = primal_value_in(&ctx, 0.0, &psi, StaticBasis::Calls).unwrap();
        assert!((calls.value - r.primal.value).abs() < 1e-6, "{} vs {}", calls.value, r.primal.value);
    }
}

#[test]
fn gains_vanish_under_calibrated_measures() {
    let s = setup(wide());
    let opts = SolveOptions::default();
    let psi = straddle(&s.lattice);
    let b = mot_bounds(&s.poly, &psi, &opts).unwrap();
    let grids: Vec<Grid> = s.sys.marginals().iter().map(|m| m.grid().clone()).collect();
    let h = DynamicStrategy::from_values(&s.lattice, (0..s.lattice.n_nodes()).map(|k| (k as f64).cos()).collect()).unwrap();
    let f = StaticPosition { values: grids.iter().map(|g| g.points().iter().map(|x| x * x - 0.3 * x).collect()).collect() };
    for q in [&b.argmin, &b.argmax] {
        let dyn_gain: f64 = (0..s.lattice.n_paths()).map(|j| q[j] * gain_dynamic(&h, &s.lattice, j)).sum();
        let stat_gain: f64 =
            (0..s.lattice.n_paths()).map(|j| q[j] * gain_static(&f, &s.sys, s.lattice.path(j)).unwrap()).sum();
        assert!(dyn_gain.abs() < 1e-9 && stat_gain.abs() < 1e-9);
    }
}

#[test]
fn trivial_case_examples() {
    let opts = SolveOptions::default();
    let s = setup(unique_coupling());
    let r = trivial_case_check(&s.sys, &straddle(&s.lattice), &opts).unwrap();
    assert_eq!(r.n_vertices, 1);
    assert!(r.passed && (r.p_sell - 1.0).abs() < 1e-4, "{r:?}");

    let single = MarginalSystem::new(0.0, vec![m(&[-1.0, 1.0], &[0.5, 0.5])]).unwrap();
    let l = build_lattice(&single, 10).unwrap();
    let psi: Vec<f64> = l.paths().map(|x| x[0].max(0.0)).collect();
    let r = trivial_case_check(&single, &psi, &opts).unwrap();
    assert!(r.passed && (r.p_sell - 0.5).abs() < 1e-4 && (r.p_buy - 0.5).abs() < 1e-4, "{r:?}");

    let s = setup(MarginalSystem::new(0.0, vec![m(&[-1.0, 1.0], &[0.5, 0.5]), m(&[-3.0, -1.0, 1.0, 3.0], &[0.125, 0.375, 0.375, 0.125])]).unwrap());
    let psi = straddle(&s.lattice);
    let r = trivial_case_check(&s.sys, &psi, &opts).unwrap();
    assert!(r.mot_low < r.mot_high - 1e-3, "{r:?}");
    assert!(r.passed, "{r:?}");
}

#[test]
fn trivial_case_size_limit() {
    let g: Vec<f64> = (0..15).map(|k| k as f64 - 7.0).collect();
    let pmf = vec![1.0 / 15.0; 15];
    let sys = MarginalSystem::new(0.0, vec![m(&g, &pmf), m(&g, &pmf)]).unwrap();
    let l = build_lattice(&sys, 1000).unwrap();
    let psi = vec![0.0; l.n_paths()];
    assert!(matches!(
        trivial_case_check(&sys, &psi, &SolveOptions::default()),
        Err(semistatic::error::Error::HarnessLimit(_))
    ));
}
