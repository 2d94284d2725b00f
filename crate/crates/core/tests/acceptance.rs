//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semistatic::cli::{cmd_price, random_instance, unique_coupling_instance, Instance, Overrides, EXIT_OK};
use semistatic::divergence::{
    conjugacy_check, divergence_single, AmbiguitySet, BaseIntegrand, IntegrandSpec, UtilitySpec,
};
use semistatic::market::{check_strassen, Grid, Marginal, MarginalSystem};
use semistatic::optimize::SolveOptions;
use semistatic::polytope::{build_lattice, feasibility, polytope_on, MartingalePolytope, PathLattice, PathMeasure};
use semistatic::pricing::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// ---------------------------------------------------------------- criterion 1

fn spaced_grid(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut g: Vec<f64> = Vec::with_capacity(n);
    while g.len() < n {
        let x = rng.gen_range(lo..hi);
        if g.iter().all(|y| (x - y).abs() > 0.05) {
            g.push(x);
        }
    }
    g.sort_by(f64::total_cmp);
    g
}

fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|v| v / t).collect()
}

/// Either a martingale chain (kernels onto wider grids) or independent
/// marginals; in half the cases every marginal is shifted to mean `s0`.
fn strassen_instance(seed: u64) -> MarginalSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = 1 + (seed % 3) as usize;
    let forced = seed % 2 == 0;
    let chained = (seed / 2) % 2 == 0;
    let s0 = rng.gen_range(-0.5..0.5);
    let n = rng.gen_range(1..=6);
    let mut laws = vec![(spaced_grid(&mut rng, n, s0 - 1.0, s0 + 1.0), random_pmf(&mut rng, n))];
    for _ in 1..horizon {
        let (g, p) = laws.last().unwrap().clone();
        if chained {
            let lo = g[0] - rng.gen_range(0.1..1.0);
            let hi = g[g.len() - 1] + rng.gen_range(0.1..1.0);
            let m = rng.gen_range(2..=6);
            let mut next = vec![lo, hi];
            while next.len() < m {
                let x = rng.gen_range(lo..hi);
                if next.iter().all(|y| (x - y).abs() > 0.05) {
                    next.push(x);
                }
            }
            next.sort_by(f64::total_cmp);
            let mut q = vec![0.0; m];
            for (x, w) in g.iter().zip(&p) {
                let theta: f64 = rng.gen_range(0.0..1.0);
                let k = (0..m - 1).find(|&k| next[k] <= *x && *x <= next[k + 1]).unwrap();
                let b = (x - next[k]) / (next[k + 1] - next[k]);
                q[k] += w * theta * (1.0 - b);
                q[k + 1] += w * theta * b;
                let e = (x - lo) / (hi - lo);
                q[0] += w * (1.0 - theta) * (1.0 - e);
                q[m - 1] += w * (1.0 - theta) * e;
            }
            let t: f64 = q.iter().sum();
            laws.push((next, q.iter().map(|v| v / t).collect()));
        } else {
            let m = rng.gen_range(1..=6);
            laws.push((spaced_grid(&mut rng, m, s0 - 2.0, s0 + 2.0), random_pmf(&mut rng, m)));
        }
    }
    let marginals = laws
        .into_iter()
        .map(|(g, p)| {
            let g = if forced {
                let mean: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
                g.iter().map(|x| x - mean + s0).collect()
            } else {
                g
            };
            Marginal::new(Grid::new(g).unwrap(), p).unwrap()
        })
        .collect();
    MarginalSystem::new(s0, marginals).unwrap()
}

fn strassen_equivalence() -> Outcome {
    let opts = SolveOptions::default();
    let start = Instant::now();
    let (mut agree, mut feasible) = (0, 0);
    let mut mismatches = Vec::new();
    for seed in 0..200 {
        let sys = strassen_instance(seed);
        let strassen = check_strassen(&sys).is_feasible();
        let poly = polytope_on(Arc::new(build_lattice(&sys, 10_000).unwrap()), &sys).unwrap();
        let lp = feasibility(&poly, &opts).unwrap().is_feasible();
        if strassen == lp {
            agree += 1;
        } else {
            mismatches.push(seed);
        }
        feasible += usize::from(lp);
    }
    let elapsed = start.elapsed();
    outcome(
        agree == 200 && elapsed < Duration::from_secs(10) && feasible > 0 && feasible < 200,
        format!("{agree}/200 agree ({feasible} feasible), mismatches {mismatches:?}, {elapsed:.2?} (limit 10s)"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn lattice(grids: &[&[f64]]) -> Arc<PathLattice> {
    Arc::new(PathLattice::new(grids.iter().map(|g| Grid::new(g.to_vec()).unwrap()).collect(), 0.0, 8).unwrap())
}

fn random_prior(l: &Arc<PathLattice>, rng: &mut ChaCha8Rng, zero_at: Option<usize>) -> PathMeasure {
    let mut w: Vec<f64> = (0..l.n_paths()).map(|_| rng.gen_range(0.1..1.0)).collect();
    if let Some(j) = zero_at {
        w[j] = 0.0;
    }
    let t: f64 = w.iter().sum();
    PathMeasure::new(l.clone(), w.iter().map(|v| v / t).collect()).unwrap()
}

fn conjugacy() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = SolveOptions::default();
    let l1 = lattice(&[&[-1.0, 0.0, 0.5, 1.5]]);
    let l2 = lattice(&[&[-1.0, 1.0], &[-2.0, 0.0, 2.0]]);
    let l3 = lattice(&[&[-1.0, 1.0], &[-3.0, -1.0, 1.0, 3.0]]);
    let l4 = lattice(&[&[-1.0, 1.0], &[-2.0, 2.0], &[-3.0, 3.0]]);
    let sets = [AmbiguitySet::new(vec![random_prior(&l1, &mut rng, None)]).unwrap(),
        AmbiguitySet::new(vec![PathMeasure::uniform(l2.clone()), random_prior(&l2, &mut rng, None)]).unwrap(),
        AmbiguitySet::new(vec![
            PathMeasure::uniform(l3.clone()),
            random_prior(&l3, &mut rng, None),
            random_prior(&l3, &mut rng, Some(2)),
        ])
        .unwrap(),
        AmbiguitySet::new(vec![
            random_prior(&l4, &mut rng, Some(0)),
            random_prior(&l4, &mut rng, Some(7)),
            random_prior(&l4, &mut rng, None),
        ])
        .unwrap()];
    let bases = [
        BaseIntegrand::Quadratic,
        BaseIntegrand::Exp,
        BaseIntegrand::UtilityLoss { utility: UtilitySpec::Exponential { a: 0.8 } },
    ];
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    let mut runs = 0;
    for (s, amb) in sets.iter().enumerate() {
        for base in bases {
            let shift: Vec<f64> = (0..amb.n_paths()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            for spec in [IntegrandSpec::new(base), IntegrandSpec::with_shift(base, shift).unwrap()] {
                runs += 1;
                match conjugacy_check(&spec, amb, 50, rng.gen(), &opts) {
                    Ok(r) => {
                        worst = [worst, r.conjugate_residual, r.attainment_residual, r.meta_residual, r.shift_residual]
                            .into_iter()
                            .fold(0.0, f64::max);
                        if !r.passed {
                            failures.push(format!("set {s} {spec:?}: {r:?}"));
                        }
                    }
                    Err(e) => failures.push(format!("set {s} {spec:?}: {e}")),
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && worst <= 1e-4 && elapsed < Duration::from_secs(60),
        format!("{runs} runs x 50 draws, worst residual {worst:.2e}, {elapsed:.2?} (limit 60s) {failures:?}"),
    )
}

// ---------------------------------------------------------------- criterion 3

struct Setup {
    inst: Instance,
    lattice: Arc<PathLattice>,
    poly: MartingalePolytope,
    amb: AmbiguitySet,
    psi: Vec<f64>,
}

impl Setup {
    fn new(inst: Instance) -> Self {
        let lattice = inst.lattice().unwrap();
        let poly = polytope_on(lattice.clone(), &inst.sys).unwrap();
        let amb = inst.ambiguity(&lattice).unwrap();
        let psi = inst.payoff_values(&lattice).unwrap();
        Self { inst, lattice, poly, amb, psi }
    }

    fn seeded(seed: u64) -> Self {
        Self::new(random_instance(seed).load(&Overrides::default()).unwrap())
    }

    fn ctx(&self) -> PricingContext<'_> {
        PricingContext::new(&self.inst.sys, &self.poly, &self.amb, self.inst.file.utility, &self.inst.opts).unwrap()
    }

    fn grids(&self) -> Vec<Grid> {
        self.inst.sys.marginals().iter().map(|m| m.grid().clone()).collect()
    }
}

fn exponential_closed_form() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..20 {
        let mut file = random_instance(seed);
        file.utility = UtilitySpec::Exponential { a: 0.5 + 0.075 * seed as f64 };
        let s = Setup::new(file.load(&Overrides::default()).unwrap());
        let ctx = s.ctx();
        let closed = dual_value(&ctx, s.inst.file.x, &s.psi).unwrap();
        assert_eq!(closed.route, DualRoute::ClosedForm);
        let generic = dual_value_generic(&ctx, s.inst.file.x, &s.psi).unwrap();
        worst = worst.max(rel(generic.value, closed.value));
    }
    let s = Setup::new(unique_coupling_instance().load(&Overrides::default()).unwrap());
    let ctx = s.ctx();
    let zero = vec![0.0; s.lattice.n_paths()];
    let u0 = dual_value(&ctx, 0.0, &zero).unwrap().value;
    // the unique calibrated measure against the uniform prior on six paths
    let q = PathMeasure::new(s.lattice.clone(), vec![0.25, 0.25, 0.0, 0.0, 0.25, 0.25]).unwrap();
    let uniform = PathMeasure::uniform(s.lattice.clone());
    let entropy = divergence_single(&q, &uniform, &IntegrandSpec::new(BaseIntegrand::Exp)).unwrap() + q.total_mass();
    let oracle: f64 = 4.0 * 0.25 * (0.25f64 * 6.0).ln();
    let u0_err = (u0 + 2.0 / 3.0).abs();
    let ent_err = (entropy - 1.5f64.ln()).abs();
    outcome(
        worst <= 1e-6 && u0_err <= 1e-9 && ent_err <= 1e-12 && (oracle - 1.5f64.ln()).abs() <= 1e-15,
        format!("generic vs closed form worst {worst:.2e} over 20 seeds; u0(0) error {u0_err:.1e}; entropy error {ent_err:.1e}"),
    )
}

// ------------------------------------------------------- criteria 4, 5, 6, 8

struct Run {
    seed: u64,
    report: Result<PricingReport, String>,
    calls_primal: Option<f64>,
    reconstruction: f64,
    elapsed: Duration,
}

fn runs() -> &'static [Run] {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..40)
            .map(|seed| {
                let start = Instant::now();
                let s = Setup::seeded(seed);
                let ctx = s.ctx();
                let x = s.inst.file.x;
                let report = price(&ctx, &s.psi, x).map_err(|e| e.to_string());
                let elapsed = start.elapsed();
                let calls_primal = primal_value_in(&ctx, x, &s.psi, StaticBasis::Calls).ok().map(|p| p.value);
                let reconstruction = match &report {
                    Ok(r) => reconstruction_error(&r.primal.statics, &s.grids()),
                    Err(_) => f64::INFINITY,
                };
                Run { seed, report, calls_primal, reconstruction, elapsed }
            })
            .collect()
    })
}

/// Largest gap between a static position and its call-span reconstruction,
/// relative to the magnitude of the terms being summed.
fn reconstruction_error(f: &StaticPosition, grids: &[Grid]) -> f64 {
    let (rebuilt, spans) = call_span_restrict(f, grids).unwrap();
    let mut worst = 0.0_f64;
    for ((v, r), (span, g)) in f.values.iter().zip(&rebuilt.values).zip(spans.iter().zip(grids)) {
        for ((a, b), x) in v.iter().zip(r).zip(g.points()) {
            let size = span.constant.abs()
                + span.strikes.iter().zip(&span.coefficients).map(|(k, c)| (c * (x - k).max(0.0)).abs()).sum::<f64>();
            worst = worst.max((a - b).abs() / size.max(1.0));
        }
    }
    worst
}

fn duality_gap() -> Outcome {
    let runs = runs();
    let total: Duration = runs.iter().map(|r| r.elapsed).sum();
    let mut below = true;
    let mut within = 0;
    let mut soft = Vec::new();
    for r in runs {
        match &r.report {
            Ok(rep) => {
                below &= rep.diagnostics.primal_below_dual;
                if rep.diagnostics.gap_within_tolerance {
                    within += 1;
                } else {
                    soft.push(format!("seed {} gap {:.2e}", r.seed, rep.diagnostics.relative_gap));
                }
            }
            Err(e) => soft.push(format!("seed {} error {e}", r.seed)),
        }
    }
    let worst = runs.iter().filter_map(|r| r.report.as_ref().ok()).map(|r| r.diagnostics.relative_gap).fold(0.0, f64::max);
    outcome(
        below && within * 100 >= 95 * runs.len() && total < Duration::from_secs(300),
        format!(
            "primal <= dual on all: {below}; gap <= 1e-3 on {within}/{}; worst gap {worst:.2e}; {total:.1?} (limit 5min) {soft:?}",
            runs.len()
        ),
    )
}

fn cross_check_and_invariants() -> Outcome {
    let mut worst_cross = 0.0_f64;
    let mut worst_cash = 0.0_f64;
    let mut worst_mono = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for r in runs() {
        let Ok(rep) = &r.report else {
            failures.push(format!("seed {} did not price", r.seed));
            continue;
        };
        let d = &rep.diagnostics;
        for c in [&d.sell, &d.buy] {
            worst_cross = worst_cross.max((c.optimisation - c.bisection).abs() / d.scale);
        }
        let s = Setup::seeded(r.seed);
        let ctx = s.ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        let c = rng.gen_range(-2.0..2.0);
        let shifted: Vec<f64> = s.psi.iter().map(|v| v + c).collect();
        let p_shift = seller_price_by_optimisation(&ctx, &shifted, d.u0_at_0).unwrap().0;
        worst_cash = worst_cash.max((p_shift - (rep.p_sell + c)).abs());
        let bumped: Vec<f64> =
            s.psi.iter().map(|v| if rng.gen_bool(0.5) { v + rng.gen_range(0.0..0.5) } else { *v }).collect();
        let p_bump = seller_price_by_optimisation(&ctx, &bumped, d.u0_at_0).unwrap().0;
        worst_mono = worst_mono.max(rep.p_sell - p_bump);
    }
    outcome(
        failures.is_empty() && worst_cross <= 1e-4 && worst_cash <= 1e-6 && worst_mono <= 1e-9,
        format!(
            "route disagreement / scale {worst_cross:.2e} (limit 1e-4); cash invariance {worst_cash:.2e} (limit 1e-6); \
             monotonicity excess {worst_mono:.2e} (limit 1e-9) {failures:?}"
        ),
    )
}

fn sandwich_and_vanillas() -> Outcome {
    let mut violations = Vec::new();
    for r in runs() {
        match &r.report {
            Ok(rep) => {
                let ok = rep.mot_low - 1e-6 <= rep.p_buy && rep.p_buy <= rep.p_sell && rep.p_sell <= rep.mot_high + 1e-6;
                if !ok {
                    violations.push(format!("seed {}: [{}, {}] vs [{}, {}]", r.seed, rep.mot_low, rep.mot_high, rep.p_buy, rep.p_sell));
                }
            }
            Err(e) => violations.push(format!("seed {}: {e}", r.seed)),
        }
    }
    let mut worst_vanilla = 0.0_f64;
    for seed in 0..10 {
        let s = Setup::seeded(seed);
        let ctx = s.ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let maturity = rng.gen_range(1..=2);
        let mut xs: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        xs.sort_by(f64::total_cmp);
        let knots: Vec<(f64, f64)> = xs.iter().map(|&x| (x, rng.gen_range(-1.0..1.0))).collect();
        let g = Payoff::Vanilla { maturity, knots: knots.clone() }.values(&s.lattice).unwrap();
        let mu_g = s.inst.sys.marginal(maturity).expectation_of(|x| piecewise_linear(&knots, x));
        match indifference_prices(&ctx, &g) {
            Ok(p) => worst_vanilla = worst_vanilla.max((p.p_sell - mu_g).abs()).max((p.p_buy - mu_g).abs()),
            Err(e) => violations.push(format!("vanilla seed {seed}: {e}")),
        }
    }
    outcome(
        violations.is_empty() && worst_vanilla <= 1e-6,
        format!("sandwich on {} runs; vanilla worst error {worst_vanilla:.2e} over 10 payoffs {violations:?}", runs().len()),
    )
}

fn call_span() -> Outcome {
    let mut worst_primal = 0.0_f64;
    let mut worst_rebuild = 0.0_f64;
    let mut missing = Vec::new();
    for r in runs() {
        match (&r.report, r.calls_primal) {
            (Ok(rep), Some(c)) => {
                worst_primal = worst_primal.max((c - rep.primal.value).abs());
                worst_rebuild = worst_rebuild.max(r.reconstruction);
            }
            _ => missing.push(r.seed),
        }
    }
    outcome(
        missing.is_empty() && worst_primal < 1e-6 && worst_rebuild <= 4.0 * f64::EPSILON,
        format!(
            "calls vs grid primal worst {worst_primal:.2e} (limit 1e-6); reconstruction worst {worst_rebuild:.1e} relative \
             (rounding level) {missing:?}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn trivial_case() -> Outcome {
    let opts = SolveOptions::default();
    let mut strict_passes = 0;
    let mut lines = Vec::new();
    let mut systems: Vec<(String, MarginalSystem, Vec<f64>)> = Vec::new();
    for seed in [3, 5, 8, 9, 18, 26] {
        let s = Setup::seeded(seed);
        systems.push((format!("seed {seed}"), s.inst.sys.clone(), s.psi.clone()));
    }
    let four = MarginalSystem::new(
        0.0,
        vec![
            Marginal::new(Grid::new(vec![-1.0, 1.0]).unwrap(), vec![0.5, 0.5]).unwrap(),
            Marginal::new(Grid::new(vec![-3.0, -1.0, 1.0, 3.0]).unwrap(), vec![0.125, 0.375, 0.375, 0.125]).unwrap(),
        ],
    )
    .unwrap();
    let l = build_lattice(&four, 100).unwrap();
    let straddle = Payoff::Straddle { i: 1, j: 2 }.values(&l).unwrap();
    systems.push(("four atoms".into(), four, straddle));
    let mut all_passed = true;
    for (name, sys, psi) in &systems {
        match trivial_case_check(sys, psi, &opts) {
            Ok(r) => {
                let strict = r.mot_low < r.mot_high - 1e-6;
                all_passed &= r.passed;
                if strict && r.passed {
                    strict_passes += 1;
                }
                lines.push(format!(
                    "{name}: {} vertices, [{:.4}, {:.4}] errors {:.1e}/{:.1e}",
                    r.n_vertices, r.mot_low, r.mot_high, r.sell_error, r.buy_error
                ));
            }
            Err(e) => {
                all_passed = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(
        all_passed && strict_passes >= 5,
        format!("{strict_passes} strict instances attain both bounds within 1e-4; {}", lines.join("; ")),
    )
}

// ---------------------------------------------------------------- criterion 9

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("semistatic-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut files = vec![("unique".to_string(), unique_coupling_instance())];
    files.extend((0..4).map(|seed| (format!("seed{seed}"), random_instance(seed))));
    let mut identical = 0;
    let mut problems = Vec::new();
    for (name, file) in &files {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, file.to_json()).unwrap();
        let outputs: Vec<_> = (0..3).map(|_| cmd_price(&path, &Overrides::default())).collect();
        if outputs.iter().any(|o| o.code != EXIT_OK) {
            problems.push(format!("{name} exited with {:?}", outputs.iter().map(|o| o.code).collect::<Vec<_>>()));
        } else if outputs.iter().all(|o| o.document.as_bytes() == outputs[0].document.as_bytes()) {
            identical += 1;
        } else {
            problems.push(format!("{name} differs between runs"));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(
        identical == files.len(),
        format!("{identical}/{} instances byte-identical over 3 runs {problems:?}", files.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("strassen equivalence", strassen_equivalence),
        ("conjugacy", conjugacy),
        ("exponential closed form", exponential_closed_form),
        ("duality gap", duality_gap),
        ("indifference cross-check and invariants", cross_check_and_invariants),
        ("sandwich and vanilla consistency", sandwich_and_vanillas),
        ("trivial case", trivial_case),
        ("call-span restriction", call_span),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !result.passed {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} in {:.1?}: {}",
            i + 1,
            if result.passed { "PASS" } else { "FAIL" },
            start.elapsed(),
            result.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
