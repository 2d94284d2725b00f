//! Robust integral functional, robust divergence and the gamma penalty.

use std::sync::Arc;

use serde::Serialize;

use super::{IntegrandSpec, UtilitySpec, GRADIENT_CAP};
use crate::error::{Error, Result};
use crate::optimize::{minimize_convex_1d, minimize_over_simplex, SolveOptions};
use crate::polytope::{PathLattice, PathMeasure};

/// Convex hull of finitely many prior probabilities on one lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    priors: Vec<PathMeasure>,
    /// Paths charged by some prior.
    support: Vec<bool>,
}

impl AmbiguitySet {
    pub fn new(priors: Vec<PathMeasure>) -> Result<Self> {
        let first = priors.first().ok_or_else(|| Error::Parse("at least one prior is required".into()))?;
        if priors.iter().any(|p| !p.same_lattice(first)) {
            return Err(Error::LatticeMismatch);
        }
        if let Some(p) = priors.iter().find(|p| (p.total_mass() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidMarginal(format!("prior has total mass {}", p.total_mass())));
        }
        let n = first.weights().len();
        let support = (0..n).map(|j| priors.iter().any(|p| p.weights()[j] > 0.0)).collect();
        Ok(Self { priors, support })
    }

    pub fn priors(&self) -> &[PathMeasure] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn lattice(&self) -> &Arc<PathLattice> {
        self.priors[0].lattice()
    }

    pub fn n_paths(&self) -> usize {
        self.support.len()
    }

    /// Paths charged by the uniform mixture of the generators.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    /// `sum_k w_k P_k` path by path.
    pub fn mixture(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_paths()];
        for (p, wk) in self.priors.iter().zip(w) {
            for (o, v) in out.iter_mut().zip(p.weights()) {
                *o += wk * v;
            }
        }
        out
    }
}

/// `max_k E_{P_k}[phi_B(., f)]`, exact because the map is affine in `P`.
pub fn robust_integral(f: &[f64], spec: &IntegrandSpec, amb: &AmbiguitySet) -> Result<f64> {
    if f.len() != amb.n_paths() {
        return Err(Error::LatticeMismatch);
    }
    spec.check_len(f.len())?;
    Ok(amb
        .priors()
        .iter()
        .map(|p| {
            p.weights()
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(j, w)| w * spec.phi_at(j, f[j]))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `sum_j p_j phi_B*(j, nu_j / p_j)` with `0/0` contributing nothing.
pub(crate) fn single_raw(nu: &[f64], p: &[f64], spec: &IntegrandSpec) -> f64 {
    let mut total = 0.0;
    for (j, (&n, &pj)) in nu.iter().zip(p).enumerate() {
        if pj <= 0.0 {
            if n != 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let c = spec.conj_at(j, n / pj);
        if !c.is_finite() {
            return f64::INFINITY;
        }
        total += pj * c;
    }
    total
}

pub fn divergence_single(nu: &PathMeasure, p: &PathMeasure, spec: &IntegrandSpec) -> Result<f64> {
    if !nu.same_lattice(p) {
        return Err(Error::LatticeMismatch);
    }
    spec.check_len(nu.weights().len())?;
    Ok(single_raw(nu.weights(), p.weights(), spec))
}

/// Value of the robust divergence with the minimising mixture weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustDivergence {
    pub value: f64,
    pub weights: Vec<f64>,
}

/// Evaluates `J(nu) = inf_w J(nu | P_w)` repeatedly, warm-starting the
/// mixture weights from the previous call.
#[derive(Debug, Clone)]
pub struct DivergenceEvaluator<'a> {
    amb: &'a AmbiguitySet,
    spec: &'a IntegrandSpec,
    opts: SolveOptions,
    warm: Option<Vec<f64>>,
}

impl<'a> DivergenceEvaluator<'a> {
    pub fn new(amb: &'a AmbiguitySet, spec: &'a IntegrandSpec, opts: &SolveOptions) -> Self {
        Self { amb, spec, opts: opts.clone(), warm: None }
    }

    pub fn spec(&self) -> &IntegrandSpec {
        self.spec
    }

    pub fn ambiguity(&self) -> &AmbiguitySet {
        self.amb
    }

    /// Signed measure with support or sign incompatible with `dom phi*`.
    fn outside_domain(&self, nu: &[f64]) -> bool {
        nu.iter().zip(self.amb.support()).any(|(n, s)| (*n != 0.0 && !s) || (*n < 0.0 && self.spec.base.nonnegative_domain()))
    }

    pub fn evaluate(&mut self, nu: &[f64]) -> RobustDivergence {
        let m = self.amb.len();
        if self.outside_domain(nu) {
            return RobustDivergence { value: f64::INFINITY, weights: vec![1.0 / m as f64; m] };
        }
        if m == 1 {
            return RobustDivergence { value: single_raw(nu, self.amb.priors()[0].weights(), self.spec), weights: vec![1.0] };
        }
        let (amb, spec) = (self.amb, self.spec);
        let r = minimize_over_simplex(
            |w| {
                let pw = amb.mixture(w);
                let value = single_raw(nu, &pw, spec);
                let slopes: Vec<f64> = nu
                    .iter()
                    .zip(&pw)
                    .map(|(n, p)| if *p > 0.0 { spec.base.perspective_slope(n / p) } else { spec.base.conj(0.0) })
                    .collect();
                let grad = amb.priors().iter().map(|pk| pk.weights().iter().zip(&slopes).map(|(a, s)| a * s).sum()).collect();
                (value, grad)
            },
            m,
            self.warm.as_deref(),
            &self.opts,
        );
        self.warm = Some(r.weights.clone());
        RobustDivergence { value: r.value, weights: r.weights }
    }

    /// Value and gradient in `nu`, the latter at the optimal mixture.
    pub fn value_and_gradient(&mut self, nu: &[f64]) -> (RobustDivergence, Vec<f64>) {
        let r = self.evaluate(nu);
        let pw = self.amb.mixture(&r.weights);
        let grad = nu
            .iter()
            .zip(&pw)
            .enumerate()
            .map(|(j, (n, p))| if *p > 0.0 { self.spec.conj_prime_at(j, n / p) } else { GRADIENT_CAP })
            .collect();
        (r, grad)
    }
}

/// `inf_{P in hull} J(nu | P)` by minimisation over mixture weights.
pub fn divergence_robust(
    nu: &PathMeasure,
    amb: &AmbiguitySet,
    spec: &IntegrandSpec,
    opts: &SolveOptions,
) -> Result<RobustDivergence> {
    if !nu.same_lattice(&amb.priors()[0]) {
        return Err(Error::LatticeMismatch);
    }
    spec.check_len(nu.weights().len())?;
    Ok(DivergenceEvaluator::new(amb, spec, opts).evaluate(nu.weights()))
}

/// `gamma(q)` together with the optimal scaling and mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaPenalty {
    pub gamma: f64,
    pub lambda: f64,
    pub weights: Vec<f64>,
}

pub const LAMBDA_FLOOR: f64 = 1e-8;

/// `inf_{lambda > 0} (J(lambda q) - u0) / lambda`, searched in `log lambda`.
pub(crate) fn gamma_raw(eval: &mut DivergenceEvaluator<'_>, q: &[f64], u0_at_0: f64, opts: &SolveOptions) -> Result<GammaPenalty> {
    if eval.evaluate(q).value.is_infinite() {
        return Err(Error::DivergenceInfinite);
    }
    let mut obj = |s: f64| -> f64 {
        let lambda = s.exp();
        let nu: Vec<f64> = q.iter().map(|v| lambda * v).collect();
        (eval.evaluate(&nu).value - u0_at_0) / lambda
    };
    let lo = LAMBDA_FLOOR.ln();
    let mut hi = 0.0_f64;
    let mut prev = obj(hi);
    for _ in 0..200 {
        let v = obj(hi + 1.0);
        hi += 1.0;
        if v > prev {
            break;
        }
        prev = v;
    }
    let search = opts.clone().with_tolerance(1e-10);
    let best = minimize_convex_1d(&mut obj, (lo, hi), &search)?;
    let lambda = best.argmin.exp();
    let nu: Vec<f64> = q.iter().map(|v| lambda * v).collect();
    let weights = eval.evaluate(&nu).weights;
    let gamma = if best.min < 0.0 && best.min >= -1e-9 { 0.0 } else { best.min };
    Ok(GammaPenalty { gamma, lambda, weights })
}

pub fn gamma_penalty(
    q: &PathMeasure,
    amb: &AmbiguitySet,
    utility: UtilitySpec,
    u0_at_0: f64,
    opts: &SolveOptions,
) -> Result<GammaPenalty> {
    if !q.same_lattice(&amb.priors()[0]) {
        return Err(Error::LatticeMismatch);
    }
    let spec = IntegrandSpec::utility(utility);
    let mut eval = DivergenceEvaluator::new(amb, &spec, opts);
    gamma_raw(&mut eval, q.weights(), u0_at_0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::BaseIntegrand;
    use crate::market::Grid;

    fn lattice6() -> Arc<PathLattice> {
        Arc::new(
            PathLattice::new(vec![Grid::new(vec![-1.0, 1.0]).unwrap(), Grid::new(vec![-2.0, 0.0, 2.0]).unwrap()], 0.0, 100)
                .unwrap(),
        )
    }

    fn coupling(l: &Arc<PathLattice>) -> PathMeasure {
        PathMeasure::new(l.clone(), vec![0.25, 0.25, 0.0, 0.0, 0.25, 0.25]).unwrap()
    }

    fn exp_v() -> IntegrandSpec {
        IntegrandSpec::utility(UtilitySpec::Exponential { a: 1.0 })
    }

    #[test]
    fn robust_integral_examples() {
        let l = lattice6();
        let uni = PathMeasure::uniform(l.clone());
        let skew = PathMeasure::new(l.clone(), vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let amb = AmbiguitySet::new(vec![uni.clone(), skew.clone()]).unwrap();
        let quad = IntegrandSpec::new(BaseIntegrand::Quadratic);
        assert_eq!(robust_integral(&[0.0; 6], &quad, &amb).unwrap(), 0.0);
        assert!((robust_integral(&[1.0; 6], &quad, &amb).unwrap() - 0.5).abs() < 1e-15);
        let step = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let e = IntegrandSpec::new(BaseIntegrand::Exp);
        let by_hand_uni = 0.5 + 0.5 * 1f64.exp();
        let by_hand_skew = 0.7 + 0.3 * 1f64.exp();
        let got = robust_integral(&step, &e, &amb).unwrap();
        assert!((got - by_hand_uni.max(by_hand_skew)).abs() < 1e-14);
    }

    #[test]
    fn single_divergence_examples() {
        let l = lattice6();
        let p = PathMeasure::uniform(l.clone());
        assert!((divergence_single(&p, &p, &exp_v()).unwrap() + 1.0).abs() < 1e-15);
        for lambda in [0.3, 1.0, 2.5] {
            let nu = p.scaled(lambda).unwrap();
            let expect = lambda * lambda.ln() - lambda;
            assert!((divergence_single(&nu, &p, &exp_v()).unwrap() - expect).abs() < 1e-14);
        }
        let point = PathMeasure::new(l.clone(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let off = PathMeasure::new(l.clone(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(divergence_single(&off, &point, &exp_v()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn exponential_identity_with_entropy() {
        // J_V(lambda q | p) = lambda E(q|p) + lambda log lambda - lambda
        let l = lattice6();
        let p = PathMeasure::new(l.clone(), vec![0.1, 0.2, 0.15, 0.15, 0.3, 0.1]).unwrap();
        let q = coupling(&l);
        let ent: f64 = q.weights().iter().zip(p.weights()).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
        for lambda in [0.5, 1.7] {
            let j = divergence_single(&q.scaled(lambda).unwrap(), &p, &exp_v()).unwrap();
            assert!((j - (lambda * ent + lambda * lambda.ln() - lambda)).abs() < 1e-14);
        }
    }

    #[test]
    fn unique_coupling_entropy() {
        let l = lattice6();
        let amb = AmbiguitySet::new(vec![PathMeasure::uniform(l.clone())]).unwrap();
        let q = coupling(&l);
        let ent = IntegrandSpec::new(BaseIntegrand::Exp);
        // y log y - y at density 1.5 summed: E(q|p) - 1
        let j = divergence_robust(&q, &amb, &ent, &SolveOptions::default()).unwrap();
        assert!((j.value - (1.5f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn duplicated_and_single_hull() {
        let l = lattice6();
        let p = PathMeasure::new(l.clone(), vec![0.1, 0.2, 0.15, 0.15, 0.3, 0.1]).unwrap();
        let q = coupling(&l);
        let single = divergence_single(&q, &p, &exp_v()).unwrap();
        let one = AmbiguitySet::new(vec![p.clone()]).unwrap();
        let two = AmbiguitySet::new(vec![p.clone(), p.clone()]).unwrap();
        let opts = SolveOptions::default();
        assert_eq!(divergence_robust(&q, &one, &exp_v(), &opts).unwrap().value, single);
        assert!((divergence_robust(&q, &two, &exp_v(), &opts).unwrap().value - single).abs() < 1e-12);
    }

    #[test]
    fn robust_divergence_matches_grid_oracle() {
        let l = lattice6();
        let p1 = PathMeasure::new(l.clone(), vec![0.4, 0.05, 0.05, 0.05, 0.05, 0.4]).unwrap();
        let p2 = PathMeasure::new(l.clone(), vec![0.05, 0.3, 0.1, 0.1, 0.3, 0.15]).unwrap();
        let amb = AmbiguitySet::new(vec![p1.clone(), p2.clone()]).unwrap();
        let q = coupling(&l);
        let spec = IntegrandSpec::utility(UtilitySpec::EntropicQuadratic { kappa: 0.5 });
        let oracle = (0..=100_000)
            .map(|k| {
                let w = k as f64 / 100_000.0;
                let pw: Vec<f64> = p1.weights().iter().zip(p2.weights()).map(|(a, b)| w * a + (1.0 - w) * b).collect();
                single_raw(q.weights(), &pw, &spec)
            })
            .fold(f64::INFINITY, f64::min);
        let got = divergence_robust(&q, &amb, &spec, &SolveOptions::default()).unwrap();
        assert!(got.value <= oracle + 1e-12);
        assert!(oracle - got.value < 1e-8);
    }

    #[test]
    fn gamma_examples() {
        let l = lattice6();
        let uni = PathMeasure::uniform(l.clone());
        let opts = SolveOptions::default();
        let exp = UtilitySpec::Exponential { a: 1.0 };
        let one = AmbiguitySet::new(vec![uni.clone()]).unwrap();
        let g = gamma_penalty(&uni, &one, exp, -1.0, &opts).unwrap();
        assert!(g.gamma.abs() < 1e-9);
        assert!((g.lambda - 1.0).abs() < 1e-4);
        let g = gamma_penalty(&coupling(&l), &one, exp, -2.0 / 3.0, &opts).unwrap();
        assert!(g.gamma.abs() < 1e-9);
        assert!((g.lambda - 2.0 / 3.0).abs() < 1e-4);
        let point = PathMeasure::new(l.clone(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let amb = AmbiguitySet::new(vec![point]).unwrap();
        assert_eq!(gamma_penalty(&coupling(&l), &amb, exp, -1.0, &opts), Err(Error::DivergenceInfinite));
    }

    #[test]
    fn gamma_one_dimensional_oracle() {
        // closed form (E - m0)/a against the search, with a != 1
        let l = lattice6();
        let p = PathMeasure::new(l.clone(), vec![0.1, 0.2, 0.15, 0.15, 0.3, 0.1]).unwrap();
        let amb = AmbiguitySet::new(vec![p.clone()]).unwrap();
        let q = coupling(&l);
        let a = 0.5;
        let ent: f64 = q.weights().iter().zip(p.weights()).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum();
        let m0: f64 = 0.1;
        let u0 = -(-m0).exp() / a;
        let g = gamma_penalty(&q, &amb, UtilitySpec::Exponential { a }, u0, &SolveOptions::default()).unwrap();
        assert!((g.gamma - (ent - m0) / a).abs() < 1e-9, "{} vs {}", g.gamma, (ent - m0) / a);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn measure(l: &Arc<PathLattice>, w: Vec<f64>) -> PathMeasure {
            PathMeasure::new(l.clone(), w).unwrap()
        }

        proptest! {
            #[test]
            fn young_and_convexity(
                f in proptest::collection::vec(-2.0f64..2.0, 6),
                a in proptest::collection::vec(0.01f64..2.0, 6),
                b in proptest::collection::vec(0.01f64..2.0, 6),
                p in proptest::collection::vec(0.05f64..1.0, 6),
            ) {
                let l = lattice6();
                let t: f64 = p.iter().sum();
                let prior = measure(&l, p.iter().map(|v| v / t).collect());
                let amb = AmbiguitySet::new(vec![prior, PathMeasure::uniform(l.clone())]).unwrap();
                let opts = SolveOptions::default();
                for spec in [exp_v(), IntegrandSpec::new(BaseIntegrand::Quadratic), IntegrandSpec::with_shift(BaseIntegrand::Exp, f.iter().map(|v| 0.5 * v).collect()).unwrap()] {
                    let nu = measure(&l, a.clone());
                    let j = divergence_robust(&nu, &amb, &spec, &opts).unwrap().value;
                    let i = robust_integral(&f, &spec, &amb).unwrap();
                    let pairing: f64 = f.iter().zip(&a).map(|(x, y)| x * y).sum();
                    prop_assert!(pairing <= i + j + 1e-9);
                    let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                    let jm = divergence_robust(&measure(&l, mid), &amb, &spec, &opts).unwrap().value;
                    let jb = divergence_robust(&measure(&l, b.clone()), &amb, &spec, &opts).unwrap().value;
                    prop_assert!(jm <= 0.5 * (j + jb) + 1e-9);
                }
            }

            #[test]
            fn gamma_nonnegative(q in proptest::collection::vec(0.01f64..1.0, 6)) {
                let l = lattice6();
                let t: f64 = q.iter().sum();
                let qm = measure(&l, q.iter().map(|v| v / t).collect());
                let amb = AmbiguitySet::new(vec![PathMeasure::uniform(l.clone())]).unwrap();
                // u0 = -exp(-min E)/a with min E >= 0 bounded by 0 here
                let g = gamma_penalty(&qm, &amb, UtilitySpec::EntropicQuadratic { kappa: 0.3 }, -0.5, &SolveOptions::default());
                let _ = g.unwrap();
                let g = gamma_penalty(&qm, &amb, UtilitySpec::Exponential { a: 1.0 }, -1.0, &SolveOptions::default()).unwrap();
                prop_assert!(g.gamma >= 0.0);
            }
        }
    }
}
