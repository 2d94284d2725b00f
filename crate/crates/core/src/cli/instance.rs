//! Instance files: calibrated marginals, priors, utility, claim and options.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::{AmbiguitySet, UtilitySpec};
use crate::error::{Error, Result};
use crate::market::{marginal_from_call_quotes, CallQuoteCurve, Grid, Marginal, MarginalSystem};
use crate::optimize::SolveOptions;
use crate::polytope::{build_lattice, PathLattice, PathMeasure, DEFAULT_PATH_CAP};
use crate::pricing::Payoff;

/// One maturity, given either as a pmf on a grid or as call quotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginalSpec {
    Pmf(PmfSpec),
    Quotes(QuoteSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfSpec {
    pub grid: Vec<f64>,
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuoteSpec {
    pub strikes: Vec<f64>,
    pub call_prices: Vec<f64>,
}

/// A prior path measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Uniform,
    /// Product of the calibrated marginals.
    Independent,
    /// Uniform measure tilted by `exp(theta * S_N)`.
    Tilted { theta: f64 },
    /// Explicit nonnegative weights per path, normalised on load.
    Weights { values: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_priors() -> Vec<PriorSpec> {
    vec![PriorSpec::Uniform]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub s0: f64,
    pub marginals: Vec<MarginalSpec>,
    #[serde(default = "default_priors")]
    pub priors: Vec<PriorSpec>,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub payoff: Option<Payoff>,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub options: OptionsSpec,
}

/// Command-line overrides of the file's solver options.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub max_paths: Option<usize>,
}

/// A parsed instance with its lattice and priors built.
#[derive(Debug, Clone)]
pub struct Instance {
    pub file: InstanceFile,
    pub sys: MarginalSystem,
    pub opts: SolveOptions,
    pub max_paths: usize,
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }

    pub fn marginal_system(&self) -> Result<MarginalSystem> {
        if !self.s0.is_finite() {
            return Err(Error::Parse("s0 must be finite".into()));
        }
        if self.marginals.is_empty() {
            return Err(Error::Parse("at least one marginal is required".into()));
        }
        let marginals = self
            .marginals
            .iter()
            .enumerate()
            .map(|(i, spec)| match spec {
                MarginalSpec::Pmf(p) => Marginal::new(Grid::new(p.grid.clone())?, p.pmf.clone()),
                MarginalSpec::Quotes(q) => {
                    let curve = CallQuoteCurve::new(i + 1, q.strikes.clone(), q.call_prices.clone())?;
                    marginal_from_call_quotes(&curve, self.s0)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        MarginalSystem::new(self.s0, marginals)
    }

    pub fn solve_options(&self, over: &Overrides) -> Result<SolveOptions> {
        let mut opts = SolveOptions::default();
        if let Some(t) = over.tolerance.or(self.options.tolerance) {
            opts = opts.with_tolerance(t);
        }
        opts = opts.with_seed(over.seed.or(self.options.seed).unwrap_or(0));
        opts.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(opts)
    }

    pub fn load(self, over: &Overrides) -> Result<Instance> {
        let sys = self.marginal_system()?;
        let opts = self.solve_options(over)?;
        self.utility.validate()?;
        if self.priors.is_empty() {
            return Err(Error::Parse("at least one prior is required".into()));
        }
        if !self.x.is_finite() {
            return Err(Error::Parse("x must be finite".into()));
        }
        let max_paths = over.max_paths.or(self.options.max_paths).unwrap_or(DEFAULT_PATH_CAP);
        Ok(Instance { file: self, sys, opts, max_paths })
    }
}

impl PriorSpec {
    pub fn build(&self, lattice: &Arc<PathLattice>, sys: &MarginalSystem) -> Result<PathMeasure> {
        let n = lattice.n_paths();
        let raw: Vec<f64> = match self {
            PriorSpec::Uniform => vec![1.0; n],
            PriorSpec::Independent => (0..n)
                .map(|j| sys.marginals().iter().enumerate().map(|(i, m)| m.pmf()[lattice.grid_index(j, i + 1)]).product())
                .collect(),
            PriorSpec::Tilted { theta } => {
                if !theta.is_finite() {
                    return Err(Error::Parse("tilt must be finite".into()));
                }
                let last: Vec<f64> = lattice.paths().map(|x| theta * x[x.len() - 1]).collect();
                let top = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                last.iter().map(|v| (v - top).exp()).collect()
            }
            PriorSpec::Weights { values } => {
                if values.len() != n {
                    return Err(Error::Parse(format!("prior has {} weights for {n} paths", values.len())));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Parse("prior weights must be finite and nonnegative".into()));
                }
                values.clone()
            }
        };
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Parse("prior has no mass".into()));
        }
        PathMeasure::new(lattice.clone(), raw.iter().map(|v| v / total).collect())
    }
}

impl Instance {
    pub fn lattice(&self) -> Result<Arc<PathLattice>> {
        Ok(Arc::new(build_lattice(&self.sys, self.max_paths)?))
    }

    pub fn ambiguity(&self, lattice: &Arc<PathLattice>) -> Result<AmbiguitySet> {
        let priors = self.file.priors.iter().map(|p| p.build(lattice, &self.sys)).collect::<Result<Vec<_>>>()?;
        AmbiguitySet::new(priors)
    }

    pub fn payoff_values(&self, lattice: &PathLattice) -> Result<Vec<f64>> {
        self.file.payoff.as_ref().ok_or_else(|| Error::Parse("instance has no payoff".into()))?.values(lattice)
    }
}

/// A seeded two-period instance whose marginals are in convex order by
/// construction: `mu_2` is `mu_1` pushed through a martingale kernel.
pub fn random_instance(seed: u64) -> InstanceFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = rng.gen_range(2..=4);
    let n2 = rng.gen_range(4..=5);
    let mut g1: Vec<f64> = (0..n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    g1.sort_by(f64::total_cmp);
    for k in 1..n1 {
        if g1[k] - g1[k - 1] < 0.1 {
            g1[k] = g1[k - 1] + 0.1;
        }
    }
    let p1: Vec<f64> = (0..n1).map(|_| rng.gen_range(0.2..1.0)).collect();
    let t1: f64 = p1.iter().sum();
    let p1: Vec<f64> = p1.iter().map(|v| v / t1).collect();
    let mean: f64 = g1.iter().zip(&p1).map(|(a, b)| a * b).sum();
    let g1: Vec<f64> = g1.iter().map(|x| x - mean).collect();

    let (lo, hi) = (-3.0, 3.0);
    let mut g2 = vec![lo, hi];
    while g2.len() < n2 {
        let x: f64 = rng.gen_range(-2.5..2.5);
        if g2.iter().all(|y| (x - y).abs() > 0.2) {
            g2.push(x);
        }
    }
    g2.sort_by(f64::total_cmp);
    let mut p2 = vec![0.0; n2];
    for (x1, w1) in g1.iter().zip(&p1) {
        let r: Vec<f64> = (0..n2).map(|_| rng.gen_range(0.1..1.0)).collect();
        let tr: f64 = r.iter().sum();
        let r: Vec<f64> = r.iter().map(|v| v / tr).collect();
        let mr: f64 = r.iter().zip(&g2).map(|(a, b)| a * b).sum();
        // mix r with a two-point law on {lo, hi} so that the kernel mean is x1
        let mut alpha = 0.8;
        let mut mb = (x1 - alpha * mr) / (1.0 - alpha);
        while !(lo < mb && mb < hi) {
            alpha *= 0.5;
            mb = (x1 - alpha * mr) / (1.0 - alpha);
        }
        let b_hi = (mb - lo) / (hi - lo);
        for k in 0..n2 {
            p2[k] += w1 * alpha * r[k];
        }
        p2[0] += w1 * (1.0 - alpha) * (1.0 - b_hi);
        p2[n2 - 1] += w1 * (1.0 - alpha) * b_hi;
    }
    let t2: f64 = p2.iter().sum();
    let p2: Vec<f64> = p2.iter().map(|v| v / t2).collect();
    // re-centre the second grid on the exact spot after rounding
    let m2: f64 = g2.iter().zip(&p2).map(|(a, b)| a * b).sum();
    let g2: Vec<f64> = g2.iter().map(|x| x - m2).collect();

    let n_priors = 1 + (seed % 3) as usize;
    let mut priors = vec![PriorSpec::Uniform, PriorSpec::Independent, PriorSpec::Tilted { theta: rng.gen_range(-0.5..0.5) }];
    priors.truncate(n_priors);
    let utility = if seed % 2 == 0 {
        UtilitySpec::Exponential { a: rng.gen_range(0.5..2.0) }
    } else {
        UtilitySpec::EntropicQuadratic { kappa: rng.gen_range(0.2..2.0) }
    };
    let n_paths = n1 * n2;
    let payoff = match seed % 3 {
        0 => Payoff::Straddle { i: 1, j: 2 },
        1 => Payoff::AsianCall { strike: rng.gen_range(-0.5..0.5) },
        _ => Payoff::Table { values: (0..n_paths).map(|_| rng.gen_range(-1.0..1.0)).collect() },
    };
    let x = [-1.0, 0.0, 1.0][(seed / 3 % 3) as usize];
    InstanceFile {
        s0: 0.0,
        marginals: vec![
            MarginalSpec::Pmf(PmfSpec { grid: g1, pmf: p1 }),
            MarginalSpec::Pmf(PmfSpec { grid: g2, pmf: p2 }),
        ],
        priors,
        utility,
        payoff: Some(payoff),
        x,
        options: OptionsSpec { seed: Some(seed), ..OptionsSpec::default() },
    }
}

/// The two-period instance whose calibrated polytope is a single point.
pub fn unique_coupling_instance() -> InstanceFile {
    InstanceFile {
        s0: 0.0,
        marginals: vec![
            MarginalSpec::Pmf(PmfSpec { grid: vec![-1.0, 1.0], pmf: vec![0.5, 0.5] }),
            MarginalSpec::Pmf(PmfSpec { grid: vec![-2.0, 0.0, 2.0], pmf: vec![0.25, 0.5, 0.25] }),
        ],
        priors: default_priors(),
        utility: UtilitySpec::Exponential { a: 1.0 },
        payoff: Some(Payoff::Straddle { i: 1, j: 2 }),
        x: 0.0,
        options: OptionsSpec::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::check_strassen;

    #[test]
    fn parses_both_marginal_forms() {
        let text = r#"{
            "s0": 0,
            "marginals": [
                {"grid": [-1, 1], "pmf": [0.5, 0.5]},
                {"strikes": [-2, 0, 2], "call_prices": [2, 0.5, 0]}
            ],
            "priors": [{"kind": "uniform"}, {"kind": "tilted", "theta": 0.3}],
            "utility": {"kind": "entropic_quadratic", "kappa": 0.5},
            "payoff": {"kind": "straddle", "i": 1, "j": 2},
            "x": 1
        }"#;
        let f = InstanceFile::parse(text).unwrap();
        let inst = f.load(&Overrides::default()).unwrap();
        assert_eq!(inst.sys.marginal(2).pmf(), &[0.25, 0.5, 0.25]);
        let l = inst.lattice().unwrap();
        let amb = inst.ambiguity(&l).unwrap();
        assert_eq!(amb.len(), 2);
        let tilted = amb.priors()[1].weights();
        assert!(tilted[2] > tilted[1] && tilted[1] > tilted[0]);
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(matches!(InstanceFile::parse(r#"{"s0": 0, "marginals": [], "extra": 1}"#), Err(Error::Parse(_))));
        assert!(InstanceFile::parse(r#"{"s0": 0, "marginals": [{"grid": [0], "pmf": [1], "x": 2}]}"#).is_err());
        assert!(InstanceFile::parse(r#"{"s0": 0, "marginals": [], "priors": [{"kind": "flat"}]}"#).is_err());
    }

    #[test]
    fn independent_prior_is_product() {
        let inst = unique_coupling_instance().load(&Overrides::default()).unwrap();
        let l = inst.lattice().unwrap();
        let p = PriorSpec::Independent.build(&l, &inst.sys).unwrap();
        assert_eq!(p.weights(), &[0.125, 0.25, 0.125, 0.125, 0.25, 0.125]);
    }

    #[test]
    fn random_instances_are_calibrated() {
        for seed in 0..200 {
            let f = random_instance(seed);
            let again = InstanceFile::parse(&f.to_json()).unwrap();
            assert_eq!(again, f);
            let inst = f.load(&Overrides::default()).unwrap();
            assert!(check_strassen(&inst.sys).is_feasible(), "seed {seed}");
        }
    }
}
