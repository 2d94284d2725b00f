//! Frank-Wolfe (conditional gradient) with away steps.
//!
//! Iterates are kept as explicit convex combinations of oracle vertices, so
//! they stay exactly feasible. Step sizes come from an exact line search on
//! the segment, located as the root of the directional derivative; `+inf`
//! objective values act as a barrier that shrinks the step.

use super::{dot, solve_lp, LinearProgram, LpStatus, SolveOptions};
use crate::error::{Error, Result};

/// Linear minimisation oracle over a polytope.
pub trait LinearOracle {
    fn dim(&self) -> usize;
    /// A vertex minimising `<direction, x>`.
    fn minimize(&self, direction: &[f64]) -> Result<Vec<f64>>;
}

/// Convex objective with gradient. `value` may return `+inf` off its domain.
pub trait SmoothObjective {
    fn value_and_gradient(&mut self, x: &[f64]) -> (f64, Vec<f64>);

    fn value(&mut self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }

    /// Whether steps should stop short of the face boundary. Objectives
    /// whose gradient is unreliable where coordinates vanish set this.
    fn interior(&self) -> bool {
        false
    }
}

/// Fraction of the feasible step kept when iterates must stay interior.
const INTERIOR_STEP: f64 = 1.0 - 1e-3;

/// Vertices with convex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub vertices: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ActiveSet {
    pub fn from_vertices(vertices: Vec<Vec<f64>>) -> Self {
        let k = vertices.len();
        Self { vertices, weights: vec![1.0 / k as f64; k] }
    }

    pub fn point(&self) -> Vec<f64> {
        let n = self.vertices.first().map_or(0, Vec::len);
        let mut x = vec![0.0; n];
        for (v, a) in self.vertices.iter().zip(&self.weights) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += a * vi;
            }
        }
        x
    }

    fn add(&mut self, s: Vec<f64>, weight: f64) {
        if let Some(i) = self.vertices.iter().position(|v| v == &s) {
            self.weights[i] += weight;
        } else {
            self.vertices.push(s);
            self.weights.push(weight);
        }
    }

    fn prune(&mut self) {
        let mut i = 0;
        while i < self.vertices.len() {
            if self.weights[i] <= 1e-15 && self.vertices.len() > 1 {
                self.vertices.swap_remove(i);
                self.weights.swap_remove(i);
            } else {
                i += 1;
            }
        }
        let t: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= t);
    }
}

/// Linear minimisation over `{x >= 0 : rows x = rhs}` by the simplex LP.
#[derive(Debug, Clone)]
pub struct LpOracle {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    opts: SolveOptions,
}

impl LpOracle {
    pub fn new(rows: Vec<Vec<f64>>, rhs: Vec<f64>, opts: &SolveOptions) -> Self {
        Self { rows, rhs, opts: opts.clone() }
    }

    fn n(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Average of the vertices maximising each coordinate in turn, which
    /// lies in the relative interior of the polytope.
    pub fn interior_start(&self) -> Result<ActiveSet> {
        let n = self.n();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        let mut covered = vec![false; n];
        for k in 0..n {
            if covered[k] {
                continue;
            }
            let mut c = vec![0.0; n];
            c[k] = -1.0;
            let v = self.minimize(&c)?;
            for (flag, x) in covered.iter_mut().zip(&v) {
                *flag |= *x > 0.0;
            }
            if !vertices.contains(&v) {
                vertices.push(v);
            }
        }
        if vertices.is_empty() {
            vertices.push(self.minimize(&vec![0.0; n])?);
        }
        Ok(ActiveSet::from_vertices(vertices))
    }
}

impl LinearOracle for LpOracle {
    fn dim(&self) -> usize {
        self.n()
    }

    fn minimize(&self, direction: &[f64]) -> Result<Vec<f64>> {
        let lp = LinearProgram::new(direction.to_vec(), self.rows.clone(), self.rhs.clone())?;
        let sol = solve_lp(&lp, &self.opts)?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.primal.into_iter().map(|v| v.max(0.0)).collect()),
            LpStatus::Infeasible => Err(Error::InfeasiblePolytope),
            LpStatus::Unbounded => Err(Error::Numerical("linear oracle met an unbounded direction".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Frank-Wolfe gap `<grad, x - s>` at the returned point.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub active: ActiveSet,
}

fn line_search(
    objective: &mut dyn SmoothObjective,
    x: &[f64],
    d: &[f64],
    f0: f64,
    slope0: f64,
    gamma_max: f64,
) -> (f64, f64) {
    let at = |g: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + g * b).collect() };
    let probe = |g: f64, obj: &mut dyn SmoothObjective| -> (f64, f64) {
        let (v, grad) = obj.value_and_gradient(&at(g));
        if v.is_finite() {
            (v, dot(&grad, d))
        } else {
            (f64::INFINITY, f64::INFINITY)
        }
    };
    let (fmax, smax) = probe(gamma_max, objective);
    if fmax.is_finite() && smax <= 0.0 {
        return (gamma_max, fmax);
    }
    // root of the directional derivative on [lo, hi]
    let (mut lo, mut slo) = (0.0, slope0);
    let (mut hi, mut shi) = (gamma_max, smax);
    let mut best = (0.0, f0);
    if fmax < best.1 {
        best = (gamma_max, fmax);
    }
    let mut side = 0i8;
    for _ in 0..80 {
        let c = if shi.is_finite() {
            let c = (lo * shi - hi * slo) / (shi - slo);
            if c > lo && c < hi {
                c
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
        let (fc, sc) = probe(c, objective);
        if fc < best.1 {
            best = (c, fc);
        }
        if sc == 0.0 {
            break;
        }
        if sc < 0.0 {
            lo = c;
            slo = sc;
            if side == -1 && shi.is_finite() {
                shi *= 0.5;
            }
            side = -1;
        } else {
            hi = c;
            shi = sc;
            if side == 1 {
                slo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 1e-14 * gamma_max.max(1e-300) || sc.abs() <= 1e-15 * slope0.abs() {
            break;
        }
    }
    best
}

/// Minimises `objective` over the polytope behind `oracle`, starting from
/// the convex combination `start`.
pub fn frank_wolfe(
    oracle: &dyn LinearOracle,
    objective: &mut dyn SmoothObjective,
    start: ActiveSet,
    opts: &SolveOptions,
) -> Result<FwResult> {
    let mut active = start;
    if active.vertices.is_empty() {
        return Err(Error::Numerical("Frank-Wolfe needs a starting vertex".into()));
    }
    active.prune();
    let mut x = active.point();
    let (mut f, mut g) = objective.value_and_gradient(&x);
    if !f.is_finite() {
        return Err(Error::DivergenceInfinite);
    }
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.fw_max_iterations {
        let s = oracle.minimize(&g)?;
        let gx = dot(&g, &x);
        gap = gx - dot(&g, &s);
        if gap <= opts.tolerance * f.abs().max(1.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let (ia, ga) = active
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, dot(&g, v)))
            .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        let away_gap = ga - gx;
        let alpha_a = active.weights[ia];
        let use_away = away_gap > gap && active.vertices.len() > 1 && alpha_a < 1.0;
        let (d, gamma_max): (Vec<f64>, f64) = if use_away {
            (x.iter().zip(&active.vertices[ia]).map(|(a, b)| a - b).collect(), alpha_a / (1.0 - alpha_a))
        } else {
            (s.iter().zip(&x).map(|(a, b)| a - b).collect(), 1.0)
        };
        let gamma_max = if objective.interior() { INTERIOR_STEP * gamma_max } else { gamma_max };
        let slope = dot(&g, &d);
        let (gamma, fnew) = line_search(objective, &x, &d, f, slope, gamma_max);
        if gamma <= 0.0 || !(fnew <= f) {
            // no representable progress along the chosen direction
            converged = gap <= opts.tolerance.sqrt() * f.abs().max(1.0);
            break;
        }
        if use_away {
            for w in active.weights.iter_mut() {
                *w *= 1.0 + gamma;
            }
            active.weights[ia] -= gamma;
            if gamma >= gamma_max {
                active.weights[ia] = 0.0;
            }
        } else if gamma >= 1.0 {
            active = ActiveSet { vertices: vec![s], weights: vec![1.0] };
        } else {
            for w in active.weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            active.add(s, gamma);
        }
        active.prune();
        x = if iterations % 64 == 0 {
            active.point()
        } else {
            x.iter().zip(&d).map(|(a, b)| a + gamma * b).collect()
        };
        let (nf, ng) = objective.value_and_gradient(&x);
        f = nf;
        g = ng;
    }
    Ok(FwResult { point: x, value: f, gap, iterations, converged, active })
}
