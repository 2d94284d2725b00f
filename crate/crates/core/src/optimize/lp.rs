//! Dense revised simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Two phases with artificial columns, Dantzig pricing, and Bland's rule
//! after a run of degenerate pivots. The basis inverse is kept explicitly
//! and rebuilt from scratch every [`REINVERT_EVERY`] pivots.

use serde::Serialize;

use super::SolveOptions;
use crate::error::{Error, Result};

const REINVERT_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let lp = Self { objective, rows, rhs };
        lp.validate()?;
        Ok(lp)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn validate(&self) -> Result<()> {
        if self.rows.len() != self.rhs.len() {
            return Err(Error::MalformedProgram(format!(
                "{} rows but {} right-hand sides",
                self.rows.len(),
                self.rhs.len()
            )));
        }
        let n = self.objective.len();
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::MalformedProgram(format!("row {i} has {} entries, expected {n}", r.len())));
            }
        }
        let finite = self.objective.iter().chain(&self.rhs).chain(self.rows.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::MalformedProgram("non-finite coefficient".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal value; `+inf` when infeasible, `-inf` when unbounded.
    pub value: f64,
    pub primal: Vec<f64>,
    /// Row multipliers `y` with `c - A^T y >= 0` at optimality. When the
    /// program is infeasible this holds a Farkas certificate instead:
    /// `A^T y <= 0` and `b.y > 0`.
    pub duals: Vec<f64>,
    /// Final basis; indices `>= n_vars` denote artificial columns left on
    /// redundant rows.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct Simplex<'a> {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    sign: Vec<f64>,
    n: usize,
    m: usize,
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots: usize,
    since_reinvert: usize,
    opts: &'a SolveOptions,
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, opts: &'a SolveOptions) -> Self {
        let m = lp.n_rows();
        let n = lp.n_vars();
        let mut a = lp.rows.clone();
        let mut b = lp.rhs.clone();
        let mut sign = vec![1.0; m];
        for i in 0..m {
            if b[i] < 0.0 {
                sign[i] = -1.0;
                b[i] = -b[i];
                a[i].iter_mut().for_each(|v| *v = -*v);
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Self {
            a,
            xb: b.clone(),
            b,
            sign,
            n,
            m,
            basis: (n..n + m).collect(),
            binv,
            pivots: 0,
            since_reinvert: 0,
            opts,
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.n {
            self.a.iter().map(|r| r[j]).collect()
        } else {
            let mut e = vec![0.0; self.m];
            e[j - self.n] = 1.0;
            e
        }
    }

    /// `B^{-1} a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut u = vec![0.0; m];
        if j < self.n {
            for r in 0..m {
                let row = &self.binv[r * m..(r + 1) * m];
                u[r] = row.iter().zip(&self.a).map(|(bi, ai)| bi * ai[j]).sum();
            }
        } else {
            let k = j - self.n;
            for r in 0..m {
                u[r] = self.binv[r * m + k];
            }
        }
        u
    }

    /// `y = c_B^T B^{-1}`.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += cb * bi;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        if j < self.n {
            cost[j] - self.a.iter().zip(y).map(|(r, yi)| r[j] * yi).sum::<f64>()
        } else {
            cost[j] - y[j - self.n]
        }
    }

    fn pivot(&mut self, r: usize, j: usize, u: &[f64]) {
        let m = self.m;
        let ur = u[r];
        for c in 0..m {
            self.binv[r * m + c] /= ur;
        }
        self.xb[r] /= ur;
        for i in 0..m {
            if i != r && u[i] != 0.0 {
                let f = u[i];
                for c in 0..m {
                    self.binv[i * m + c] -= f * self.binv[r * m + c];
                }
                self.xb[i] -= f * self.xb[r];
            }
        }
        self.basis[r] = j;
        self.pivots += 1;
        self.since_reinvert += 1;
        if self.since_reinvert >= REINVERT_EVERY {
            self.reinvert();
        }
    }

    /// Rebuilds `B^{-1}` and `x_B` by Gauss-Jordan elimination.
    fn reinvert(&mut self) {
        let m = self.m;
        let cols: Vec<Vec<f64>> = self.basis.iter().map(|&j| self.column(j)).collect();
        // augmented [B | I]
        let mut aug = vec![0.0; m * 2 * m];
        for r in 0..m {
            for c in 0..m {
                aug[r * 2 * m + c] = cols[c][r];
            }
            aug[r * 2 * m + m + r] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&x, &y| aug[x * 2 * m + c].abs().total_cmp(&aug[y * 2 * m + c].abs()))
                .unwrap();
            if aug[piv * 2 * m + c].abs() < 1e-14 {
                // keep the product-form inverse; nothing better available
                self.since_reinvert = 0;
                return;
            }
            if piv != c {
                for k in 0..2 * m {
                    aug.swap(piv * 2 * m + k, c * 2 * m + k);
                }
            }
            let p = aug[c * 2 * m + c];
            for k in 0..2 * m {
                aug[c * 2 * m + k] /= p;
            }
            for r in 0..m {
                if r != c {
                    let f = aug[r * 2 * m + c];
                    if f != 0.0 {
                        for k in 0..2 * m {
                            aug[r * 2 * m + k] -= f * aug[c * 2 * m + k];
                        }
                    }
                }
            }
        }
        for r in 0..m {
            for c in 0..m {
                self.binv[r * m + c] = aug[r * 2 * m + m + c];
            }
        }
        for r in 0..m {
            self.xb[r] = (0..m).map(|c| self.binv[r * m + c] * self.b[c]).sum();
        }
        self.since_reinvert = 0;
    }

    /// Runs simplex iterations for `cost`; columns failing `allowed` never enter.
    /// Returns `false` when an improving ray was found (unbounded).
    fn optimise(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<bool> {
        let tol = self.opts.tolerance;
        let mut degenerate = 0usize;
        let mut in_basis = vec![false; self.n + self.m];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        loop {
            if self.pivots >= self.opts.lp_max_pivots {
                return Err(Error::IterationLimit { solver: "simplex", limit: self.opts.lp_max_pivots });
            }
            let y = self.duals(cost);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering = None;
            let mut best = -tol;
            for j in 0..self.n + self.m {
                if in_basis[j] || !allowed(j) {
                    continue;
                }
                let d = self.reduced_cost(cost, &y, j);
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(j) = entering else { return Ok(true) };
            let u = self.ftran(j);
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for r in 0..self.m {
                if u[r] > PIVOT_TOL {
                    let t = self.xb[r].max(0.0) / u[r];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if t < ratio - 1e-12 {
                                true
                            } else if t <= ratio + 1e-12 {
                                if bland {
                                    self.basis[r] < self.basis[l]
                                } else {
                                    u[r] > u[l]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(r);
                        ratio = ratio.min(t);
                    }
                }
            }
            let Some(r) = leave else { return Ok(false) };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            in_basis[self.basis[r]] = false;
            in_basis[j] = true;
            self.pivot(r, j, &u);
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.xb[r].max(0.0);
            }
        }
        x
    }

    /// Pivots zero-level artificials out of the basis where possible.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let m = self.m;
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.basis.contains(&j) {
                    continue;
                }
                let v: f64 = row.iter().zip(&self.a).map(|(bi, ai)| bi * ai[j]).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let u = self.ftran(j);
                self.xb[r] = 0.0;
                self.pivot(r, j, &u);
            } else {
                self.xb[r] = 0.0;
            }
        }
    }
}

/// Solves `min c.x s.t. A x = b, x >= 0`.
pub fn solve_lp(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution> {
    lp.validate()?;
    let mut s = Simplex::new(lp, opts);
    let n = s.n;
    let m = s.m;
    if m == 0 {
        // only nonnegativity: optimal at 0 unless some cost is negative
        if lp.objective.iter().any(|&c| c < 0.0) {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                value: f64::NEG_INFINITY,
                primal: vec![0.0; n],
                duals: vec![],
                basis: vec![],
                pivots: 0,
            });
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            value: 0.0,
            primal: vec![0.0; n],
            duals: vec![],
            basis: vec![],
            pivots: 0,
        });
    }

    let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    s.optimise(&phase1, &|_| true)?;
    s.reinvert();
    let infeas: f64 = s
        .basis
        .iter()
        .zip(&s.xb)
        .filter(|(j, _)| **j >= n)
        .map(|(_, v)| v.max(0.0))
        .sum();
    let bscale = 1.0 + s.b.iter().map(|v| v.abs()).sum::<f64>();
    if infeas > FEAS_TOL * bscale {
        let y = s.duals(&phase1);
        let cert: Vec<f64> = y.iter().zip(&s.sign).map(|(v, sg)| v * sg).collect();
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::INFINITY,
            primal: s.primal(),
            duals: cert,
            basis: s.basis.clone(),
            pivots: s.pivots,
        });
    }
    s.expel_artificials();

    let mut cost = lp.objective.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    let bounded = s.optimise(&cost, &|j| j < n)?;
    s.reinvert();
    let primal = s.primal();
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NEG_INFINITY,
            primal,
            duals: vec![0.0; m],
            basis: s.basis.clone(),
            pivots: s.pivots,
        });
    }
    let y = s.duals(&cost);
    let duals: Vec<f64> = y.iter().zip(&s.sign).map(|(v, sg)| v * sg).collect();
    let value = primal.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
    Ok(LpSolution { status: LpStatus::Optimal, value, primal, duals, basis: s.basis.clone(), pivots: s.pivots })
}

/// Indices of a maximal linearly independent subset of `rows`, plus a flag
/// telling whether the dropped rows are consistent with their right-hand sides.
pub(crate) fn independent_rows(rows: &[Vec<f64>], rhs: &[f64]) -> (Vec<usize>, bool) {
    // modified Gram-Schmidt on the coefficient rows
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    let mut consistent = true;
    for (i, r) in rows.iter().enumerate() {
        let mut v = r.clone();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for q in &basis {
            let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * norm0.max(1.0) {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            keep.push(i);
        }
    }
    // consistency: dropped rows must satisfy the kept equations' combination
    if keep.len() < rows.len() {
        let sub: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();
        let subb: Vec<f64> = keep.iter().map(|&i| rhs[i]).collect();
        for (i, r) in rows.iter().enumerate() {
            if keep.contains(&i) {
                continue;
            }
            if let Some(coef) = least_squares_combination(&sub, r) {
                let predicted: f64 = coef.iter().zip(&subb).map(|(c, b)| c * b).sum();
                if (predicted - rhs[i]).abs() > 1e-8 * (1.0 + rhs[i].abs()) {
                    consistent = false;
                }
            }
        }
    }
    (keep, consistent)
}

/// Coefficients `c` with `sum_k c_k sub_k = target` via the normal equations.
fn least_squares_combination(sub: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let k = sub.len();
    let mut g = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = sub[i].iter().zip(&sub[j]).map(|(a, b)| a * b).sum();
        }
        g[i][k] = sub[i].iter().zip(target).map(|(a, b)| a * b).sum();
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&x, &y| g[x][c].abs().total_cmp(&g[y][c].abs()))?;
        if g[piv][c].abs() < 1e-14 {
            return None;
        }
        g.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = g[r][c] / g[c][c];
                for cc in c..=k {
                    g[r][cc] -= f * g[c][cc];
                }
            }
        }
    }
    Some((0..k).map(|i| g[i][k] / g[i][i]).collect())
}
