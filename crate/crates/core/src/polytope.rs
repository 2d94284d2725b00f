//! Path lattice, calibrated martingale polytope and its feasibility LP.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Grid, MarginalSystem, MASS_TOL};
use crate::optimize::{solve_lp, ActiveSet, LinearOracle, LinearProgram, LpOracle, LpStatus, SolveOptions};

/// Default cap on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Cap on dense constraint-matrix entries (rows times paths).
pub const DENSE_ENTRY_CAP: usize = 50_000_000;

/// All paths `(x_1..x_N)` with `x_i` on grid `i`, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLattice {
    grids: Vec<Grid>,
    s0: f64,
    sizes: Vec<usize>,
    /// `blocks[t]` = number of paths sharing a prefix of length `t`.
    blocks: Vec<usize>,
    values: Vec<f64>,
}

impl PathLattice {
    pub fn new(grids: Vec<Grid>, s0: f64, cap: usize) -> Result<Self> {
        if grids.is_empty() {
            return Err(Error::InvalidGrid("a lattice needs at least one date".into()));
        }
        let sizes: Vec<usize> = grids.iter().map(Grid::len).collect();
        let mut count: usize = 1;
        for &s in &sizes {
            count = count.checked_mul(s).filter(|c| *c <= cap).ok_or(Error::SizeLimit {
                paths: sizes.iter().fold(1usize, |a, b| a.saturating_mul(*b)),
                cap,
            })?;
        }
        let n = grids.len();
        let mut blocks = vec![1; n + 1];
        for t in (0..n).rev() {
            blocks[t] = blocks[t + 1] * sizes[t];
        }
        let mut values = Vec::with_capacity(count * n);
        for j in 0..count {
            for t in 0..n {
                values.push(grids[t].points()[(j / blocks[t + 1]) % sizes[t]]);
            }
        }
        Ok(Self { grids, s0, sizes, blocks, values })
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn horizon(&self) -> usize {
        self.grids.len()
    }

    pub fn n_paths(&self) -> usize {
        self.blocks[0]
    }

    /// Coordinates of path `j`.
    pub fn path(&self, j: usize) -> &[f64] {
        let n = self.horizon();
        &self.values[j * n..(j + 1) * n]
    }

    /// Grid index of coordinate `t` (1-based date) on path `j`.
    pub fn grid_index(&self, j: usize, t: usize) -> usize {
        (j / self.blocks[t]) % self.sizes[t - 1]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.horizon())
    }

    /// Number of prefix nodes at date `t` (1-based).
    pub fn nodes_at(&self, t: usize) -> usize {
        self.blocks[0] / self.blocks[t - 1]
    }

    pub fn n_nodes(&self) -> usize {
        (1..=self.horizon()).map(|t| self.nodes_at(t)).sum()
    }

    /// Global index (in `prefix_nodes` order) of the date-`t` node on path `j`.
    pub fn node_of(&self, j: usize, t: usize) -> usize {
        let offset: usize = (1..t).map(|s| self.nodes_at(s)).sum();
        offset + j / self.blocks[t - 1]
    }
}

pub fn build_lattice(sys: &MarginalSystem, cap: usize) -> Result<PathLattice> {
    PathLattice::new(sys.marginals().iter().map(|m| m.grid().clone()).collect(), sys.s0(), cap)
}

/// A nonnegative measure on the paths of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMeasure {
    lattice: Arc<PathLattice>,
    weights: Vec<f64>,
}

impl PathMeasure {
    pub fn new(lattice: Arc<PathLattice>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != lattice.n_paths() {
            return Err(Error::LatticeMismatch);
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidMarginal(format!("path weight {w} is not a finite nonnegative number")));
        }
        Ok(Self { lattice, weights })
    }

    /// Uniform probability on all paths.
    pub fn uniform(lattice: Arc<PathLattice>) -> Self {
        let n = lattice.n_paths();
        Self { lattice, weights: vec![1.0 / n as f64; n] }
    }

    pub fn lattice(&self) -> &Arc<PathLattice> {
        &self.lattice
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= MASS_TOL
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| if *w == 0.0 { 0.0 } else { w * v }).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.lattice.clone(), self.weights.iter().map(|w| w * factor).collect())
    }

    /// Law of coordinate `t` (1-based) as weights on grid `t`.
    pub fn pushforward(&self, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.lattice.grids[t - 1].len()];
        for (j, w) in self.weights.iter().enumerate() {
            out[self.lattice.grid_index(j, t)] += w;
        }
        out
    }

    pub fn same_lattice(&self, other: &PathMeasure) -> bool {
        Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice == other.lattice
    }
}

/// A date together with the history observed before it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixNode {
    pub t: usize,
    pub history: Vec<f64>,
}

pub fn prefix_nodes(lattice: &PathLattice) -> Vec<PrefixNode> {
    let mut out = Vec::with_capacity(lattice.n_nodes());
    for t in 1..=lattice.horizon() {
        let block = lattice.blocks[t - 1];
        for k in 0..lattice.nodes_at(t) {
            out.push(PrefixNode { t, history: lattice.path(k * block)[..t - 1].to_vec() });
        }
    }
    out
}

/// Equality description of the calibrated martingale measures on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePolytope {
    lattice: Arc<PathLattice>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    marginal_rows: usize,
}

impl MartingalePolytope {
    pub fn lattice(&self) -> &Arc<PathLattice> {
        &self.lattice
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn n_marginal_rows(&self) -> usize {
        self.marginal_rows
    }

    pub fn n_martingale_rows(&self) -> usize {
        self.rows.len() - self.marginal_rows
    }

    pub fn n_paths(&self) -> usize {
        self.lattice.n_paths()
    }

    /// `min objective.q` over the polytope.
    pub fn program(&self, objective: Vec<f64>) -> Result<LinearProgram> {
        LinearProgram::new(objective, self.rows.clone(), self.rhs.clone())
    }

    /// Largest absolute row residual of `weights`.
    pub fn residual(&self, weights: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| (r.iter().zip(weights).map(|(a, q)| a * q).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn build_polytope(sys: &MarginalSystem, cap: usize) -> Result<MartingalePolytope> {
    let lattice = Arc::new(build_lattice(sys, cap)?);
    polytope_on(lattice, sys)
}

/// Builds the polytope on an existing lattice whose grids match `sys`.
pub fn polytope_on(lattice: Arc<PathLattice>, sys: &MarginalSystem) -> Result<MartingalePolytope> {
    let n = lattice.n_paths();
    let horizon = lattice.horizon();
    if sys.horizon() != horizon || sys.marginals().iter().zip(lattice.grids()).any(|(m, g)| m.grid() != g) {
        return Err(Error::LatticeMismatch);
    }
    let marginal_rows: usize = lattice.grids().iter().map(Grid::len).sum();
    let total_rows = marginal_rows + lattice.n_nodes();
    if total_rows.saturating_mul(n) > DENSE_ENTRY_CAP {
        return Err(Error::SizeLimit { paths: n, cap: DENSE_ENTRY_CAP / total_rows.max(1) });
    }
    let mut rows = Vec::with_capacity(total_rows);
    let mut rhs = Vec::with_capacity(total_rows);
    for t in 1..=horizon {
        let m = sys.marginal(t);
        for (g, p) in m.pmf().iter().enumerate() {
            rows.push((0..n).map(|j| if lattice.grid_index(j, t) == g { 1.0 } else { 0.0 }).collect());
            rhs.push(*p);
        }
    }
    for t in 1..=horizon {
        let first = rows.len();
        rows.extend((0..lattice.nodes_at(t)).map(|_| vec![0.0; n]));
        rhs.extend(std::iter::repeat_n(0.0, lattice.nodes_at(t)));
        for j in 0..n {
            let x = lattice.path(j);
            let prev = if t == 1 { lattice.s0() } else { x[t - 2] };
            rows[first + j / lattice.blocks[t - 1]][j] = x[t - 1] - prev;
        }
    }
    Ok(MartingalePolytope { lattice, rows, rhs, marginal_rows })
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolytopeVerdict {
    Feasible { witness: PathMeasure },
    /// `y` with `A^T y <= 0` and `b.y > 0`.
    Infeasible { certificate: Vec<f64> },
}

impl PolytopeVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, PolytopeVerdict::Feasible { .. })
    }
}

pub fn feasibility(poly: &MartingalePolytope, opts: &SolveOptions) -> Result<PolytopeVerdict> {
    let sol = solve_lp(&poly.program(vec![0.0; poly.n_paths()])?, opts)?;
    match sol.status {
        LpStatus::Optimal => {
            let w: Vec<f64> = sol.primal.iter().map(|v| v.max(0.0)).collect();
            Ok(PolytopeVerdict::Feasible { witness: PathMeasure::new(poly.lattice.clone(), w)? })
        }
        LpStatus::Infeasible => Ok(PolytopeVerdict::Infeasible { certificate: sol.duals }),
        LpStatus::Unbounded => Err(Error::Numerical("feasibility program reported unbounded".into())),
    }
}

/// Linear minimisation over the face of the polytope where only `columns`
/// may carry mass. Vertices are returned in full path coordinates.
#[derive(Debug, Clone)]
pub struct FaceOracle {
    n_paths: usize,
    columns: Vec<usize>,
    inner: LpOracle,
}

impl FaceOracle {
    pub fn new(poly: &MartingalePolytope, columns: Vec<usize>, opts: &SolveOptions) -> Self {
        let rows = poly.rows.iter().map(|r| columns.iter().map(|&j| r[j]).collect()).collect();
        Self { n_paths: poly.n_paths(), columns, inner: LpOracle::new(rows, poly.rhs.clone(), opts) }
    }

    pub fn full(poly: &MartingalePolytope, opts: &SolveOptions) -> Self {
        Self::new(poly, (0..poly.n_paths()).collect(), opts)
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    fn lift(&self, v: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_paths];
        for (k, &j) in self.columns.iter().enumerate() {
            x[j] = v[k];
        }
        x
    }

    /// A relative-interior starting point of the face.
    pub fn interior_start(&self) -> Result<ActiveSet> {
        let inner = self.inner.interior_start()?;
        Ok(ActiveSet { vertices: inner.vertices.iter().map(|v| self.lift(v)).collect(), weights: inner.weights })
    }
}

impl LinearOracle for FaceOracle {
    fn dim(&self) -> usize {
        self.n_paths
    }

    fn minimize(&self, direction: &[f64]) -> Result<Vec<f64>> {
        let restricted: Vec<f64> = self.columns.iter().map(|&j| direction[j]).collect();
        Ok(self.lift(&self.inner.minimize(&restricted)?))
    }
}
