//! Semistatic positions: dynamic trading and static vanilla portfolios.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Grid, MarginalSystem};
use crate::polytope::{prefix_nodes, PathLattice, PrefixNode};

/// Values `f_i` on each maturity grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticPosition {
    pub values: Vec<Vec<f64>>,
}

impl StaticPosition {
    pub fn zero(grids: &[Grid]) -> Self {
        Self { values: grids.iter().map(|g| vec![0.0; g.len()]).collect() }
    }

    pub fn check(&self, grids: &[Grid]) -> Result<()> {
        if self.values.len() != grids.len()
            || self.values.iter().zip(grids).any(|(v, g)| v.len() != g.len())
        {
            return Err(Error::LatticeMismatch);
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("static position must be finite".into()));
        }
        Ok(())
    }
}

/// Holdings `h` per prefix node, in [`prefix_nodes`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicStrategy {
    pub nodes: Vec<PrefixNode>,
    pub values: Vec<f64>,
}

impl DynamicStrategy {
    pub fn zero(lattice: &PathLattice) -> Self {
        Self::from_values(lattice, vec![0.0; lattice.n_nodes()]).expect("matching length")
    }

    pub fn from_values(lattice: &PathLattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.n_nodes() {
            return Err(Error::LatticeMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("dynamic strategy must be finite".into()));
        }
        Ok(Self { nodes: prefix_nodes(lattice), values })
    }
}

/// `(H . S)_N` on lattice path `j`, with `x_0 = s0`.
pub fn gain_dynamic(h: &DynamicStrategy, lattice: &PathLattice, j: usize) -> f64 {
    let x = lattice.path(j);
    let mut prev = lattice.s0();
    let mut total = 0.0;
    for (t, &xt) in x.iter().enumerate() {
        total += h.values[lattice.node_of(j, t + 1)] * (xt - prev);
        prev = xt;
    }
    total
}

/// `sum_i f_i(x_i) - mu_i(f_i)` for a path given by its coordinates.
pub fn gain_static(f: &StaticPosition, sys: &MarginalSystem, path: &[f64]) -> Result<f64> {
    let grids: Vec<Grid> = sys.marginals().iter().map(|m| m.grid().clone()).collect();
    f.check(&grids)?;
    if path.len() != sys.horizon() {
        return Err(Error::LatticeMismatch);
    }
    let mut total = 0.0;
    for ((fi, m), &x) in f.values.iter().zip(sys.marginals()).zip(path) {
        let k = m.grid().position(x).ok_or(Error::LatticeMismatch)?;
        total += fi[k] - m.expectation(fi);
    }
    Ok(total)
}

/// A static leg written as `constant + sum_k a_k (x - K_k)^+`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CallSpan {
    pub constant: f64,
    pub strikes: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl CallSpan {
    pub fn eval(&self, x: f64) -> f64 {
        self.constant + self.strikes.iter().zip(&self.coefficients).map(|(k, a)| a * (x - k).max(0.0)).sum::<f64>()
    }
}

/// Call decomposition of every `f_i`, with strikes at all grid points but
/// the last (whose call vanishes on the grid), plus the reconstruction.
pub fn call_span_restrict(f: &StaticPosition, grids: &[Grid]) -> Result<(StaticPosition, Vec<CallSpan>)> {
    f.check(grids)?;
    let mut spans = Vec::with_capacity(grids.len());
    for (v, g) in f.values.iter().zip(grids) {
        let y = g.points();
        let n = y.len();
        let slopes: Vec<f64> = (0..n.saturating_sub(1)).map(|k| (v[k + 1] - v[k]) / (y[k + 1] - y[k])).collect();
        let coefficients: Vec<f64> =
            slopes.iter().enumerate().map(|(k, s)| if k == 0 { *s } else { s - slopes[k - 1] }).collect();
        spans.push(CallSpan { constant: v[0], strikes: y[..n - 1].to_vec(), coefficients });
    }
    let values = spans.iter().zip(grids).map(|(s, g)| g.points().iter().map(|&x| s.eval(x)).collect()).collect();
    Ok((StaticPosition { values }, spans))
}

/// Parametrisation of the static legs used by the primal solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticBasis {
    /// One free value per grid point.
    Grid,
    /// Cash plus calls struck at grid points.
    Calls,
}

impl StaticBasis {
    /// Basis functions evaluated on `grid`, one column per parameter.
    pub(crate) fn columns(&self, grid: &Grid) -> Vec<Vec<f64>> {
        let y = grid.points();
        match self {
            StaticBasis::Grid => (0..y.len()).map(|p| (0..y.len()).map(|l| f64::from(u8::from(l == p))).collect()).collect(),
            StaticBasis::Calls => {
                let mut cols = vec![vec![1.0; y.len()]];
                for &k in &y[..y.len() - 1] {
                    cols.push(y.iter().map(|&x| (x - k).max(0.0)).collect());
                }
                cols
            }
        }
    }
}

/// Linear map from decision vectors `(h, statics)` to path gains.
#[derive(Debug, Clone)]
pub(crate) struct GainMatrix {
    pub n_nodes: usize,
    /// Per maturity: basis columns on its grid.
    pub columns: Vec<Vec<Vec<f64>>>,
    /// Row `j` is the gradient of the total gain on path `j`.
    pub rows: Vec<Vec<f64>>,
}

impl GainMatrix {
    pub fn new(lattice: &PathLattice, sys: &MarginalSystem, basis: StaticBasis) -> Self {
        let n_nodes = lattice.n_nodes();
        let columns: Vec<Vec<Vec<f64>>> = sys.marginals().iter().map(|m| basis.columns(m.grid())).collect();
        let dim = n_nodes + columns.iter().map(Vec::len).sum::<usize>();
        let centred: Vec<Vec<Vec<f64>>> = columns
            .iter()
            .zip(sys.marginals())
            .map(|(cols, m)| {
                cols.iter()
                    .map(|c| {
                        let mean = m.expectation(c);
                        c.iter().map(|v| v - mean).collect()
                    })
                    .collect()
            })
            .collect();
        let rows = (0..lattice.n_paths())
            .map(|j| {
                let mut row = vec![0.0; dim];
                let x = lattice.path(j);
                let mut prev = lattice.s0();
                for (t, &xt) in x.iter().enumerate() {
                    row[lattice.node_of(j, t + 1)] += xt - prev;
                    prev = xt;
                }
                let mut offset = n_nodes;
                for (i, cols) in centred.iter().enumerate() {
                    let k = lattice.grid_index(j, i + 1);
                    for (p, c) in cols.iter().enumerate() {
                        row[offset + p] = c[k];
                    }
                    offset += cols.len();
                }
                row
            })
            .collect();
        Self { n_nodes, columns, rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Splits a decision vector into its strategy and static legs.
    pub fn decode(&self, lattice: &PathLattice, theta: &[f64]) -> Result<(DynamicStrategy, StaticPosition)> {
        let h = DynamicStrategy::from_values(lattice, theta[..self.n_nodes].to_vec())?;
        let mut offset = self.n_nodes;
        let mut values = Vec::with_capacity(self.columns.len());
        for cols in &self.columns {
            let n = cols[0].len();
            let mut f = vec![0.0; n];
            for (p, c) in cols.iter().enumerate() {
                for (fl, cl) in f.iter_mut().zip(c) {
                    *fl += theta[offset + p] * cl;
                }
            }
            offset += cols.len();
            values.push(f);
        }
        Ok((h, StaticPosition { values }))
    }
}
