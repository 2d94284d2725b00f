//! Exotic payoffs evaluated on lattice paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::PathLattice;

/// Payoff `Psi` of the claim. Dates are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// One value per path in lexicographic order.
    Table { values: Vec<f64> },
    Constant { value: f64 },
    /// `|S_N - s0|`.
    Forward,
    /// `|S_j - S_i|`.
    Straddle { i: usize, j: usize },
    /// `(mean_i S_i - K)^+`.
    AsianCall { strike: f64 },
    /// `g(S_i)` with `g` linear between `knots` and flat outside them.
    Vanilla { maturity: usize, knots: Vec<(f64, f64)> },
    /// `max_i S_i - S_N`.
    Lookback,
}

/// Piecewise-linear interpolation through sorted knots, flat outside.
pub fn piecewise_linear(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let k = knots.partition_point(|p| p.0 <= x);
    let (x0, y0) = knots[k - 1];
    let (x1, y1) = knots[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl Payoff {
    fn check_date(t: usize, n: usize) -> Result<()> {
        if t == 0 || t > n {
            return Err(Error::Parse(format!("date {t} outside 1..={n}")));
        }
        Ok(())
    }

    pub fn validate(&self, lattice: &PathLattice) -> Result<()> {
        let n = lattice.horizon();
        match self {
            Payoff::Table { values } => {
                if values.len() != lattice.n_paths() {
                    return Err(Error::Parse(format!(
                        "payoff table has {} entries for {} paths",
                        values.len(),
                        lattice.n_paths()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse("payoff table entries must be finite".into()));
                }
            }
            Payoff::Constant { value } if !value.is_finite() => {
                return Err(Error::Parse("constant payoff must be finite".into()));
            }
            Payoff::Straddle { i, j } => {
                Self::check_date(*i, n)?;
                Self::check_date(*j, n)?;
            }
            Payoff::AsianCall { strike } if !strike.is_finite() => {
                return Err(Error::Parse("strike must be finite".into()));
            }
            Payoff::Vanilla { maturity, knots } => {
                Self::check_date(*maturity, n)?;
                if knots.is_empty() || knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                    return Err(Error::Parse("vanilla payoff needs finite knots".into()));
                }
                if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Parse("vanilla knots must have strictly increasing abscissae".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `Psi` on every path of the lattice.
    pub fn values(&self, lattice: &PathLattice) -> Result<Vec<f64>> {
        self.validate(lattice)?;
        let n = lattice.horizon();
        let s0 = lattice.s0();
        Ok(match self {
            Payoff::Table { values } => values.clone(),
            Payoff::Constant { value } => vec![*value; lattice.n_paths()],
            Payoff::Forward => lattice.paths().map(|x| (x[n - 1] - s0).abs()).collect(),
            Payoff::Straddle { i, j } => lattice.paths().map(|x| (x[j - 1] - x[i - 1]).abs()).collect(),
            Payoff::AsianCall { strike } => {
                lattice.paths().map(|x| (x.iter().sum::<f64>() / n as f64 - strike).max(0.0)).collect()
            }
            Payoff::Vanilla { maturity, knots } => {
                lattice.paths().map(|x| piecewise_linear(knots, x[maturity - 1])).collect()
            }
            Payoff::Lookback => {
                lattice.paths().map(|x| x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x[n - 1]).collect()
            }
        })
    }
}
