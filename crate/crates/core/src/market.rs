//! Calibration inputs: support grids, discrete marginals, call-quote
//! ingestion and the convex-order (Strassen) feasibility test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total-mass tolerance for a probability mass function.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance on `mean(mu_i) == s0` in the Strassen test.
pub const MEAN_TOL: f64 = 1e-9;
/// Slack allowed when comparing call functions of consecutive marginals.
pub const ORDER_SLACK: f64 = 1e-10;
/// Tolerance on the mean implied by a call curve.
pub const QUOTE_MEAN_TOL: f64 = 1e-8;
/// Slack on discrete second differences of a call curve.
pub const CONVEXITY_SLACK: f64 = 1e-10;

/// Strictly increasing, finite support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(x) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite point {x}")));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "points not strictly increasing at {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of `x` on the grid, if it is one of the points.
    pub fn position(&self, x: f64) -> Option<usize> {
        self.points.iter().position(|&p| p == x)
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = Error;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        Grid::new(points)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.points
    }
}

/// A probability mass function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    grid: Grid,
    pmf: Vec<f64>,
}

impl Marginal {
    pub fn new(grid: Grid, pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() != grid.len() {
            return Err(Error::InvalidMarginal(format!(
                "pmf has {} entries for {} grid points",
                pmf.len(),
                grid.len()
            )));
        }
        if let Some(p) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidMarginal(format!("invalid mass {p}")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMarginal(format!("total mass {total} != 1")));
        }
        Ok(Self { grid, pmf })
    }

    /// Builds a marginal from nonnegative weights, rescaling them to mass one.
    pub fn normalized(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMarginal(format!("cannot normalise mass {total}")));
        }
        let pmf = weights.into_iter().map(|w| w / total).collect();
        Self::new(grid, pmf)
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(Grid::new(vec![x])?, vec![1.0])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.expectation_of(|x| x)
    }

    pub fn expectation_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .points()
            .iter()
            .zip(&self.pmf)
            .map(|(&x, &p)| p * f(x))
            .sum()
    }

    /// Expectation of a function given by its values on the grid.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.pmf).map(|(v, p)| v * p).sum()
    }

    /// `E[(X - k)^+]`.
    pub fn call(&self, k: f64) -> f64 {
        self.expectation_of(|x| (x - k).max(0.0))
    }
}

/// Spot plus the marginals `mu_1 .. mu_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSystem {
    s0: f64,
    marginals: Vec<Marginal>,
}

impl MarginalSystem {
    pub fn new(s0: f64, marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidMarginal("at least one maturity is required".into()));
        }
        if !s0.is_finite() {
            return Err(Error::InvalidMarginal(format!("spot {s0} is not finite")));
        }
        Ok(Self { s0, marginals })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn horizon(&self) -> usize {
        self.marginals.len()
    }

    /// Marginal of maturity `i` (1-based).
    pub fn marginal(&self, i: usize) -> &Marginal {
        &self.marginals[i - 1]
    }
}

/// Call prices for one maturity on a strike ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct CallQuoteCurve {
    pub maturity_index: usize,
    strikes: Vec<f64>,
    prices: Vec<f64>,
}

impl CallQuoteCurve {
    pub fn new(maturity_index: usize, strikes: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        Grid::new(strikes.clone())?;
        if prices.len() != strikes.len() {
            return Err(Error::InvalidMarginal(format!(
                "{} prices for {} strikes",
                prices.len(),
                strikes.len()
            )));
        }
        let scale = 1.0 + prices.iter().fold(0.0_f64, |a, p| a.max(p.abs()));
        for (k, p) in strikes.iter().zip(&prices) {
            if !p.is_finite() || *p < -CONVEXITY_SLACK * scale {
                return Err(Error::NonConvexQuotes(format!("negative call price {p} at strike {k}")));
            }
        }
        for i in 1..prices.len() {
            if prices[i] > prices[i - 1] + CONVEXITY_SLACK * scale {
                return Err(Error::NonConvexQuotes(format!(
                    "call price increases between strikes {} and {}",
                    strikes[i - 1],
                    strikes[i]
                )));
            }
        }
        for i in 1..prices.len().saturating_sub(1) {
            let left = (prices[i] - prices[i - 1]) / (strikes[i] - strikes[i - 1]);
            let right = (prices[i + 1] - prices[i]) / (strikes[i + 1] - strikes[i]);
            if right - left < -CONVEXITY_SLACK * scale {
                return Err(Error::NonConvexQuotes(format!(
                    "call curve is concave at strike {}",
                    strikes[i]
                )));
            }
        }
        Ok(Self { maturity_index, strikes, prices })
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

/// Inverts `sum_j p_j (K_j - K_i)^+ = price_i` on the strike grid.
///
/// The system is triangular: the masses above the first strike follow by
/// back substitution and the first strike absorbs the remaining mass.
pub fn marginal_from_call_quotes(curve: &CallQuoteCurve, s0: f64) -> Result<Marginal> {
    let k = curve.strikes();
    let c = curve.prices();
    let n = k.len();
    if n < 2 {
        return Err(Error::InsufficientQuotes(
            "a single strike carries no curvature information".into(),
        ));
    }
    let scale = 1.0 + c.iter().fold(0.0_f64, |a, p| a.max(p.abs()));
    if c[n - 1].abs() > CONVEXITY_SLACK * scale {
        return Err(Error::NonConvexQuotes(format!(
            "price {} at the top strike implies mass beyond the quoted grid",
            c[n - 1]
        )));
    }
    let mut p = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let tail: f64 = (i + 2..n).map(|j| p[j] * (k[j] - k[i])).sum();
        p[i + 1] = (c[i] - tail) / (k[i + 1] - k[i]);
    }
    p[0] = 1.0 - p[1..].iter().sum::<f64>();
    if let Some((j, v)) = p.iter().enumerate().find(|(_, v)| **v < -1e-12) {
        return Err(Error::NonConvexQuotes(format!(
            "implied mass {v} at strike {} is negative",
            k[j]
        )));
    }
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    let m = Marginal::normalized(Grid::new(k.to_vec())?, p)?;
    let implied = m.mean();
    if (implied - s0).abs() > QUOTE_MEAN_TOL {
        return Err(Error::MeanMismatch { implied, s0 });
    }
    Ok(m)
}

/// `k -> E_m[(X - k)^+]`.
pub fn call_function(m: &Marginal, k: f64) -> f64 {
    m.call(k)
}

/// First reason a marginal system admits no martingale coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum StrassenViolation {
    /// Maturity `maturity` (1-based) has a mean different from the spot.
    MeanMismatch { maturity: usize, mean: f64, s0: f64 },
    /// Call function of `maturity + 1` lies below that of `maturity` at `strike`.
    ConvexOrder { maturity: usize, strike: f64, earlier: f64, later: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StrassenVerdict {
    Feasible,
    Infeasible(StrassenViolation),
}

impl StrassenVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, StrassenVerdict::Feasible)
    }
}

/// Equal means and increasing convex order, checked at every kink of the
/// two piecewise-linear call functions.
pub fn check_strassen(sys: &MarginalSystem) -> StrassenVerdict {
    for (i, m) in sys.marginals().iter().enumerate() {
        let mean = m.mean();
        if (mean - sys.s0()).abs() > MEAN_TOL {
            return StrassenVerdict::Infeasible(StrassenViolation::MeanMismatch {
                maturity: i + 1,
                mean,
                s0: sys.s0(),
            });
        }
    }
    for (i, pair) in sys.marginals().windows(2).enumerate() {
        let mut kinks: Vec<f64> = pair[0]
            .grid()
            .points()
            .iter()
            .chain(pair[1].grid().points())
            .copied()
            .collect();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        for k in kinks {
            let earlier = pair[0].call(k);
            let later = pair[1].call(k);
            if later < earlier - ORDER_SLACK {
                return StrassenVerdict::Infeasible(StrassenViolation::ConvexOrder {
                    maturity: i + 1,
                    strike: k,
                    earlier,
                    later,
                });
            }
        }
    }
    StrassenVerdict::Feasible
}
