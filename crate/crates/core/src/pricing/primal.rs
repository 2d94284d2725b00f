//! The primal side: robust utility maximisation over semistatic positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dual::PricingContext;
use super::strategy::{DynamicStrategy, GainMatrix, StaticBasis, StaticPosition};
use crate::divergence::UtilitySpec;
use crate::error::{Error, Result};
use crate::optimize::{maximize_min, ConcaveFamily, ConcavePiece, BETA_SCHEDULE};

/// `theta -> E_{P_k}[U(x + gain(theta) - Psi)]`, one piece per prior.
struct PrimalFamily<'a> {
    gains: &'a GainMatrix,
    priors: Vec<&'a [f64]>,
    psi: &'a [f64],
    x: f64,
    utility: UtilitySpec,
}

impl PrimalFamily<'_> {
    fn wealth(&self, theta: &[f64]) -> Vec<f64> {
        self.gains
            .rows
            .iter()
            .zip(self.psi)
            .map(|(row, p)| self.x + row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - p)
            .collect()
    }
}

impl ConcaveFamily for PrimalFamily<'_> {
    fn dim(&self) -> usize {
        self.gains.dim()
    }

    fn pieces(&self, theta: &[f64]) -> Vec<ConcavePiece> {
        let n = self.dim();
        let z = self.wealth(theta);
        let u: Vec<(f64, f64, f64)> =
            z.iter().map(|&v| (self.utility.u(v), self.utility.u_prime(v), self.utility.u_second(v))).collect();
        self.priors
            .iter()
            .map(|p| {
                let mut piece = ConcavePiece { value: 0.0, gradient: vec![0.0; n], hessian: vec![0.0; n * n] };
                for (j, &pj) in p.iter().enumerate() {
                    if pj == 0.0 {
                        continue;
                    }
                    let (uj, dj, sj) = u[j];
                    let row = &self.gains.rows[j];
                    piece.value += pj * uj;
                    for (a, g) in row.iter().zip(piece.gradient.iter_mut()) {
                        *g += pj * dj * a;
                    }
                    for (r, ar) in row.iter().enumerate() {
                        if *ar == 0.0 {
                            continue;
                        }
                        let w = pj * sj * ar;
                        for (c, ac) in row.iter().enumerate() {
                            piece.hessian[r * n + c] += w * ac;
                        }
                    }
                }
                piece
            })
            .collect()
    }

    fn values(&self, theta: &[f64]) -> Vec<f64> {
        let z = self.wealth(theta);
        let u: Vec<f64> = z.iter().map(|&v| self.utility.u(v)).collect();
        self.priors.iter().map(|p| p.iter().zip(&u).filter(|(pj, _)| **pj != 0.0).map(|(pj, uj)| pj * uj).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalSolution {
    pub basis: StaticBasis,
    /// `min_k E_{P_k}[U(x + H.S_N + Gamma_f - Psi)]` at the returned position.
    pub value: f64,
    pub strategy: DynamicStrategy,
    pub statics: StaticPosition,
    pub newton_steps: usize,
    pub residual: f64,
}

const RANDOM_STARTS: usize = 2;

/// Maximises the worst prior's expected utility over `(H, f)`; extra
/// starts are drawn from a generator seeded by the solver options.
pub fn primal_value_in(ctx: &PricingContext<'_>, x: f64, psi: &[f64], basis: StaticBasis) -> Result<PrimalSolution> {
    let lattice = ctx.poly.lattice();
    if psi.len() != lattice.n_paths() {
        return Err(Error::LatticeMismatch);
    }
    let gains = GainMatrix::new(lattice, ctx.sys, basis);
    let family = PrimalFamily {
        gains: &gains,
        priors: ctx.amb.priors().iter().map(|p| p.weights()).collect(),
        psi,
        x,
        utility: ctx.utility,
    };
    let dim = family.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.opts.seed);
    let mut starts = vec![vec![0.0; dim]];
    for _ in 0..RANDOM_STARTS {
        starts.push((0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect());
    }
    let r = maximize_min(&family, &starts, &BETA_SCHEDULE);
    if !r.value.is_finite() {
        return Err(Error::Numerical("primal value is not finite".into()));
    }
    let (strategy, statics) = gains.decode(lattice, &r.theta)?;
    Ok(PrimalSolution { basis, value: r.value, strategy, statics, newton_steps: r.newton_steps, residual: r.residual })
}

pub fn primal_value(ctx: &PricingContext<'_>, x: f64, psi: &[f64]) -> Result<PrimalSolution> {
    primal_value_in(ctx, x, psi, StaticBasis::Grid)
}
