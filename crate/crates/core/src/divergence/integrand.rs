//! Convex integrands `phi`, their conjugates, and the shifted variants
//! `phi_B(omega, x) = phi(x + B(omega))`.

use serde::{Deserialize, Serialize};

use super::UtilitySpec;
use crate::error::{Error, Result};

/// Cap applied to conjugate slopes, which diverge at the boundary of `dom phi*`.
pub const GRADIENT_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseIntegrand {
    /// `phi(x) = x^2 / 2`, self-conjugate.
    Quadratic,
    /// `phi(x) = e^x`, `phi*(y) = y log y - y`.
    Exp,
    /// `phi(x) = -U(-x)`, so that `phi* = V`.
    UtilityLoss { utility: UtilitySpec },
}

impl BaseIntegrand {
    pub fn phi(&self, x: f64) -> f64 {
        match self {
            BaseIntegrand::Quadratic => 0.5 * x * x,
            BaseIntegrand::Exp => x.exp(),
            BaseIntegrand::UtilityLoss { utility } => -utility.u(-x),
        }
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        match self {
            BaseIntegrand::Quadratic => x,
            BaseIntegrand::Exp => x.exp(),
            BaseIntegrand::UtilityLoss { utility } => utility.u_prime(-x),
        }
    }

    pub fn phi_second(&self, x: f64) -> f64 {
        match self {
            BaseIntegrand::Quadratic => 1.0,
            BaseIntegrand::Exp => x.exp(),
            BaseIntegrand::UtilityLoss { utility } => -utility.u_second(-x),
        }
    }

    /// Whether `dom phi*` is contained in `[0, inf)`.
    pub fn nonnegative_domain(&self) -> bool {
        !matches!(self, BaseIntegrand::Quadratic)
    }

    /// `phi*(y)`, `+inf` off the domain.
    pub fn conj(&self, y: f64) -> f64 {
        match self {
            BaseIntegrand::Quadratic => 0.5 * y * y,
            BaseIntegrand::Exp => {
                if y < 0.0 {
                    f64::INFINITY
                } else if y == 0.0 {
                    0.0
                } else {
                    y * y.ln() - y
                }
            }
            BaseIntegrand::UtilityLoss { utility } => utility.v(y),
        }
    }

    /// `phi*'(y)`, capped at `GRADIENT_CAP` in absolute value.
    pub fn conj_prime(&self, y: f64) -> f64 {
        let d = match self {
            BaseIntegrand::Quadratic => y,
            BaseIntegrand::Exp => y.ln(),
            BaseIntegrand::UtilityLoss { utility } => utility.v_prime(y),
        };
        if d.is_nan() {
            GRADIENT_CAP
        } else {
            d.clamp(-GRADIENT_CAP, GRADIENT_CAP)
        }
    }

    /// `phi*''(y)` on the interior of the domain.
    pub fn conj_second(&self, y: f64) -> f64 {
        match self {
            BaseIntegrand::Quadratic => 1.0,
            BaseIntegrand::Exp => 1.0 / y,
            BaseIntegrand::UtilityLoss { utility } => utility.v_second(y),
        }
    }

    /// `phi*(y) - y phi*'(y)`: the derivative of the perspective
    /// `p phi*(nu / p)` in `p`.
    pub fn perspective_slope(&self, y: f64) -> f64 {
        match self {
            BaseIntegrand::Quadratic => -0.5 * y * y,
            BaseIntegrand::Exp => -y,
            BaseIntegrand::UtilityLoss { utility } => match *utility {
                UtilitySpec::Exponential { a } => -y / a,
                UtilitySpec::EntropicQuadratic { kappa } => -y - kappa * y * y,
            },
        }
    }
}

/// A base integrand with an optional per-path shift `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandSpec {
    pub base: BaseIntegrand,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
}

impl IntegrandSpec {
    pub fn new(base: BaseIntegrand) -> Self {
        Self { base, shift: None }
    }

    pub fn with_shift(base: BaseIntegrand, shift: Vec<f64>) -> Result<Self> {
        if shift.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parse("shift values must be finite".into()));
        }
        Ok(Self { base, shift: Some(shift) })
    }

    /// The conjugate pair `-U(-x)` / `V` of a utility.
    pub fn utility(utility: UtilitySpec) -> Self {
        Self::new(BaseIntegrand::UtilityLoss { utility })
    }

    pub fn shift_at(&self, j: usize) -> f64 {
        self.shift.as_ref().map_or(0.0, |b| b[j])
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        match &self.shift {
            Some(b) if b.len() != n => Err(Error::LatticeMismatch),
            _ => Ok(()),
        }
    }

    /// `phi_B(j, x) = phi(x + B_j)`.
    pub fn phi_at(&self, j: usize, x: f64) -> f64 {
        self.base.phi(x + self.shift_at(j))
    }

    /// `phi_B*(j, y) = phi*(y) - y B_j`.
    pub fn conj_at(&self, j: usize, y: f64) -> f64 {
        let c = self.base.conj(y);
        if c.is_finite() {
            c - y * self.shift_at(j)
        } else {
            c
        }
    }

    pub fn conj_prime_at(&self, j: usize, y: f64) -> f64 {
        self.base.conj_prime(y) - self.shift_at(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bases() -> Vec<BaseIntegrand> {
        vec![
            BaseIntegrand::Quadratic,
            BaseIntegrand::Exp,
            BaseIntegrand::UtilityLoss { utility: UtilitySpec::Exponential { a: 0.7 } },
            BaseIntegrand::UtilityLoss { utility: UtilitySpec::EntropicQuadratic { kappa: 0.5 } },
        ]
    }

    #[test]
    fn conjugate_matches_brute_force() {
        for b in bases() {
            for y in [0.0, 0.3, 1.0, 2.5] {
                let sup = (0..=400_000)
                    .map(|k| -30.0 + 40.0 * k as f64 / 400_000.0)
                    .map(|x| x * y - b.phi(x))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((sup - b.conj(y)).abs() < 1e-7, "{b:?} at {y}: {sup} vs {}", b.conj(y));
            }
        }
    }

    #[test]
    fn perspective_slope_identity() {
        for b in bases() {
            for y in [0.1, 1.0, 4.0] {
                let expect = b.conj(y) - y * b.conj_prime(y);
                assert!((b.perspective_slope(y) - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn conj_second_is_inverse_curvature() {
        // phi*''(phi'(x)) = 1 / phi''(x)
        for b in bases() {
            for x in [-1.5, -0.2, 0.4, 1.1] {
                let y = b.phi_prime(x);
                assert!((b.conj_second(y) * b.phi_second(x) - 1.0).abs() < 1e-12, "{b:?} at {x}");
            }
        }
    }

    #[test]
    fn shifted_conjugate_pointwise() {
        // phi_B*(y) = sup_x x y - phi(x + B), checked by brute force
        let spec = IntegrandSpec::with_shift(BaseIntegrand::Exp, vec![0.4, -1.1]).unwrap();
        for j in 0..2 {
            for y in [0.5, 2.0] {
                let sup = (0..=400_000)
                    .map(|k| -30.0 + 40.0 * k as f64 / 400_000.0)
                    .map(|x| x * y - spec.phi_at(j, x))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((sup - spec.conj_at(j, y)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn domain_edges() {
        assert_eq!(BaseIntegrand::Exp.conj(-0.1), f64::INFINITY);
        assert_eq!(BaseIntegrand::Exp.conj_prime(0.0), -GRADIENT_CAP);
        assert_eq!(BaseIntegrand::Quadratic.conj(-2.0), 2.0);
    }
}
