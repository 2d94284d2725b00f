//! Utility functions and their convex conjugates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A strictly concave Inada utility `U` with conjugate
/// `V(y) = sup_x (U(x) - x y)`; `dom V = [0, inf)` for both kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    /// `U(x) = -exp(-a x) / a`.
    Exponential { a: f64 },
    /// `V(y) = y log y - y + kappa y^2`; `U` by numerical inversion of `V'`.
    EntropicQuadratic { kappa: f64 },
}

impl Default for UtilitySpec {
    fn default() -> Self {
        UtilitySpec::Exponential { a: 1.0 }
    }
}

const NEWTON_RESIDUAL: f64 = 1e-12;

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        let (name, p) = match *self {
            UtilitySpec::Exponential { a } => ("a", a),
            UtilitySpec::EntropicQuadratic { kappa } => ("kappa", kappa),
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Parse(format!("utility parameter {name} must be positive, got {p}")));
        }
        Ok(())
    }

    /// The minimiser `y*` of `V(y) + x y`, i.e. `U'(x)`.
    fn dual_point(&self, x: f64) -> f64 {
        match *self {
            UtilitySpec::Exponential { a } => (-a * x).exp(),
            UtilitySpec::EntropicQuadratic { kappa } => {
                // z = log y solves h(z) = z + 2 kappa e^z + x = 0; h is convex
                // and increasing, so Newton from the right of the root is monotone
                let mut z = -x;
                if -x > 2.0 * kappa {
                    z = z.min((-x / (2.0 * kappa)).ln());
                }
                for _ in 0..200 {
                    let e = (2.0 * kappa) * z.exp();
                    let h = z + e + x;
                    if h.abs() <= NEWTON_RESIDUAL * (1.0 + x.abs()) {
                        break;
                    }
                    z -= h / (1.0 + e);
                }
                z.exp()
            }
        }
    }

    pub fn u(&self, x: f64) -> f64 {
        match *self {
            UtilitySpec::Exponential { a } => -(-a * x).exp() / a,
            UtilitySpec::EntropicQuadratic { .. } => {
                let y = self.dual_point(x);
                self.v(y) + x * y
            }
        }
    }

    pub fn u_prime(&self, x: f64) -> f64 {
        self.dual_point(x)
    }

    pub fn u_second(&self, x: f64) -> f64 {
        match *self {
            UtilitySpec::Exponential { a } => -a * (-a * x).exp(),
            UtilitySpec::EntropicQuadratic { .. } => -1.0 / self.v_second(self.dual_point(x)),
        }
    }

    /// `V(y)`; `+inf` for `y < 0`, `V(0) = 0`.
    pub fn v(&self, y: f64) -> f64 {
        if y < 0.0 {
            return f64::INFINITY;
        }
        let ent = if y == 0.0 { 0.0 } else { y * y.ln() - y };
        match *self {
            UtilitySpec::Exponential { a } => ent / a,
            UtilitySpec::EntropicQuadratic { kappa } => ent + kappa * y * y,
        }
    }

    /// `V'(y)` for `y > 0`; `-inf` at 0.
    pub fn v_prime(&self, y: f64) -> f64 {
        match *self {
            UtilitySpec::Exponential { a } => y.ln() / a,
            UtilitySpec::EntropicQuadratic { kappa } => y.ln() + 2.0 * kappa * y,
        }
    }

    pub fn v_second(&self, y: f64) -> f64 {
        match *self {
            UtilitySpec::Exponential { a } => 1.0 / (a * y),
            UtilitySpec::EntropicQuadratic { kappa } => 1.0 / y + 2.0 * kappa,
        }
    }
}
