//! One-dimensional searches.

use super::SolveOptions;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar1d {
    pub argmin: f64,
    pub min: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is shorter than `tolerance * (hi - lo)` or after
/// `scalar_max_iterations` reductions. `+inf` values are allowed and are
/// treated as larger than every finite value, with ties moving left.
pub fn minimize_convex_1d(
    mut f: impl FnMut(f64) -> f64,
    bracket: (f64, f64),
    opts: &SolveOptions,
) -> Result<Scalar1d> {
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::BracketInvalid { lo, hi });
    }
    let width = opts.tolerance * (hi - lo);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..opts.scalar_max_iterations {
        if b - a <= width {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.1 || (fc == best.1 && c < best.0) {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(Scalar1d { argmin: best.0, min: best.1 })
}

/// Grows `hi` geometrically from `start` until `f` increases, returning the
/// upper end of a bracket for a quasi-convex function on `(0, inf)`.
pub fn bracket_upward(mut f: impl FnMut(f64) -> f64, start: f64, max_doublings: usize) -> Result<f64> {
    let mut hi = start;
    let mut prev = f(hi);
    for _ in 0..max_doublings {
        let next = 2.0 * hi;
        let v = f(next);
        if v > prev || !v.is_finite() {
            return Ok(next);
        }
        hi = next;
        prev = v;
    }
    Err(Error::BracketInvalid { lo: start, hi })
}

/// Root of a nondecreasing `g` on `[lo, hi]` with `g(lo) <= 0 <= g(hi)`,
/// by the Illinois variant of regula falsi.
pub fn find_root_increasing(
    mut g: impl FnMut(f64) -> f64,
    bracket: (f64, f64),
    opts: &SolveOptions,
) -> Result<f64> {
    let (mut a, mut b) = bracket;
    if !(a < b) {
        return Err(Error::BracketInvalid { lo: a, hi: b });
    }
    let mut ga = g(a);
    let mut gb = g(b);
    if ga > 0.0 || gb < 0.0 {
        return Err(Error::BracketInvalid { lo: a, hi: b });
    }
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    let width = opts.tolerance * (b - a).max(1.0);
    let mut side = 0i8;
    for _ in 0..opts.scalar_max_iterations {
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc == 0.0 {
            return Ok(c);
        }
        if gc < 0.0 {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        if b - a <= width {
            break;
        }
    }
    Ok(if -ga < gb { a } else { b })
}
