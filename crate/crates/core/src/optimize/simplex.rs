//! Minimisation over the probability simplex by exponentiated gradient.

use super::{dot, SolveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub weights: Vec<f64>,
    pub value: f64,
    /// `<grad, w> - min_k grad_k`, an upper bound on the suboptimality.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_STEPS: usize = 20_000;

/// Minimises a convex `g` over `{w >= 0, sum w = 1}` in dimension `m`.
///
/// `g` returns the value and a (sub)gradient. The step size adapts by
/// backtracking on the mirror-descent sufficient-decrease condition and
/// iterates stop once the simplex gap falls below `tolerance * (1 + |g|)`.
/// `start` warm-starts the iteration (entries are floored away from zero).
pub fn minimize_over_simplex(
    mut g: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    m: usize,
    start: Option<&[f64]>,
    opts: &SolveOptions,
) -> SimplexResult {
    assert!(m >= 1, "simplex dimension must be positive");
    if m == 1 {
        let w = vec![1.0];
        let (value, _) = g(&w);
        return SimplexResult { weights: w, value, gap: 0.0, iterations: 0, converged: true };
    }
    let uniform = vec![1.0 / m as f64; m];
    let warm = match start {
        Some(s) if s.len() == m && s.iter().all(|v| v.is_finite() && *v >= 0.0) => {
            let floor = 1e-12;
            let raw: Vec<f64> = s.iter().map(|v| v.max(floor)).collect();
            let t: f64 = raw.iter().sum();
            Some(raw.into_iter().map(|v| v / t).collect::<Vec<f64>>())
        }
        _ => None,
    };
    let Some(w0) = warm else {
        return descend(&mut g, uniform, opts);
    };
    let first = descend(&mut g, w0, opts);
    if first.value.is_finite() && first.gap <= opts.tolerance * (1.0 + first.value.abs()) {
        return first;
    }
    // multiplicative updates stall on faces whose weights sit at rounding
    // level, so an unfinished warm run is retried from the barycentre
    let cold = descend(&mut g, uniform, opts);
    let iterations = first.iterations + cold.iterations;
    let best = if cold.value < first.value || !first.value.is_finite() { cold } else { first };
    SimplexResult { iterations, ..best }
}

fn descend(g: &mut impl FnMut(&[f64]) -> (f64, Vec<f64>), mut w: Vec<f64>, opts: &SolveOptions) -> SimplexResult {
    let (mut f, mut grad) = g(&w);
    let mut eta = 1.0 / (grad.iter().fold(0.0_f64, |a, v| a.max(v.abs())) + 1e-12);
    let eta_floor = eta * 1e-12;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < MAX_STEPS {
        let gmin = grad.iter().copied().fold(f64::INFINITY, f64::min);
        gap = dot(&grad, &w) - gmin;
        if !f.is_finite() || gap <= opts.tolerance * (1.0 + f.abs()) {
            converged = f.is_finite();
            break;
        }
        iterations += 1;
        let mut trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi * (-eta * (gi - gmin)).exp()).collect();
        let t: f64 = trial.iter().sum();
        trial.iter_mut().for_each(|v| *v /= t);
        let (ft, gt) = g(&trial);
        let kl: f64 = trial
            .iter()
            .zip(&w)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a * (a / b).ln())
            .sum();
        let model = f + grad.iter().zip(trial.iter().zip(&w)).map(|(gi, (a, b))| gi * (a - b)).sum::<f64>() + kl / eta;
        if ft.is_finite() && ft <= f && ft <= model + 4.0 * f64::EPSILON * (1.0 + f.abs()) {
            let moved = trial.iter().zip(&w).any(|(a, b)| a != b);
            w = trial;
            f = ft;
            grad = gt;
            eta *= 2.0;
            if !moved {
                converged = true;
                break;
            }
        } else {
            eta *= 0.5;
            if eta < eta_floor {
                // no representable decrease left: accept if the gap is at the
                // square-root precision floor
                converged = gap <= opts.tolerance.sqrt() * (1.0 + f.abs());
                break;
            }
        }
    }
    SimplexResult { weights: w, value: f, gap, iterations, converged }
}
