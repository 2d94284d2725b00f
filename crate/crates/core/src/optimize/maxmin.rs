//! Maximisation of a pointwise minimum of smooth concave functions.
//!
//! The min is replaced by the soft-min `-(1/beta) log sum exp(-beta G_k)`,
//! which stays concave, and maximised by damped Newton steps while `beta`
//! increases along a schedule. The reported value is the true min at the
//! final point, never the smoothed surrogate.

use super::dot;

/// Value, gradient and row-major Hessian of one concave piece.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavePiece {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// A finite family `G_1..G_m` of concave `C^2` functions on `R^dim`.
pub trait ConcaveFamily {
    fn dim(&self) -> usize;
    fn pieces(&self, theta: &[f64]) -> Vec<ConcavePiece>;

    /// Values only; used by the line search.
    fn values(&self, theta: &[f64]) -> Vec<f64> {
        self.pieces(theta).into_iter().map(|p| p.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinResult {
    pub theta: Vec<f64>,
    /// `min_k G_k(theta)`.
    pub value: f64,
    pub newton_steps: usize,
    /// Norm of the last smoothed gradient.
    pub residual: f64,
}

/// Default sharpness schedule.
pub const BETA_SCHEDULE: [f64; 8] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];

const STAGE_STEPS: usize = 200;

fn soft_min(values: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return (m, vec![0.0; values.len()]);
    }
    let e: Vec<f64> = values.iter().map(|v| (-beta * (v - m)).exp()).collect();
    let z: f64 = e.iter().sum();
    (m - z.ln() / beta, e.into_iter().map(|v| v / z).collect())
}

fn smoothed(pieces: &[ConcavePiece], beta: f64, n: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let values: Vec<f64> = pieces.iter().map(|p| p.value).collect();
    let (s, pi) = soft_min(&values, beta);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n * n];
    for (p, w) in pieces.iter().zip(&pi) {
        if *w == 0.0 {
            continue;
        }
        for i in 0..n {
            g[i] += w * p.gradient[i];
        }
        for (hij, pij) in h.iter_mut().zip(&p.hessian) {
            *hij += w * pij;
        }
    }
    if pieces.len() > 1 {
        // curvature of the soft-min: -beta * Cov_pi(grad)
        for (p, w) in pieces.iter().zip(&pi) {
            if *w == 0.0 {
                continue;
            }
            for i in 0..n {
                let di = p.gradient[i] - g[i];
                if di == 0.0 {
                    continue;
                }
                for j in 0..n {
                    h[i * n + j] -= beta * w * di * (p.gradient[j] - g[j]);
                }
            }
        }
    }
    (s, g, h)
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major).
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Some(y)
}

fn newton_direction(h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let scale = (0..n).map(|i| h[i * n + i].abs()).fold(0.0_f64, f64::max).max(1e-300);
    let mut delta = 1e-13 * scale;
    loop {
        let mut a: Vec<f64> = h.iter().map(|v| -v).collect();
        for i in 0..n {
            a[i * n + i] += delta;
        }
        if let Some(p) = cholesky_solve(&a, g) {
            if p.iter().all(|v| v.is_finite()) {
                return p;
            }
        }
        delta = if delta == 0.0 { 1e-300 } else { delta * 100.0 };
        if delta > 1e300 {
            return g.to_vec();
        }
    }
}

fn run_from(family: &dyn ConcaveFamily, start: &[f64], schedule: &[f64]) -> MaxMinResult {
    let n = family.dim();
    let mut theta = start.to_vec();
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    for &beta in schedule {
        for _ in 0..STAGE_STEPS {
            let pieces = family.pieces(&theta);
            let (s, g, h) = smoothed(&pieces, beta, n);
            residual = dot(&g, &g).sqrt();
            if !s.is_finite() || n == 0 {
                break;
            }
            let p = newton_direction(&h, &g);
            let decrement = dot(&g, &p);
            if decrement <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial: Vec<f64> = theta.iter().zip(&p).map(|(a, b)| a + t * b).collect();
                let (st, _) = soft_min(&family.values(&trial), beta);
                if st.is_finite() && st >= s + 1e-4 * t * decrement {
                    theta = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            steps += 1;
            if !accepted {
                break;
            }
        }
    }
    let value = family.values(&theta).into_iter().fold(f64::INFINITY, f64::min);
    MaxMinResult { theta, value, newton_steps: steps, residual }
}

/// Maximises `min_k G_k` from each start and keeps the best run.
pub fn maximize_min(family: &dyn ConcaveFamily, starts: &[Vec<f64>], schedule: &[f64]) -> MaxMinResult {
    let zero = vec![0.0; family.dim()];
    let starts: Vec<&[f64]> = if starts.is_empty() { vec![&zero] } else { starts.iter().map(Vec::as_slice).collect() };
    let mut best: Option<MaxMinResult> = None;
    for s in starts {
        let r = run_from(family, s, schedule);
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    best.expect("at least one start")
}
