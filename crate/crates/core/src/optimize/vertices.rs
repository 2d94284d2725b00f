//! Vertex enumeration of `{x >= 0 : A x = b}` by breadth-first search over
//! feasible bases. Only meant for small polytopes.

use std::collections::{BTreeSet, VecDeque};

use super::lp::independent_rows;
use super::{solve_lp, LinearProgram, LpStatus, SolveOptions};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;

/// Inverts the square matrix `b` (row-major, `m x m`); `None` if singular.
fn invert(b: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut a = b.to_vec();
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))?;
        if a[p * m + c].abs() < 1e-12 {
            return None;
        }
        for k in 0..m {
            a.swap(c * m + k, p * m + k);
            inv.swap(c * m + k, p * m + k);
        }
        let d = a[c * m + c];
        for k in 0..m {
            a[c * m + k] /= d;
            inv[c * m + k] /= d;
        }
        for r in 0..m {
            if r != c {
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn basis_matrix(rows: &[Vec<f64>], basis: &[usize]) -> Vec<f64> {
    let m = rows.len();
    let mut b = vec![0.0; m * m];
    for (i, row) in rows.iter().enumerate() {
        for (k, &j) in basis.iter().enumerate() {
            b[i * m + k] = row[j];
        }
    }
    b
}

fn apply(inv: &[f64], v: &[f64]) -> Vec<f64> {
    let m = v.len();
    (0..m).map(|i| (0..m).map(|k| inv[i * m + k] * v[k]).sum()).collect()
}

/// All vertices of `{x >= 0 : rows x = rhs}`, deduplicated and sorted.
///
/// Fails with `HarnessLimit` once more than `max_bases` feasible bases have
/// been visited. An empty polytope yields an empty list.
pub fn enumerate_vertices(rows: &[Vec<f64>], rhs: &[f64], max_bases: usize) -> Result<Vec<Vec<f64>>> {
    let n = rows.first().map_or(0, Vec::len);
    let (keep, consistent) = independent_rows(rows, rhs);
    if !consistent {
        return Ok(Vec::new());
    }
    let a: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();
    let b: Vec<f64> = keep.iter().map(|&i| rhs[i]).collect();
    let m = a.len();
    let lp = LinearProgram::new(vec![0.0; n], a.clone(), b.clone())?;
    let sol = solve_lp(&lp, &SolveOptions::default())?;
    if sol.status != LpStatus::Optimal {
        return Ok(Vec::new());
    }
    if m == 0 {
        return Ok(vec![vec![0.0; n]]);
    }
    // start basis: support of the LP vertex, completed to full rank
    let mut start: Vec<usize> = Vec::new();
    let order: Vec<usize> = (0..n).filter(|&j| sol.primal[j] > PIVOT_TOL).chain((0..n).filter(|&j| sol.primal[j] <= PIVOT_TOL)).collect();
    let mut q: Vec<Vec<f64>> = Vec::new();
    for j in order {
        if start.len() == m {
            break;
        }
        let mut v: Vec<f64> = a.iter().map(|r| r[j]).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            v.iter_mut().for_each(|x| *x /= norm);
            q.push(v);
            start.push(j);
        }
    }
    if start.len() < m {
        return Err(Error::Numerical("could not complete a starting basis".into()));
    }
    start.sort_unstable();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    let mut found: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut vertices = Vec::new();
    while let Some(basis) = queue.pop_front() {
        let inv = invert(&basis_matrix(&a, &basis), m).ok_or_else(|| Error::Numerical("singular basis".into()))?;
        let xb = apply(&inv, &b);
        let mut x = vec![0.0; n];
        for (k, &j) in basis.iter().enumerate() {
            x[j] = if xb[k].abs() < PIVOT_TOL { 0.0 } else { xb[k] };
        }
        let key: Vec<i64> = x.iter().map(|v| (v * 1e9).round() as i64).collect();
        if found.insert(key) {
            vertices.push(x);
        }
        for j in 0..n {
            if basis.contains(&j) {
                continue;
            }
            let col: Vec<f64> = a.iter().map(|r| r[j]).collect();
            let u = apply(&inv, &col);
            let ratio = (0..m)
                .filter(|&r| u[r] > PIVOT_TOL)
                .map(|r| xb[r].max(0.0) / u[r])
                .fold(f64::INFINITY, f64::min);
            if !ratio.is_finite() {
                continue;
            }
            for r in (0..m).filter(|&r| u[r] > PIVOT_TOL && xb[r].max(0.0) / u[r] <= ratio + PIVOT_TOL) {
                let mut next = basis.clone();
                next[r] = j;
                next.sort_unstable();
                if seen.contains(&next) {
                    continue;
                }
                if seen.len() >= max_bases {
                    return Err(Error::HarnessLimit(format!("vertex enumeration exceeded {max_bases} bases")));
                }
                seen.insert(next.clone());
                queue.push_back(next);
            }
        }
    }
    vertices.sort_by(|x, y| x.iter().zip(y).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(vertices)
}
