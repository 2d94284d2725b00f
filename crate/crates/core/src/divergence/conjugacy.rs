//! Brute-force verification of the conjugate duality between the robust
//! integral functional `I` and the robust divergence `J` on small lattices.
//!
//! Every quantity is computed twice by unrelated routes: a concave
//! maximisation over functions `f` on one side, and a minimisation over
//! mixture weights (or measures) on the other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{robust_integral, AmbiguitySet, DivergenceEvaluator, IntegrandSpec};
use crate::error::{Error, Result};
use crate::optimize::{
    cholesky_solve, dot, frank_wolfe, maximize_min, solve_lp, ConcaveFamily, ConcavePiece, LinearProgram, LpOracle, LpStatus,
    SmoothObjective, SolveOptions, BETA_SCHEDULE,
};

/// Largest lattice the harness accepts.
pub const HARNESS_PATH_LIMIT: usize = 64;

/// Residual bound used for the pass verdict.
pub const CONJUGACY_TOL: f64 = 1e-4;

const STARTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugacyReport {
    pub trials: usize,
    /// `max |sup_f (nu(f) - I(f)) - J(nu)|` over finite draws.
    pub conjugate_residual: f64,
    /// Draws with `J(nu) = +inf`, and whether the sup side diverged on all.
    pub infinite_draws: usize,
    pub infinite_agree: bool,
    /// `max |I(f) - max_nu (nu(f) - J(nu))|`.
    pub attainment_residual: f64,
    /// Largest `nu(f) - I(f) - J(nu)` seen (Young's inequality wants <= 0).
    pub young_excess: f64,
    /// `max |inf_C I + min_{C polar} J(-.)|` over random cones.
    pub meta_residual: f64,
    /// `max |J_B(nu) - J(nu) + nu(B)|`; zero when the spec has no shift.
    pub shift_residual: f64,
    pub passed: bool,
}

/// `G_k(f) = nu(f) - E_{P_k} phi_B(f)` on the supported coordinates.
struct ConjugateFamily<'a> {
    nu: &'a [f64],
    spec: &'a IntegrandSpec,
    amb: &'a AmbiguitySet,
    cols: &'a [usize],
}

impl ConcaveFamily for ConjugateFamily<'_> {
    fn dim(&self) -> usize {
        self.cols.len()
    }

    fn pieces(&self, f: &[f64]) -> Vec<ConcavePiece> {
        let d = self.cols.len();
        self.amb
            .priors()
            .iter()
            .map(|p| {
                let w = p.weights();
                let mut value = 0.0;
                let mut gradient = vec![0.0; d];
                let mut hessian = vec![0.0; d * d];
                for (k, &j) in self.cols.iter().enumerate() {
                    let z = f[k] + self.spec.shift_at(j);
                    value += self.nu[j] * f[k];
                    gradient[k] = self.nu[j];
                    if w[j] > 0.0 {
                        value -= w[j] * self.spec.base.phi(z);
                        gradient[k] -= w[j] * self.spec.base.phi_prime(z);
                        hessian[k * d + k] = -w[j] * self.spec.base.phi_second(z);
                    }
                }
                ConcavePiece { value: if value.is_nan() { f64::NEG_INFINITY } else { value }, gradient, hessian }
            })
            .collect()
    }
}

/// `H_k(c) = -E_{P_k} phi_B(sum_i c_i g_i)` over a subset of cone generators.
struct ConeFamily<'a> {
    gens: Vec<&'a [f64]>,
    spec: &'a IntegrandSpec,
    amb: &'a AmbiguitySet,
}

impl ConcaveFamily for ConeFamily<'_> {
    fn dim(&self) -> usize {
        self.gens.len()
    }

    fn pieces(&self, c: &[f64]) -> Vec<ConcavePiece> {
        let r = self.gens.len();
        let n = self.amb.n_paths();
        let f: Vec<f64> = (0..n).map(|j| self.gens.iter().zip(c).map(|(g, ci)| ci * g[j]).sum()).collect();
        self.amb
            .priors()
            .iter()
            .map(|p| {
                let mut value = 0.0;
                let mut gradient = vec![0.0; r];
                let mut hessian = vec![0.0; r * r];
                for (j, &w) in p.weights().iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let z = f[j] + self.spec.shift_at(j);
                    value -= w * self.spec.base.phi(z);
                    let d1 = w * self.spec.base.phi_prime(z);
                    let d2 = w * self.spec.base.phi_second(z);
                    for a in 0..r {
                        gradient[a] -= d1 * self.gens[a][j];
                        for b in 0..r {
                            hessian[a * r + b] -= d2 * self.gens[a][j] * self.gens[b][j];
                        }
                    }
                }
                ConcavePiece { value: if value.is_nan() { f64::NEG_INFINITY } else { value }, gradient, hessian }
            })
            .collect()
    }
}

/// `J` as a function of the split variables of the polar-cone polytope.
struct PolarObjective<'a, 'b> {
    eval: &'b mut DivergenceEvaluator<'a>,
    cols: &'b [usize],
    n: usize,
    signed: bool,
}

impl PolarObjective<'_, '_> {
    fn measure(&self, x: &[f64]) -> Vec<f64> {
        let d = self.cols.len();
        let mut nu = vec![0.0; self.n];
        for (k, &j) in self.cols.iter().enumerate() {
            nu[j] = if self.signed { x[k] - x[d + k] } else { x[k] };
        }
        nu
    }
}

impl SmoothObjective for PolarObjective<'_, '_> {
    fn value_and_gradient(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        let nu = self.measure(x);
        let (r, g) = self.eval.value_and_gradient(&nu);
        let d = self.cols.len();
        let mut grad = vec![0.0; x.len()];
        for (k, &j) in self.cols.iter().enumerate() {
            grad[k] = g[j];
            if self.signed {
                grad[d + k] = -g[j];
            }
        }
        (r.value, grad)
    }
}

fn random_starts(rng: &mut ChaCha8Rng, dim: usize, count: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; dim]];
    while out.len() < count {
        out.push((0..dim).map(|_| rng.gen_range(-scale..scale)).collect());
    }
    out
}

fn pairing(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sup_f nu(f) - I(f)` by smoothed max-min from several starts.
fn conjugate_by_maximisation(nu: &[f64], spec: &IntegrandSpec, amb: &AmbiguitySet, cols: &[usize], rng: &mut ChaCha8Rng) -> f64 {
    let family = ConjugateFamily { nu, spec, amb, cols };
    let starts = random_starts(rng, cols.len(), STARTS, 1.0);
    maximize_min(&family, &starts, &BETA_SCHEDULE).value
}

/// `inf_{c >= 0} I(sum c_i g_i)`: the constrained optimum with support `S`
/// is the free optimum on the coordinates `S`, so scan all supports.
fn cone_infimum(gens: &[Vec<f64>], spec: &IntegrandSpec, amb: &AmbiguitySet, rng: &mut ChaCha8Rng) -> Result<f64> {
    let r = gens.len();
    let mut best = robust_integral(&vec![0.0; amb.n_paths()], spec, amb)?;
    for mask in 1u32..(1 << r) {
        let subset: Vec<&[f64]> = (0..r).filter(|i| mask & (1 << i) != 0).map(|i| gens[i].as_slice()).collect();
        let family = ConeFamily { gens: subset, spec, amb };
        let starts: Vec<Vec<f64>> =
            random_starts(rng, family.dim(), 3, 1.0).into_iter().map(|s| s.into_iter().map(f64::abs).collect()).collect();
        let res = maximize_min(&family, &starts, &BETA_SCHEDULE);
        if res.theta.iter().all(|c| *c >= -1e-9) {
            best = best.min(-res.value);
        }
    }
    Ok(best)
}

/// `sum_j p_j phi_B*(rho_j / p_j)` over mixtures `p = sum_k w_k P_k`, on the
/// supported coordinates. Jointly convex in `(rho, w)`.
struct PolarBarrier<'a> {
    spec: &'a IntegrandSpec,
    gens: Vec<Vec<f64>>,
    priors: Vec<Vec<f64>>,
    shift: Vec<f64>,
    nonneg: bool,
}

impl PolarBarrier<'_> {
    fn n_barriers(&self) -> usize {
        self.gens.len() + self.priors.len() + if self.nonneg { self.shift.len() } else { 0 }
    }

    /// Mixture weights from the reduced coordinates `x[d..]`.
    fn weights(&self, x: &[f64]) -> Vec<f64> {
        let d = self.shift.len();
        let mut w = x[d..].to_vec();
        w.push(1.0 - w.iter().sum::<f64>());
        w
    }

    fn mixture(&self, w: &[f64]) -> Vec<f64> {
        (0..self.shift.len()).map(|j| self.priors.iter().zip(w).map(|(p, wk)| wk * p[j]).sum()).collect()
    }

    fn divergence(&self, rho: &[f64], p: &[f64]) -> f64 {
        rho.iter().zip(p).zip(&self.shift).map(|((r, pj), b)| pj * self.spec.base.conj(r / pj) - r * b).sum()
    }

    fn value(&self, x: &[f64], t: f64) -> f64 {
        let d = self.shift.len();
        let rho = &x[..d];
        let w = self.weights(x);
        let slacks: Vec<f64> = self.gens.iter().map(|g| dot(g, rho)).collect();
        if w.iter().chain(&slacks).any(|v| !(*v > 0.0)) || (self.nonneg && rho.iter().any(|r| !(*r > 0.0))) {
            return f64::INFINITY;
        }
        let logs: f64 = w.iter().chain(&slacks).map(|v| v.ln()).sum::<f64>()
            + if self.nonneg { rho.iter().map(|r| r.ln()).sum() } else { 0.0 };
        let f = t * self.divergence(rho, &self.mixture(&w)) - logs;
        if f.is_nan() {
            f64::INFINITY
        } else {
            f
        }
    }

    fn newton_system(&self, x: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.shift.len();
        let m = self.priors.len();
        let n = d + m - 1;
        let rho = &x[..d];
        let w = self.weights(x);
        let p = self.mixture(&w);
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let base = self.spec.base;
        // dp_j / dw_k in reduced coordinates
        let dp = |k: usize, j: usize| self.priors[k][j] - self.priors[m - 1][j];
        for j in 0..d {
            let y = rho[j] / p[j];
            let s = base.conj_second(y) / p[j];
            let h_r = base.conj_prime(y) - self.shift[j];
            let h_p = base.perspective_slope(y);
            grad[j] += t * h_r;
            hess[j * n + j] += t * s;
            for k in 0..m - 1 {
                let a = dp(k, j);
                grad[d + k] += t * h_p * a;
                hess[j * n + d + k] -= t * y * s * a;
                hess[(d + k) * n + j] -= t * y * s * a;
                for l in 0..m - 1 {
                    hess[(d + k) * n + d + l] += t * y * y * s * a * dp(l, j);
                }
            }
            if self.nonneg {
                grad[j] -= 1.0 / rho[j];
                hess[j * n + j] += 1.0 / (rho[j] * rho[j]);
            }
        }
        for g in &self.gens {
            let sl = dot(g, rho);
            for a in 0..d {
                grad[a] -= g[a] / sl;
                for b in 0..d {
                    hess[a * n + b] += g[a] * g[b] / (sl * sl);
                }
            }
        }
        let wl = w[m - 1];
        for k in 0..m - 1 {
            grad[d + k] += 1.0 / wl - 1.0 / w[k];
            hess[(d + k) * n + d + k] += 1.0 / (w[k] * w[k]);
            for l in 0..m - 1 {
                hess[(d + k) * n + d + l] += 1.0 / (wl * wl);
            }
        }
        (grad, hess)
    }

    /// Damped Newton on the barrier problem at weight `t`.
    fn center(&self, x: &mut Vec<f64>, t: f64) -> bool {
        for _ in 0..200 {
            let (g, h) = self.newton_system(x, t);
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let n = g.len();
            let dx = match cholesky_solve(&h, &neg) {
                Some(dx) => dx,
                None => {
                    let scale = (0..n).map(|i| h[i * n + i].abs()).fold(1.0, f64::max);
                    let mut ridge = h.clone();
                    for i in 0..n {
                        ridge[i * n + i] += 1e-12 * scale;
                    }
                    match cholesky_solve(&ridge, &neg) {
                        Some(dx) => dx,
                        None => return false,
                    }
                }
            };
            let slope = dot(&g, &dx);
            // the objective error left by inexact centering is about -slope / t
            if -slope <= 1e-10 {
                return true;
            }
            let settled = -slope <= 1e-6_f64.max(1e-12 * t);
            let f0 = self.value(x, t);
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
                let f1 = self.value(&trial, t);
                if f1 <= f0 + 0.25 * step * slope {
                    if f1 >= f0 {
                        // no representable progress left
                        return settled;
                    }
                    *x = trial;
                    break;
                }
                step *= 0.5;
                if step < 1e-14 {
                    return settled;
                }
            }
        }
        false
    }
}

/// A point with `rho(g_i) >= tau`, and `rho >= tau` on nonnegative domains,
/// maximising `tau` under `sum |rho| <= 1`.
fn strictly_feasible(gens: &[Vec<f64>], nonneg: bool, opts: &SolveOptions) -> Result<Option<Vec<f64>>> {
    let d = gens[0].len();
    let r = gens.len();
    let nr = if nonneg { d } else { 2 * d };
    let tau = nr;
    let extra = if nonneg { d } else { 0 };
    let width = nr + 1 + r + extra + 1;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (i, g) in gens.iter().enumerate() {
        let mut row = vec![0.0; width];
        for a in 0..d {
            row[a] = g[a];
            if !nonneg {
                row[d + a] = -g[a];
            }
        }
        row[tau] = -1.0;
        row[tau + 1 + i] = -1.0;
        rows.push(row);
        rhs.push(0.0);
    }
    if nonneg {
        for a in 0..d {
            let mut row = vec![0.0; width];
            row[a] = 1.0;
            row[tau] = -1.0;
            row[tau + 1 + r + a] = -1.0;
            rows.push(row);
            rhs.push(0.0);
        }
    }
    let mut budget = vec![0.0; width];
    for v in budget.iter_mut().take(nr) {
        *v = 1.0;
    }
    budget[width - 1] = 1.0;
    rows.push(budget);
    rhs.push(1.0);
    let mut c = vec![0.0; width];
    c[tau] = -1.0;
    let s = solve_lp(&LinearProgram::new(c, rows, rhs)?, opts)?;
    if s.status != LpStatus::Optimal || s.primal[tau] <= 1e-9 {
        return Ok(None);
    }
    Ok(Some((0..d).map(|a| if nonneg { s.primal[a] } else { s.primal[a] - s.primal[d + a] }).collect()))
}

/// `min { J(rho) : rho(g_i) >= 0 }` along the central path of a log-barrier
/// method in `(rho, w)`. `None` when the polar cone has empty interior or the
/// path does not settle.
fn polar_minimum_barrier(
    gens: &[Vec<f64>],
    spec: &IntegrandSpec,
    amb: &AmbiguitySet,
    cols: &[usize],
    opts: &SolveOptions,
) -> Result<Option<f64>> {
    let restrict = |v: &[f64]| cols.iter().map(|&j| v[j]).collect::<Vec<f64>>();
    let nonneg = spec.base.nonnegative_domain();
    let gens: Vec<Vec<f64>> = gens.iter().map(|g| restrict(g)).collect();
    let Some(rho0) = strictly_feasible(&gens, nonneg, opts)? else {
        return Ok(None);
    };
    let m = amb.len();
    let barrier = PolarBarrier {
        spec,
        gens,
        priors: amb.priors().iter().map(|p| restrict(p.weights())).collect(),
        shift: cols.iter().map(|&j| spec.shift_at(j)).collect(),
        nonneg,
    };
    let mut x = rho0;
    x.extend(std::iter::repeat_n(1.0 / m as f64, m - 1));
    let nu = barrier.n_barriers() as f64;
    let mut t = 1.0;
    loop {
        if !barrier.center(&mut x, t) || x.iter().any(|v| v.abs() > 1e9) {
            return Ok(None);
        }
        if nu / t < 1e-9 {
            break;
        }
        t *= 20.0;
    }
    let d = cols.len();
    let w = barrier.weights(&x);
    Ok(Some(barrier.divergence(&x[..d], &barrier.mixture(&w))))
}

/// `min { J(rho) : rho(g_i) >= 0 }`: barrier path when the polar cone is
/// solid, otherwise Frank-Wolfe.
fn polar_minimum(
    gens: &[Vec<f64>],
    eval: &mut DivergenceEvaluator<'_>,
    cols: &[usize],
    opts: &SolveOptions,
) -> Result<f64> {
    match polar_minimum_barrier(gens, eval.spec(), eval.ambiguity(), cols, opts)? {
        Some(v) => Ok(v),
        None => polar_minimum_fw(gens, eval, cols, opts),
    }
}

/// `min { J(rho) : rho(g_i) >= 0 }` by Frank-Wolfe over the cone cut by a
/// budget `sum |rho| <= R`, growing `R` while the budget binds.
fn polar_minimum_fw(gens: &[Vec<f64>], eval: &mut DivergenceEvaluator<'_>, cols: &[usize], opts: &SolveOptions) -> Result<f64> {
    let n = eval.ambiguity().n_paths();
    let signed = !eval.spec().base.nonnegative_domain();
    let d = cols.len();
    let nv = if signed { 2 * d } else { d };
    let r = gens.len();
    let width = nv + r + 1;
    let mut rows = Vec::new();
    for (i, g) in gens.iter().enumerate() {
        let mut row = vec![0.0; width];
        for (k, &j) in cols.iter().enumerate() {
            row[k] = g[j];
            if signed {
                row[d + k] = -g[j];
            }
        }
        row[nv + i] = -1.0;
        rows.push(row);
    }
    let mut budget = vec![1.0; width];
    for v in budget.iter_mut().skip(nv).take(r) {
        *v = 0.0;
    }
    rows.push(budget);
    let mut radius = 8.0;
    let fw_opts = opts.clone().with_tolerance(1e-10);
    for _ in 0..12 {
        let mut rhs = vec![0.0; r];
        rhs.push(radius);
        let oracle = LpOracle::new(rows.clone(), rhs, opts);
        let start = oracle.interior_start()?;
        let mut obj = PolarObjective { eval: &mut *eval, cols, n, signed };
        let res = frank_wolfe(&oracle, &mut obj, start, &fw_opts)?;
        let slack = res.point[width - 1];
        if slack > 1e-6 * radius {
            return Ok(res.value);
        }
        radius *= 4.0;
    }
    Err(Error::HarnessLimit("polar-cone budget kept binding".into()))
}

/// Runs `trial_count` seeded draws of the conjugacy, attainment and
/// meta-duality checks for one integrand and ambiguity set.
pub fn conjugacy_check(
    spec: &IntegrandSpec,
    amb: &AmbiguitySet,
    trial_count: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<ConjugacyReport> {
    let n = amb.n_paths();
    if n > HARNESS_PATH_LIMIT {
        return Err(Error::HarnessLimit(format!("{n} paths exceed the conjugacy harness limit of {HARNESS_PATH_LIMIT}")));
    }
    spec.check_len(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<usize> = (0..n).filter(|&j| amb.support()[j]).collect();
    let nonneg = spec.base.nonnegative_domain();
    let unshifted = IntegrandSpec::new(spec.base);
    let mut report = ConjugacyReport {
        trials: trial_count,
        conjugate_residual: 0.0,
        infinite_draws: 0,
        infinite_agree: true,
        attainment_residual: 0.0,
        young_excess: f64::NEG_INFINITY,
        meta_residual: 0.0,
        shift_residual: 0.0,
        passed: false,
    };
    let mut eval = DivergenceEvaluator::new(amb, spec, opts);
    let mut base_eval = DivergenceEvaluator::new(amb, &unshifted, opts);
    for trial in 0..trial_count {
        // (a) conjugate of I at a random measure
        let mut nu = vec![0.0; n];
        for &j in &cols {
            nu[j] = if nonneg { rng.gen_range(0.05..2.0) } else { rng.gen_range(-1.5..1.5) };
        }
        let negative_draw = nonneg && trial % 4 == 3;
        if negative_draw {
            nu[cols[rng.gen_range(0..cols.len())]] = -rng.gen_range(0.1..1.0);
        }
        let j_nu = eval.evaluate(&nu).value;
        if negative_draw {
            report.infinite_draws += 1;
            // the ray f = -t e_j drives nu(f) - I(f) to +inf
            let jn = cols.iter().copied().find(|&j| nu[j] < 0.0).expect("negative coordinate");
            let along = |t: f64| {
                let mut f = vec![0.0; n];
                f[jn] = -t;
                pairing(&nu, &f) - robust_integral(&f, spec, amb).unwrap_or(f64::INFINITY)
            };
            let diverges = along(1e2) > along(1e1) && along(1e3) > along(1e2) && along(1e3) > 10.0;
            report.infinite_agree &= diverges && j_nu == f64::INFINITY;
        } else {
            let lhs = conjugate_by_maximisation(&nu, spec, amb, &cols, &mut rng);
            report.conjugate_residual = report.conjugate_residual.max((lhs - j_nu).abs());
        }
        if spec.shift.is_some() && j_nu.is_finite() {
            let b: f64 = (0..n).map(|j| nu[j] * spec.shift_at(j)).sum();
            let base = base_eval.evaluate(&nu).value;
            report.shift_residual = report.shift_residual.max((j_nu - (base - b)).abs());
        }

        // (b) attainment in the dual representation of I
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let i_f = robust_integral(&f, spec, amb)?;
        if j_nu.is_finite() {
            report.young_excess = report.young_excess.max(pairing(&nu, &f) - i_f - j_nu);
        }
        let top = amb
            .priors()
            .iter()
            .map(|p| p.weights().iter().enumerate().map(|(j, w)| if *w > 0.0 { w * spec.phi_at(j, f[j]) } else { 0.0 }).sum::<f64>())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (k, v)| if v > a.1 { (k, v) } else { a })
            .0;
        let star: Vec<f64> = amb.priors()[top]
            .weights()
            .iter()
            .enumerate()
            .map(|(j, w)| w * spec.base.phi_prime(f[j] + spec.shift_at(j)))
            .collect();
        let attained = pairing(&star, &f) - eval.evaluate(&star).value;
        report.young_excess = report.young_excess.max(attained - i_f);
        report.attainment_residual = report.attainment_residual.max((attained - i_f).abs());

        // (c) meta duality over a random cone with 1..=3 generators
        let r = 1 + trial % 3;
        let gens: Vec<Vec<f64>> = (0..r).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let lhs = cone_infimum(&gens, spec, amb, &mut rng)?;
        let rhs = polar_minimum(&gens, &mut eval, &cols, opts)?;
        report.meta_residual = report.meta_residual.max((lhs + rhs).abs());
    }
    if report.young_excess == f64::NEG_INFINITY {
        report.young_excess = 0.0;
    }
    report.passed = report.conjugate_residual <= CONJUGACY_TOL
        && report.infinite_agree
        && report.attainment_residual <= CONJUGACY_TOL
        && report.young_excess <= 1e-9
        && report.meta_residual <= CONJUGACY_TOL
        && report.shift_residual <= CONJUGACY_TOL;
    Ok(report)
}
