//! εF-costs and εF-interpolations.
//!
//! The discrete action on `S` uniform segments of length `Δs` is
//! `Σ_k Δs [½|Δω_k/Δs|² + (ε²/4)(I(ω_k) + I(ω_{k+1}))]`. Its stationarity
//! condition at an interior knot is exactly the central-difference Newton
//! equation `(ω_{k+1} − 2ω_k + ω_{k−1})/Δs² = ε² F''F'(ω_k)`, so the direct
//! minimizer solves the discrete Newton equation to solver precision.
//! Minimization uses Newton steps on the block-tridiagonal Hessian with a
//! Levenberg shift and Armijo backtracking.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::io::Table;
use crate::par::{self, Exec};
use crate::potential::{dot, PotentialSpec};
use crate::{Error, Result};

pub const DEFAULT_S: usize = 512;

#[derive(Clone, Debug)]
pub struct SamplePath {
    pub knots: Vec<Vec<f64>>,
    pub eps: f64,
    /// Length of the time interval; 1 for interpolations.
    pub duration: f64,
    pub potential: PotentialSpec,
}

impl SamplePath {
    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn ds(&self) -> f64 {
        self.duration / self.segments() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let s = self.segments();
        (0..=s).map(|k| self.duration * k as f64 / s as f64).collect()
    }

    /// Cubic Lagrange interpolation at the fraction `s ∈ [0, 1]` of the interval.
    pub fn at(&self, s: f64) -> Vec<f64> {
        let n = self.segments();
        let u = (s.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let j = (u.floor() as usize).min(n - 1);
        if (u - u.round()).abs() < 1e-12 {
            return self.knots[u.round() as usize].clone();
        }
        if n < 3 {
            let w = u - j as f64;
            return self.knots[j].iter().zip(&self.knots[j + 1]).map(|(a, b)| a + w * (b - a)).collect();
        }
        let start = j.saturating_sub(1).min(n - 3);
        let idx = [start, start + 1, start + 2, start + 3];
        let dim = self.knots[0].len();
        let mut out = vec![0.0; dim];
        for (a, &ia) in idx.iter().enumerate() {
            let mut w = 1.0;
            for (b, &ib) in idx.iter().enumerate() {
                if a != b {
                    w *= (u - ib as f64) / (ia as f64 - ib as f64);
                }
            }
            for d in 0..dim {
                out[d] += w * self.knots[ia][d];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Shooting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    StraightLine,
    Supplied,
    Constant,
    DirectVelocity,
}

#[derive(Clone, Debug)]
pub struct InterpolationResult {
    pub path: SamplePath,
    pub cost: f64,
    pub hamiltonian: Vec<f64>,
    /// Per-knot Newton residual; endpoints use one-sided second differences.
    pub newton_residual: Vec<f64>,
    /// Maximum over interior knots.
    pub newton_residual_max: f64,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub init: Init,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpolationSummary {
    pub cost: f64,
    pub method: Method,
    #[serde(rename = "S")]
    pub s: usize,
    pub eps: f64,
    pub converged: bool,
    pub hamiltonian_drift: f64,
    pub newton_residual_max: f64,
    pub iterations: usize,
    pub init: Init,
}

impl InterpolationResult {
    pub fn hamiltonian_drift(&self) -> f64 {
        let max = self.hamiltonian.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.hamiltonian.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn hamiltonian_mean(&self) -> f64 {
        self.hamiltonian.iter().sum::<f64>() / self.hamiltonian.len() as f64
    }

    pub fn summary(&self) -> InterpolationSummary {
        InterpolationSummary {
            cost: self.cost,
            method: self.method,
            s: self.path.segments(),
            eps: self.path.eps,
            converged: self.converged,
            hamiltonian_drift: self.hamiltonian_drift(),
            newton_residual_max: self.newton_residual_max,
            iterations: self.iterations,
            init: self.init,
        }
    }

    /// Columns `s, x_1..x_n, H, newton_residual`.
    pub fn table(&self) -> Table {
        let n = self.path.potential.dim();
        let mut columns = vec!["s".to_string()];
        columns.extend((1..=n).map(|i| format!("x_{i}")));
        columns.push("H".into());
        columns.push("newton_residual".into());
        let times = self.path.times();
        let rows = (0..times.len())
            .map(|k| {
                let mut r = vec![times[k]];
                r.extend_from_slice(&self.path.knots[k]);
                r.push(self.hamiltonian[k]);
                r.push(self.newton_residual[k]);
                r
            })
            .collect();
        Table { columns, rows }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be finite and >= 0, got {eps}")));
    }
    Ok(())
}

fn check_segments(s: usize) -> Result<()> {
    if s < 2 {
        return Err(Error::InvalidInput(format!("need S >= 2, got {s}")));
    }
    Ok(())
}

fn discrete_action(f: &PotentialSpec, knots: &[Vec<f64>], eps: f64, ds: f64) -> Result<f64> {
    let fisher: Vec<f64> = knots.iter().map(|x| f.fisher_info(x)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for k in 0..knots.len() - 1 {
        let kin: f64 = knots[k + 1].iter().zip(&knots[k]).map(|(a, b)| (a - b) * (a - b)).sum();
        total += 0.5 * kin / ds + 0.25 * eps * eps * ds * (fisher[k] + fisher[k + 1]);
    }
    Ok(total)
}

/// Discrete action of a path.
pub fn action(path: &SamplePath) -> Result<f64> {
    check_segments(path.segments())?;
    check_eps(path.eps)?;
    discrete_action(&path.potential, &path.knots, path.eps, path.ds())
}

/// Gradient of the discrete action with respect to every knot, endpoints included.
pub fn action_gradient(path: &SamplePath) -> Result<Vec<Vec<f64>>> {
    check_segments(path.segments())?;
    raw_gradient(&path.potential, &path.knots, path.eps, path.ds())
}

fn raw_gradient(f: &PotentialSpec, knots: &[Vec<f64>], eps: f64, ds: f64) -> Result<Vec<Vec<f64>>> {
    let s = knots.len() - 1;
    let n = f.dim();
    let mut g = vec![vec![0.0; n]; s + 1];
    for k in 0..=s {
        let w = if k == 0 || k == s { 0.5 } else { 1.0 };
        let nr = f.newton_rhs(&knots[k], eps)?;
        for d in 0..n {
            let mut v = w * ds * nr[d];
            if k > 0 {
                v += (knots[k][d] - knots[k - 1][d]) / ds;
            }
            if k < s {
                v -= (knots[k + 1][d] - knots[k][d]) / ds;
            }
            g[k][d] = v;
        }
    }
    Ok(g)
}

/// Terminal cost `h` for the Hamilton–Jacobi semigroup.
pub trait Terminal: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Defaults to central differences of the gradient.
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let h = crate::potential::fd_step(x);
        let mut m = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for c in 0..n {
            xp[c] = x[c] + h;
            let p = self.gradient(&xp);
            xp[c] = x[c] - h;
            let q = self.gradient(&xp);
            xp[c] = x[c];
            for r in 0..n {
                m[(r, c)] = (p[r] - q[r]) / (2.0 * h);
            }
        }
        (&m + m.transpose()) * 0.5
    }
}

/// `h(x) = p·x`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub slope: Vec<f64>,
}

impl Terminal for Linear {
    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x)
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.slope.clone()
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// `h` given by closures.
pub struct FnTerminal<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> Terminal for FnTerminal<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100_000 }
    }
}

struct Solver<'a> {
    f: &'a PotentialSpec,
    eps: f64,
    ds: f64,
    terminal: Option<&'a dyn Terminal>,
    opts: SolverOptions,
}

struct SolveOutcome {
    knots: Vec<Vec<f64>>,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
}

fn sup(g: &[Vec<f64>], from: usize, to: usize) -> f64 {
    g[from..=to].iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

impl Solver<'_> {
    fn first_free(&self) -> usize {
        if self.terminal.is_some() {
            0
        } else {
            1
        }
    }

    fn objective(&self, knots: &[Vec<f64>]) -> Result<f64> {
        for x in knots {
            self.f.check(x)?;
        }
        let mut v = discrete_action(self.f, knots, self.eps, self.ds)?;
        if let Some(h) = self.terminal {
            v += h.value(&knots[0]);
        }
        if !v.is_finite() {
            return Err(Error::NonFinite("discrete action".into()));
        }
        Ok(v)
    }

    fn gradient(&self, knots: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut g = raw_gradient(self.f, knots, self.eps, self.ds)?;
        let s = knots.len() - 1;
        for d in g[s].iter_mut() {
            *d = 0.0;
        }
        match self.terminal {
            Some(h) => {
                let hg = h.gradient(&knots[0]);
                for (d, v) in g[0].iter_mut().zip(hg) {
                    *d += v;
                }
            }
            None => {
                for d in g[0].iter_mut() {
                    *d = 0.0;
                }
            }
        }
        Ok(g)
    }

    /// Solves `(H + shift I) d = -g` on the free knots by block Thomas.
    fn direction(&self, knots: &[Vec<f64>], g: &[Vec<f64>], shift: f64) -> Result<Option<Vec<Vec<f64>>>> {
        let s = knots.len() - 1;
        let n = self.f.dim();
        let k0 = self.first_free();
        let beta = -1.0 / self.ds;
        let m = s - k0;
        let mut inv: Vec<DMatrix<f64>> = Vec::with_capacity(m);
        let mut rhs: Vec<DVector<f64>> = Vec::with_capacity(m);
        for (i, k) in (k0..s).enumerate() {
            let w = if k == 0 { 0.5 } else { 1.0 };
            let c = if k == 0 { 1.0 } else { 2.0 };
            let mut d = self.f.newton_jacobian(&knots[k], self.eps)? * (w * self.ds);
            for j in 0..n {
                d[(j, j)] += c / self.ds + shift;
            }
            if k == 0 {
                if let Some(h) = self.terminal {
                    d += h.hessian(&knots[0]);
                }
            }
            let mut r = DVector::from_iterator(n, g[k].iter().map(|v| -v));
            if i > 0 {
                d -= &inv[i - 1] * (beta * beta);
                r -= &inv[i - 1] * &rhs[i - 1] * beta;
            }
            match d.try_inverse() {
                Some(di) if di.iter().all(|v| v.is_finite()) => inv.push(di),
                _ => return Ok(None),
            }
            rhs.push(r);
        }
        let mut dir = vec![vec![0.0; n]; s + 1];
        let mut next: Option<DVector<f64>> = None;
        for i in (0..m).rev() {
            let mut r = rhs[i].clone();
            if let Some(xn) = &next {
                r -= xn * beta;
            }
            let x = &inv[i] * r;
            dir[k0 + i] = x.iter().cloned().collect();
            next = Some(x);
        }
        Ok(Some(dir))
    }

    fn descent_direction(&self, knots: &[Vec<f64>], g: &[Vec<f64>]) -> Result<Option<(Vec<Vec<f64>>, f64)>> {
        let gnorm2: f64 = g.iter().flatten().map(|v| v * v).sum();
        let mut shift = 0.0;
        for _ in 0..80 {
            if let Some(d) = self.direction(knots, g, shift)? {
                let gd: f64 = g.iter().zip(&d).map(|(a, b)| dot(a, b)).sum();
                let dn2: f64 = d.iter().flatten().map(|v| v * v).sum();
                if gd < -1e-12 * (gnorm2 * dn2).sqrt() && gd.is_finite() {
                    return Ok(Some((d, gd)));
                }
            }
            shift = if shift == 0.0 { 1e-6 / self.ds } else { shift * 4.0 };
        }
        Ok(None)
    }

    fn step(knots: &[Vec<f64>], d: &[Vec<f64>], alpha: f64) -> Vec<Vec<f64>> {
        knots.iter().zip(d).map(|(x, v)| x.iter().zip(v).map(|(a, b)| a + alpha * b).collect()).collect()
    }

    fn solve(&self, mut knots: Vec<Vec<f64>>) -> Result<SolveOutcome> {
        let s = knots.len() - 1;
        let k0 = self.first_free();
        let mut fval = self.objective(&knots)?;
        let mut g = self.gradient(&knots)?;
        let mut gn = sup(&g, k0, s - 1);
        let mut it = 0;
        while it < self.opts.max_iter {
            if gn <= self.opts.tol {
                for _ in 0..2 {
                    let Some(d) = self.direction(&knots, &g, 0.0)? else { break };
                    let trial = Self::step(&knots, &d, 1.0);
                    if self.objective(&trial).is_err() {
                        break;
                    }
                    let gt = self.gradient(&trial)?;
                    let gtn = sup(&gt, k0, s - 1);
                    if gtn < gn {
                        knots = trial;
                        g = gt;
                        gn = gtn;
                    } else {
                        break;
                    }
                }
                return Ok(SolveOutcome { knots, iterations: it, gradient_norm: gn, converged: true });
            }
            it += 1;
            let Some((d, gd)) = self.descent_direction(&knots, &g)? else {
                break;
            };
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial = Self::step(&knots, &d, alpha);
                if let Ok(v) = self.objective(&trial) {
                    if v <= fval + 1e-4 * alpha * gd {
                        accepted = Some((trial, v));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted.is_none() {
                // Objective differences below rounding: accept a gradient decrease instead.
                let mut alpha = 1.0;
                for _ in 0..30 {
                    let trial = Self::step(&knots, &d, alpha);
                    if let Ok(v) = self.objective(&trial) {
                        let gt = self.gradient(&trial)?;
                        if sup(&gt, k0, s - 1) < gn {
                            accepted = Some((trial, v));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
            }
            let Some((trial, v)) = accepted else { break };
            knots = trial;
            fval = v;
            g = self.gradient(&knots)?;
            gn = sup(&g, k0, s - 1);
        }
        Ok(SolveOutcome { converged: gn <= self.opts.tol, knots, iterations: it, gradient_norm: gn })
    }
}

/// Knot velocities: central differences inside, second-order one-sided at the ends.
fn velocities(knots: &[Vec<f64>], ds: f64) -> Vec<Vec<f64>> {
    let s = knots.len() - 1;
    let n = knots[0].len();
    (0..=s)
        .map(|k| {
            (0..n)
                .map(|d| {
                    if s < 2 {
                        (knots[1][d] - knots[0][d]) / ds
                    } else if k == 0 {
                        (-3.0 * knots[0][d] + 4.0 * knots[1][d] - knots[2][d]) / (2.0 * ds)
                    } else if k == s {
                        (3.0 * knots[s][d] - 4.0 * knots[s - 1][d] + knots[s - 2][d]) / (2.0 * ds)
                    } else {
                        (knots[k + 1][d] - knots[k - 1][d]) / (2.0 * ds)
                    }
                })
                .collect()
        })
        .collect()
}

fn build_result(
    f: &PotentialSpec,
    knots: Vec<Vec<f64>>,
    eps: f64,
    duration: f64,
    method: Method,
    outcome: (usize, f64, bool),
    init: Init,
) -> Result<InterpolationResult> {
    let s = knots.len() - 1;
    let ds = duration / s as f64;
    let cost = discrete_action(f, &knots, eps, ds)?;
    let vel = velocities(&knots, ds);
    let hamiltonian = knots
        .iter()
        .zip(&vel)
        .map(|(x, v)| Ok(0.5 * dot(v, v) - 0.5 * eps * eps * f.fisher_info(x)?))
        .collect::<Result<Vec<f64>>>()?;
    let n = f.dim();
    let mut residual = vec![0.0; s + 1];
    let mut max_res: f64 = 0.0;
    for k in 0..=s {
        let acc: Vec<f64> = (0..n)
            .map(|d| {
                let q = |i: usize| knots[i][d];
                if k == 0 {
                    if s >= 3 {
                        (2.0 * q(0) - 5.0 * q(1) + 4.0 * q(2) - q(3)) / (ds * ds)
                    } else {
                        (q(0) - 2.0 * q(1) + q(2)) / (ds * ds)
                    }
                } else if k == s {
                    if s >= 3 {
                        (2.0 * q(s) - 5.0 * q(s - 1) + 4.0 * q(s - 2) - q(s - 3)) / (ds * ds)
                    } else {
                        (q(s) - 2.0 * q(s - 1) + q(s - 2)) / (ds * ds)
                    }
                } else {
                    (q(k + 1) - 2.0 * q(k) + q(k - 1)) / (ds * ds)
                }
            })
            .collect();
        let nr = f.newton_rhs(&knots[k], eps)?;
        let r: f64 = acc.iter().zip(&nr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        residual[k] = r;
        if k > 0 && k < s {
            max_res = max_res.max(r);
        }
    }
    Ok(InterpolationResult {
        path: SamplePath { knots, eps, duration, potential: f.clone() },
        cost,
        hamiltonian,
        newton_residual: residual,
        newton_residual_max: max_res,
        method,
        iterations: outcome.0,
        gradient_norm: outcome.1,
        converged: outcome.2,
        init,
    })
}

fn check_endpoints(f: &PotentialSpec, x: &[f64], y: &[f64], eps: f64, s: usize) -> Result<()> {
    check_eps(eps)?;
    check_segments(s)?;
    f.check(x)?;
    f.check(y)
}

pub fn straight_line(x: &[f64], y: &[f64], s: usize) -> Vec<Vec<f64>> {
    (0..=s)
        .map(|k| {
            let w = k as f64 / s as f64;
            x.iter().zip(y).map(|(a, b)| a + w * (b - a)).collect()
        })
        .collect()
}

/// Direct minimization of the discrete action with fixed endpoints.
pub fn minimize_direct(
    f: &PotentialSpec,
    x: &[f64],
    y: &[f64],
    eps: f64,
    s: usize,
    init: Option<&SamplePath>,
) -> Result<InterpolationResult> {
    minimize_direct_with(f, x, y, eps, s, init, SolverOptions::default())
}

pub fn minimize_direct_with(
    f: &PotentialSpec,
    x: &[f64],
    y: &[f64],
    eps: f64,
    s: usize,
    init: Option<&SamplePath>,
    opts: SolverOptions,
) -> Result<InterpolationResult> {
    check_endpoints(f, x, y, eps, s)?;
    let (mut knots, init_kind) = match init {
        Some(p) => {
            if p.segments() != s {
                return Err(Error::InvalidInput(format!("init has {} segments, expected {s}", p.segments())));
            }
            for k in &p.knots {
                f.check(k)?;
            }
            (p.knots.clone(), Init::Supplied)
        }
        None => {
            let line = straight_line(x, y, s);
            if line.iter().any(|k| !f.in_domain(k)) {
                return Err(Error::LineSegmentExitsDomain);
            }
            (line, Init::StraightLine)
        }
    };
    knots[0] = x.to_vec();
    knots[s] = y.to_vec();
    let solver = Solver { f, eps, ds: 1.0 / s as f64, terminal: None, opts };
    let out = solver.solve(knots)?;
    let res = build_result(
        f,
        out.knots,
        eps,
        1.0,
        Method::Direct,
        (out.iterations, out.gradient_norm, out.converged),
        init_kind,
    )?;
    if !res.converged {
        return Err(Error::NoConvergence {
            iterations: res.iterations,
            residual: res.gradient_norm,
            best: Some(Box::new(res)),
        });
    }
    Ok(res)
}

/// `A_F^ε(x, y)` from the direct method.
pub fn cost(f: &PotentialSpec, x: &[f64], y: &[f64], eps: f64, s: usize) -> Result<f64> {
    Ok(minimize_direct(f, x, y, eps, s, None)?.cost)
}

/// RK4 for `ω'' = ε² F''F'(ω)` from `(x, v0)` over `[0, 1]` in `s` steps.
fn integrate(f: &PotentialSpec, x: &[f64], v0: &[f64], eps: f64, s: usize) -> Result<Vec<Vec<f64>>> {
    let h = 1.0 / s as f64;
    let n = x.len();
    let mut q = x.to_vec();
    let mut p = v0.to_vec();
    let mut out = Vec::with_capacity(s + 1);
    out.push(q.clone());
    let add = |a: &[f64], c: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u + c * v).collect() };
    for _ in 0..s {
        let a1 = f.newton_rhs(&q, eps)?;
        let q2 = add(&q, 0.5 * h, &p);
        let p2 = add(&p, 0.5 * h, &a1);
        let a2 = f.newton_rhs(&q2, eps)?;
        let q3 = add(&q, 0.5 * h, &p2);
        let p3 = add(&p, 0.5 * h, &a2);
        let a3 = f.newton_rhs(&q3, eps)?;
        let q4 = add(&q, h, &p3);
        let p4 = add(&p, h, &a3);
        let a4 = f.newton_rhs(&q4, eps)?;
        for d in 0..n {
            q[d] += h / 6.0 * (p[d] + 2.0 * p2[d] + 2.0 * p3[d] + p4[d]);
            p[d] += h / 6.0 * (a1[d] + 2.0 * a2[d] + 2.0 * a3[d] + a4[d]);
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("shooting trajectory".into()));
        }
        f.check(&q)?;
        out.push(q.clone());
    }
    Ok(out)
}

fn shoot_from(f: &PotentialSpec, x: &[f64], y: &[f64], eps: f64, s: usize, v_init: Vec<f64>) -> Option<(Vec<Vec<f64>>, usize)> {
    let n = x.len();
    let resid = |v: &[f64]| -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        let path = integrate(f, x, v, eps, s).ok()?;
        let r: Vec<f64> = path[s].iter().zip(y).map(|(a, b)| a - b).collect();
        Some((path, r))
    };
    let supn = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut v = v_init;
    let (mut path, mut r) = resid(&v)?;
    for it in 0..100 {
        if supn(&r) <= 1e-10 {
            return Some((path, it));
        }
        let h = 1e-6 * (1.0 + v.iter().map(|a| a * a).sum::<f64>().sqrt());
        let mut jac = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut vp = v.clone();
            vp[c] += h;
            let mut vm = v.clone();
            vm[c] -= h;
            let (rp, rm, span) = match (resid(&vp), resid(&vm)) {
                (Some((_, rp)), Some((_, rm))) => (rp, rm, 2.0 * h),
                (Some((_, rp)), None) => (rp, r.clone(), h),
                (None, Some((_, rm))) => (r.clone(), rm, h),
                (None, None) => return None,
            };
            for row in 0..n {
                jac[(row, c)] = (rp[row] - rm[row]) / span;
            }
        }
        let step = jac.lu().solve(&DVector::from_iterator(n, r.iter().map(|a| -a)))?;
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let vt: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + alpha * b).collect();
            if let Some((pt, rt)) = resid(&vt) {
                if supn(&rt) < supn(&r) {
                    v = vt;
                    path = pt;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    (supn(&r) <= 1e-10).then_some((path, 100))
}

/// Shooting on the initial velocity for the two-point Newton problem.
pub fn solve_shooting(f: &PotentialSpec, x: &[f64], y: &[f64], eps: f64, s: usize) -> Result<InterpolationResult> {
    check_endpoints(f, x, y, eps, s)?;
    let straight: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let mut found = shoot_from(f, x, y, eps, s, straight).map(|r| (r, Init::StraightLine));
    if found.is_none() {
        if let Ok(d) = minimize_direct(f, x, y, eps, s, None) {
            let v0 = velocities(&d.path.knots, d.path.ds()).swap_remove(0);
            found = shoot_from(f, x, y, eps, s, v0).map(|r| (r, Init::DirectVelocity));
        }
    }
    let ((mut knots, iters), init) =
        found.ok_or_else(|| Error::ShootingDiverged("no start reached the endpoint to 1e-10".into()))?;
    knots[s] = y.to_vec();
    build_result(f, knots, eps, 1.0, Method::Shooting, (iters, 0.0, true), init)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CostDecomposition {
    pub total: f64,
    pub forward_part: f64,
    pub backward_part: f64,
    pub symmetric: f64,
    /// `½∫|ω̇ + εF'|²`.
    pub forward_integral: f64,
    /// `½∫|ω̇ − εF'|²`.
    pub backward_integral: f64,
    pub max_gap: f64,
}

/// Forward, backward and symmetric rewritings of the cost.
pub fn cost_decompositions(result: &InterpolationResult) -> Result<CostDecomposition> {
    let p = &result.path;
    let f = &p.potential;
    let eps = p.eps;
    let ds = p.ds();
    let grads: Vec<Vec<f64>> = p.knots.iter().map(|x| f.grad(x)).collect::<Result<_>>()?;
    let mut kin = 0.0;
    let mut pot = 0.0;
    let mut cross = 0.0;
    for k in 0..p.segments() {
        let dw: Vec<f64> = p.knots[k + 1].iter().zip(&p.knots[k]).map(|(a, b)| a - b).collect();
        kin += 0.5 * dot(&dw, &dw) / ds;
        pot += 0.25 * eps * eps * ds * (dot(&grads[k], &grads[k]) + dot(&grads[k + 1], &grads[k + 1]));
        let avg: Vec<f64> = grads[k].iter().zip(&grads[k + 1]).map(|(a, b)| 0.5 * (a + b)).collect();
        cross += dot(&dw, &avg);
    }
    let df = f.eval(&p.knots[p.segments()])? - f.eval(&p.knots[0])?;
    let forward_integral = kin + pot + eps * cross;
    let backward_integral = kin + pot - eps * cross;
    let forward_part = forward_integral - eps * df;
    let backward_part = backward_integral + eps * df;
    let symmetric = 0.5 * (forward_part + backward_part);
    let total = result.cost;
    let max_gap = [forward_part, backward_part, symmetric]
        .iter()
        .fold(0.0f64, |m, v| m.max((v - total).abs()));
    Ok(CostDecomposition { total, forward_part, backward_part, symmetric, forward_integral, backward_integral, max_gap })
}

#[derive(Clone, Debug)]
pub struct HjResult {
    pub value: f64,
    pub path: SamplePath,
    /// `|ω̇₀ − h'(ω₀)|`.
    pub transversality_gap: f64,
    pub iterations: usize,
}

/// `Q_t h(y) = inf { h(ω₀) + ∫₀ᵗ L }` with free initial point.
pub fn hj_value(
    f: &PotentialSpec,
    h: &dyn Terminal,
    t: f64,
    y: &[f64],
    eps: f64,
    s: usize,
) -> Result<HjResult> {
    check_eps(eps)?;
    check_segments(s)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    f.check(y)?;
    let knots = vec![y.to_vec(); s + 1];
    let ds = t / s as f64;
    let solver = Solver { f, eps, ds, terminal: Some(h), opts: SolverOptions::default() };
    let out = solver.solve(knots)?;
    if !out.converged {
        let best = build_result(f, out.knots, eps, t, Method::Direct, (out.iterations, out.gradient_norm, false), Init::Constant)?;
        return Err(Error::NoConvergence { iterations: out.iterations, residual: out.gradient_norm, best: Some(Box::new(best)) });
    }
    let value = solver.objective(&out.knots)?;
    let v0 = velocities(&out.knots, ds).swap_remove(0);
    let hg = h.gradient(&out.knots[0]);
    let gap = v0.iter().zip(&hg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(HjResult {
        value,
        path: SamplePath { knots: out.knots, eps, duration: t, potential: f.clone() },
        transversality_gap: gap,
        iterations: out.iterations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DualCheck {
    pub cost: f64,
    pub sup_value: f64,
    pub best_slope: Vec<f64>,
    /// Discrete initial momentum of the interpolation.
    pub interpolation_slope: Vec<f64>,
    pub value_at_interpolation_slope: f64,
    pub slopes_checked: usize,
}

/// `sup_p {Q₁(p·)(y) − p·x}` over the given slopes plus the interpolation slope.
pub fn dual_check(
    f: &PotentialSpec,
    x: &[f64],
    y: &[f64],
    eps: f64,
    s: usize,
    slopes: &[Vec<f64>],
    exec: Exec,
) -> Result<DualCheck> {
    let interp = minimize_direct(f, x, y, eps, s, None)?;
    let ds = interp.path.ds();
    let nr = f.newton_rhs(x, eps)?;
    let p_star: Vec<f64> = (0..x.len())
        .map(|d| (interp.path.knots[1][d] - interp.path.knots[0][d]) / ds - 0.5 * ds * nr[d])
        .collect();
    let mut all = slopes.to_vec();
    all.push(p_star.clone());
    let vals = par::map(exec, &all, |p| -> Result<f64> {
        let h = Linear { slope: p.clone() };
        Ok(hj_value(f, &h, 1.0, y, eps, s)?.value - dot(p, x))
    });
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let (best_i, best) = vals
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(DualCheck {
        cost: interp.cost,
        sup_value: best,
        best_slope: all[best_i].clone(),
        interpolation_slope: p_star,
        value_at_interpolation_slope: *vals.last().expect("non-empty"),
        slopes_checked: all.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q1() -> PotentialSpec {
        PotentialSpec::quadratic(1, 1.0).unwrap()
    }

    #[test]
    fn straight_line_action_is_half() {
        let f = q1();
        for s in [2, 7, 64] {
            let p = SamplePath { knots: straight_line(&[0.0], &[1.0], s), eps: 0.0, duration: 1.0, potential: f.clone() };
            assert!((action(&p).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_at_critical_point_costs_nothing() {
        let f = PotentialSpec::quadratic(2, 1.0).unwrap();
        let p = SamplePath { knots: vec![vec![0.0, 0.0]; 9], eps: 3.0, duration: 1.0, potential: f };
        assert_eq!(action(&p).unwrap(), 0.0);
    }

    #[test]
    fn geodesic_case() {
        let f = PotentialSpec::quadratic(2, 1.0).unwrap();
        let r = minimize_direct(&f, &[0.0, 0.0], &[1.0, 0.0], 0.0, 64, None).unwrap();
        assert!((r.cost - 0.5).abs() < 1e-6);
        let line = straight_line(&[0.0, 0.0], &[1.0, 0.0], 64);
        for (a, b) in r.path.knots.iter().zip(&line) {
            assert!((a[0] - b[0]).abs() < 1e-4 && (a[1] - b[1]).abs() < 1e-4);
        }
    }

    #[test]
    fn line_segment_outside_domain_is_rejected() {
        let f = PotentialSpec::log_cos(1.0, 1.0).unwrap().with_domain(vec![(-1.0, 1.0)]).unwrap();
        assert!(minimize_direct(&f, &[0.5], &[0.9], 1.0, 16, None).is_ok());
        let f = PotentialSpec::custom(
            "annulus",
            2,
            std::sync::Arc::new(Annulus),
        )
        .unwrap();
        assert!(matches!(
            minimize_direct(&f, &[-1.0, 0.0], &[1.0, 0.0], 0.1, 16, None),
            Err(Error::LineSegmentExitsDomain)
        ));
    }

    struct Annulus;
    impl crate::potential::CustomPotential for Annulus {
        fn value(&self, x: &[f64]) -> f64 {
            0.5 * dot(x, x)
        }
        fn domain_contains(&self, x: &[f64]) -> bool {
            dot(x, x) > 0.25
        }
    }

    #[test]
    fn at_interpolates_smooth_paths() {
        let f = q1();
        let knots: Vec<Vec<f64>> = (0..=20).map(|k| vec![(k as f64 / 20.0).powi(3)]).collect();
        let p = SamplePath { knots, eps: 0.0, duration: 1.0, potential: f };
        assert!((p.at(0.333)[0] - 0.333f64.powi(3)).abs() < 1e-14);
        assert_eq!(p.at(1.0)[0], 1.0);
    }

    #[test]
    fn shooting_free_motion() {
        let f = PotentialSpec::neg_log(1.0).unwrap();
        let r = solve_shooting(&f, &[0.5], &[2.0], 0.0, 32).unwrap();
        for k in 0..=32 {
            let s = k as f64 / 32.0;
            assert!((r.path.knots[k][0] - (0.5 + 1.5 * s)).abs() < 1e-12);
        }
        for h in &r.hamiltonian {
            assert!((h - 1.125).abs() < 1e-10);
        }
    }

    #[test]
    fn hj_zero_data() {
        let f = q1();
        let h = Linear { slope: vec![0.0] };
        let r = hj_value(&f, &h, 0.7, &[0.4], 0.0, 32).unwrap();
        assert!(r.value.abs() < 1e-14);
        assert!(r.path.knots.iter().all(|k| (k[0] - 0.4).abs() < 1e-12));
    }
}
