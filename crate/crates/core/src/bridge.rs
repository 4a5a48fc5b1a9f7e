//! Discrete Schrödinger problem on the circle.
//!
//! The reference kernel is the exact discrete heat kernel `P_ε = exp(εΔ_h)`.
//! Potentials `a = log f`, `b = log g` are computed by log-domain Sinkhorn
//! iterations. The entropic interpolation is `μ_s = P_{εs}e^a · P_{ε(1−s)}e^b`
//! with velocity potential `Φ_s = ε log P_{ε(1−s)}e^b − ε log P_{εs}e^a`.
//!
//! The entropic cost is `a_ent = 2 Sch − ε(Ent μ + Ent ν)`, the value for
//! which the dynamic action and the Kantorovich identity agree.

use serde::Serialize;
use serde_json::json;

use crate::ineq::InequalityReport;
use crate::io::Table;
use crate::measure::{cell_centers, grad_centered, laplacian, velocity_potential, GridMeasure, HeatOperator};
use crate::par::{self, Exec};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct BridgePotentials {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub eps: f64,
    pub marginal_error: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SinkhornOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000 }
    }
}

fn same_grid(mu: &GridMeasure, nu: &GridMeasure) -> Result<usize> {
    if mu.n_cells() != nu.n_cells() {
        return Err(Error::DimensionMismatch { expected: mu.n_cells(), got: nu.n_cells() });
    }
    Ok(mu.n_cells())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sinkhorn(mu: &GridMeasure, nu: &GridMeasure, eps: f64, opts: SinkhornOptions) -> Result<BridgePotentials> {
    let n = same_grid(mu, nu)?;
    check_eps(eps)?;
    let op = HeatOperator::new(n)?;
    let row = op.kernel_row(eps);
    if row.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::KernelDegenerate(format!("kernel has non-positive entries at eps = {eps}, N = {n}")));
    }
    let lmu: Vec<f64> = mu.values().iter().map(|v| v.ln()).collect();
    let lnu: Vec<f64> = nu.values().iter().map(|v| v.ln()).collect();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut err = f64::INFINITY;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let pb = op.log_apply_exp(&b, eps)?;
        a = lmu.iter().zip(&pb).map(|(l, p)| l - p).collect();
        let pa = op.log_apply_exp(&a, eps)?;
        b = lnu.iter().zip(&pa).map(|(l, p)| l - p).collect();
        let pb = op.log_apply_exp(&b, eps)?;
        let fit: Vec<f64> = a.iter().zip(&pb).map(|(x, y)| x + y).collect();
        err = sup_diff(&fit, &lmu);
        if err <= opts.tol {
            break;
        }
    }
    let c = (a.iter().sum::<f64>() - b.iter().sum::<f64>()) / (2.0 * n as f64);
    a.iter_mut().for_each(|v| *v -= c);
    b.iter_mut().for_each(|v| *v += c);
    let pots = BridgePotentials { a, b, eps, marginal_error: err, iterations: it };
    if err > opts.tol {
        return Err(Error::SinkhornNoConvergence { iterations: it, best: Box::new(pots) });
    }
    let (em, en) = marginal_errors(&pots, mu, nu)?;
    Ok(BridgePotentials { marginal_error: em.max(en), ..pots })
}

/// Sup-norm log-errors of both marginals of `π`.
pub fn marginal_errors(pots: &BridgePotentials, mu: &GridMeasure, nu: &GridMeasure) -> Result<(f64, f64)> {
    let op = HeatOperator::new(same_grid(mu, nu)?)?;
    let pb = op.log_apply_exp(&pots.b, pots.eps)?;
    let pa = op.log_apply_exp(&pots.a, pots.eps)?;
    let em = (0..mu.n_cells()).map(|i| (pots.a[i] + pb[i] - mu.values()[i].ln()).abs()).fold(0.0, f64::max);
    let en = (0..nu.n_cells()).map(|i| (pots.b[i] + pa[i] - nu.values()[i].ln()).abs()).fold(0.0, f64::max);
    Ok((em, en))
}

/// `ε H(π | R₀₁) = ε Σ π_ij (a_i + b_j)` using the marginals of `π`.
pub fn schrodinger_cost(pots: &BridgePotentials) -> Result<f64> {
    let n = pots.a.len();
    let op = HeatOperator::new(n)?;
    let dx = 1.0 / n as f64;
    let pb = op.log_apply_exp(&pots.b, pots.eps)?;
    let pa = op.log_apply_exp(&pots.a, pots.eps)?;
    let rows: f64 = (0..n).map(|i| (pots.a[i] + pb[i]).exp() * pots.a[i]).sum();
    let cols: f64 = (0..n).map(|j| (pots.b[j] + pa[j]).exp() * pots.b[j]).sum();
    Ok(pots.eps * (rows + cols) * dx)
}

/// `2 Sch − ε (Ent μ + Ent ν)`.
pub fn a_ent_from(sch: f64, eps: f64, ent_mu: f64, ent_nu: f64) -> f64 {
    2.0 * sch - eps * (ent_mu + ent_nu)
}

#[derive(Clone, Debug)]
pub struct EntropicInterpolation {
    pub s_grid: Vec<f64>,
    pub measures: Vec<GridMeasure>,
    /// Scalar potentials `Φ_s` per cell.
    pub potentials: Vec<Vec<f64>>,
    /// Centred gradients `∂_xΦ_s`.
    pub velocities: Vec<Vec<f64>>,
    pub eps: f64,
    /// Largest renormalization applied to a snapshot.
    pub max_mass_correction: f64,
}

pub fn entropic_interpolation(pots: &BridgePotentials, s: usize, exec: Exec) -> Result<EntropicInterpolation> {
    if s < 2 {
        return Err(Error::InvalidInput(format!("need S >= 2, got {s}")));
    }
    let n = pots.a.len();
    let op = HeatOperator::new(n)?;
    let eps = pots.eps;
    let snaps = par::map_range(exec, s + 1, |k| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let sk = k as f64 / s as f64;
        let lu = op.log_apply_exp(&pots.a, eps * sk)?;
        let lw = op.log_apply_exp(&pots.b, eps * (1.0 - sk))?;
        let vals: Vec<f64> = lu.iter().zip(&lw).map(|(u, w)| (u + w).exp()).collect();
        let mass = vals.iter().sum::<f64>() / n as f64;
        let phi = lw.iter().zip(&lu).map(|(w, u)| eps * (w - u)).collect();
        Ok((vals.into_iter().map(|v| v / mass).collect(), phi, (mass - 1.0).abs()))
    });
    let mut measures = Vec::with_capacity(s + 1);
    let mut potentials = Vec::with_capacity(s + 1);
    let mut velocities = Vec::with_capacity(s + 1);
    let mut corr: f64 = 0.0;
    for r in snaps {
        let (v, phi, c) = r?;
        measures.push(GridMeasure::from_positive(v)?);
        velocities.push(grad_centered(&phi));
        potentials.push(phi);
        corr = corr.max(c);
    }
    Ok(EntropicInterpolation {
        s_grid: (0..=s).map(|k| k as f64 / s as f64).collect(),
        measures,
        potentials,
        velocities,
        eps,
        max_mass_correction: corr,
    })
}

impl EntropicInterpolation {
    pub fn segments(&self) -> usize {
        self.s_grid.len() - 1
    }

    /// Copy with `Φ` replaced by `−Φ`.
    pub fn with_flipped_potential(&self) -> Self {
        let mut c = self.clone();
        for p in c.potentials.iter_mut().chain(c.velocities.iter_mut()) {
            p.iter_mut().for_each(|v| *v = -*v);
        }
        c
    }

    /// One row per `(s, cell)`: `s, cell_center, density, phi`.
    pub fn table(&self) -> Table {
        let n = self.measures[0].n_cells();
        let centers = cell_centers(n);
        let mut rows = Vec::with_capacity(self.s_grid.len() * n);
        for (k, &s) in self.s_grid.iter().enumerate() {
            for i in 0..n {
                rows.push(vec![s, centers[i], self.measures[k].values()[i], self.potentials[k][i]]);
            }
        }
        Table { columns: vec!["s".into(), "cell_center".into(), "density".into(), "phi".into()], rows }
    }

    /// Entropies along the interpolation.
    pub fn entropies(&self) -> Vec<f64> {
        self.measures.iter().map(|m| m.entropy()).collect()
    }
}

fn weighted_sq(g: &[f64], mu: &GridMeasure) -> f64 {
    g.iter().zip(mu.values()).map(|(a, m)| a * a * m).sum::<f64>() * mu.dx()
}

fn log_grad(mu: &GridMeasure) -> Vec<f64> {
    grad_centered(&mu.values().iter().map(|v| v.ln()).collect::<Vec<_>>())
}

/// Trapezoid in `s` of `½Σ(∂_xΦ)²μΔx + (ε²/2)Σ(∂_x log μ)²μΔx`.
pub fn dynamic_action(interp: &EntropicInterpolation) -> f64 {
    let e2 = interp.eps * interp.eps;
    let dens: Vec<f64> = interp
        .measures
        .iter()
        .zip(&interp.velocities)
        .map(|(m, v)| 0.5 * weighted_sq(v, m) + 0.5 * e2 * weighted_sq(&log_grad(m), m))
        .collect();
    trapezoid(&dens, 1.0 / interp.segments() as f64)
}

fn trapezoid(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

#[derive(Clone, Debug, Serialize)]
pub struct CostBundle {
    pub sch: f64,
    pub a_ent: f64,
    pub dynamic_action: f64,
    pub dual_value: f64,
    pub ent_mu: f64,
    pub ent_nu: f64,
    pub eps: f64,
    pub n_cells: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub sinkhorn_iters: usize,
    pub marginal_error: f64,
}

/// All three routes to the entropic cost.
pub fn entropic_cost(mu: &GridMeasure, nu: &GridMeasure, pots: &BridgePotentials, s: usize, exec: Exec) -> Result<CostBundle> {
    let sch = schrodinger_cost(pots)?;
    let (ent_mu, ent_nu) = (mu.entropy(), nu.entropy());
    let interp = entropic_interpolation(pots, s, exec)?;
    Ok(CostBundle {
        sch,
        a_ent: a_ent_from(sch, pots.eps, ent_mu, ent_nu),
        dynamic_action: dynamic_action(&interp),
        dual_value: dual_value(pots, mu, nu, &pots.b)?,
        ent_mu,
        ent_nu,
        eps: pots.eps,
        n_cells: mu.n_cells(),
        s,
        sinkhorn_iters: pots.iterations,
        marginal_error: pots.marginal_error,
    })
}

/// `ε(Σ log h ν Δx − Σ log(P_ε h) μ Δx)` for `log h` given.
pub fn dual_value(pots: &BridgePotentials, mu: &GridMeasure, nu: &GridMeasure, log_h: &[f64]) -> Result<f64> {
    let op = HeatOperator::new(same_grid(mu, nu)?)?;
    let ph = op.log_apply_exp(log_h, pots.eps)?;
    let dx = mu.dx();
    let t1: f64 = log_h.iter().zip(nu.values()).map(|(h, v)| h * v).sum::<f64>() * dx;
    let t2: f64 = ph.iter().zip(mu.values()).map(|(h, m)| h * m).sum::<f64>() * dx;
    Ok(pots.eps * (t1 - t2))
}

#[derive(Clone, Debug, Serialize)]
pub struct KantorovichCheck {
    pub dual_value: f64,
    /// `½ a_ent + (ε/2)(Ent ν − Ent μ)`.
    pub target: f64,
    pub gap: f64,
    pub perturbed_values: Vec<f64>,
    pub sup_property: bool,
}

/// Dual value at the optimal `h = g`, the identity, and five perturbations `g e^δ`.
pub fn kantorovich_dual(pots: &BridgePotentials, mu: &GridMeasure, nu: &GridMeasure, bundle: &CostBundle) -> Result<KantorovichCheck> {
    let dv = dual_value(pots, mu, nu, &pots.b)?;
    let target = 0.5 * bundle.a_ent + 0.5 * pots.eps * (bundle.ent_nu - bundle.ent_mu);
    let centers = cell_centers(mu.n_cells());
    let tau = 2.0 * std::f64::consts::PI;
    let deltas: [&dyn Fn(f64) -> f64; 5] = [
        &|x| 0.1 * (tau * x).cos(),
        &|x| 0.1 * (tau * x).sin(),
        &|x| 0.05 * (2.0 * tau * x).cos(),
        &|x| 0.2 * (tau * x + 1.0).cos(),
        &|x| 0.02 * (3.0 * tau * x).sin() + 0.03 * (tau * x).cos(),
    ];
    let mut perturbed = Vec::with_capacity(5);
    for d in deltas {
        let lh: Vec<f64> = pots.b.iter().zip(&centers).map(|(b, &x)| b + d(x)).collect();
        perturbed.push(dual_value(pots, mu, nu, &lh)?);
    }
    Ok(KantorovichCheck {
        dual_value: dv,
        target,
        gap: (dv - target).abs(),
        sup_property: perturbed.iter().all(|&v| v < dv),
        perturbed_values: perturbed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonResidual {
    pub max_residual: f64,
    /// `max_s Σ|r_s| μ_s Δx`.
    pub weighted_max: f64,
    pub per_s: Vec<f64>,
}

/// `∂_sΦ + ½(∂_xΦ)² − ε²(½(∂_x log μ)² − Δ_hμ/μ)` at interior s-knots.
pub fn newton_residual(interp: &EntropicInterpolation) -> Result<NewtonResidual> {
    let s = interp.segments();
    if s < 8 {
        return Err(Error::InvalidInput(format!("need S >= 8, got {s}")));
    }
    let ds = 1.0 / s as f64;
    let e2 = interp.eps * interp.eps;
    let mut per_s = vec![0.0; s + 1];
    let mut weighted: f64 = 0.0;
    for k in 1..s {
        let mu = &interp.measures[k];
        let lg = log_grad(mu);
        let lap = laplacian(mu.values());
        let g = &interp.velocities[k];
        let mut sup: f64 = 0.0;
        let mut w = 0.0;
        for i in 0..mu.n_cells() {
            let dphi = (interp.potentials[k + 1][i] - interp.potentials[k - 1][i]) / (2.0 * ds);
            let m = mu.values()[i];
            let r = dphi + 0.5 * g[i] * g[i] - e2 * (0.5 * lg[i] * lg[i] - lap[i] / m);
            sup = sup.max(r.abs());
            w += r.abs() * m;
        }
        per_s[k] = sup;
        weighted = weighted.max(w * mu.dx());
    }
    Ok(NewtonResidual { max_residual: per_s.iter().cloned().fold(0.0, f64::max), weighted_max: weighted, per_s })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservedSeries {
    pub values: Vec<f64>,
    pub drift: f64,
}

/// `E_s = Σ(∂_xΦ)²μΔx − ε²Σ(∂_x log μ)²μΔx`.
pub fn conserved_quantity(interp: &EntropicInterpolation) -> ConservedSeries {
    let e2 = interp.eps * interp.eps;
    let values: Vec<f64> = interp
        .measures
        .iter()
        .zip(&interp.velocities)
        .map(|(m, v)| weighted_sq(v, m) - e2 * weighted_sq(&log_grad(m), m))
        .collect();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    ConservedSeries { values, drift: max - min }
}

/// Mean over cells with `μ ≥ 1e-3 max μ` of `|v − (Φ_{i+1} − Φ_i)/Δx|` at interior knots,
/// `v` the staggered velocity from the continuity equation.
pub fn continuity_error(interp: &EntropicInterpolation) -> Result<f64> {
    let s = interp.segments();
    let ds = 1.0 / s as f64;
    let mut worst: f64 = 0.0;
    for k in 1..s {
        let mu = &interp.measures[k];
        let n = mu.n_cells();
        let rate: Vec<f64> = (0..n)
            .map(|i| (interp.measures[k + 1].values()[i] - interp.measures[k - 1].values()[i]) / (2.0 * ds))
            .collect();
        let mean = rate.iter().sum::<f64>() / n as f64;
        let rate: Vec<f64> = rate.iter().map(|r| r - mean).collect();
        let vf = velocity_potential(mu, &rate)?;
        let phi = &interp.potentials[k];
        let top = mu.values().iter().cloned().fold(0.0, f64::max);
        let mut err = 0.0;
        let mut mass = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            let me = 0.5 * (mu.values()[i] + mu.values()[j]);
            if me >= 1e-3 * top {
                let grad = (phi[j] - phi[i]) * n as f64;
                err += (vf.velocity[i] - grad).abs() * me;
                mass += me;
            }
        }
        worst = worst.max(err / mass);
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReports {
    /// Convexity of `s ↦ Ent(μ_s)`.
    pub entropy: InequalityReport,
    /// Concavity of `s ↦ exp(−Ent(μ_s)/n)`.
    pub exp_entropy: InequalityReport,
}

/// Second differences in `s`, divided by `Δs²`.
pub fn convexity_suite(interp: &EntropicInterpolation, n_param: f64) -> ConvexityReports {
    let s = interp.segments();
    let ds = 1.0 / s as f64;
    let ent = interp.entropies();
    let ex: Vec<f64> = ent.iter().map(|e| (-e / n_param).exp()).collect();
    let d2 = |v: &[f64], k: usize| (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (ds * ds);
    let min_ent = (1..s).map(|k| d2(&ent, k)).fold(f64::INFINITY, f64::min);
    let max_ex = (1..s).map(|k| d2(&ex, k)).fold(f64::NEG_INFINITY, f64::max);
    let params = json!({ "eps": interp.eps, "n": n_param, "rho": 0.0 });
    let disc = json!({ "S": s, "n_cells": interp.measures[0].n_cells() });
    ConvexityReports {
        entropy: InequalityReport::new("entropy_convexity", -min_ent, 0.0, params.clone(), disc.clone()),
        exp_entropy: InequalityReport::new("exp_entropy_concavity", max_ex, 0.0, params, disc),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BridgeContraction {
    pub report: InequalityReport,
    pub a_flowed: f64,
    pub a_initial: f64,
    pub correction: f64,
}

/// Entropic cost from fresh Sinkhorn potentials.
pub fn entropic_cost_static(mu: &GridMeasure, nu: &GridMeasure, eps: f64) -> Result<(f64, BridgePotentials)> {
    let pots = sinkhorn(mu, nu, eps, SinkhornOptions::default())?;
    let sch = schrodinger_cost(&pots)?;
    Ok((a_ent_from(sch, eps, mu.entropy(), nu.entropy()), pots))
}

/// `A(P_tμ, P_tν) ≤ A(μ,ν) − ∫₀ᵗ (Ent(P_uμ) − Ent(P_uν))² du`.
pub fn contraction_check(mu: &GridMeasure, nu: &GridMeasure, eps: f64, t: f64, quad_steps: usize, exec: Exec) -> Result<BridgeContraction> {
    let n = same_grid(mu, nu)?;
    if !(t > 0.0) || quad_steps == 0 {
        return Err(Error::InvalidInput("need t > 0 and quad_steps >= 1".into()));
    }
    let op = HeatOperator::new(n)?;
    let flowed = |m: &GridMeasure, u: f64| GridMeasure::from_positive(op.apply(m.values(), u));
    let diffs = par::map_range(exec, quad_steps + 1, |j| -> Result<f64> {
        let u = t * j as f64 / quad_steps as f64;
        let d = flowed(mu, u)?.entropy() - flowed(nu, u)?.entropy();
        Ok(d * d)
    });
    let diffs: Vec<f64> = diffs.into_iter().collect::<Result<_>>()?;
    let correction = trapezoid(&diffs, t / quad_steps as f64);
    let (a0, _) = entropic_cost_static(mu, nu, eps)?;
    let (at, _) = entropic_cost_static(&flowed(mu, t)?, &flowed(nu, t)?, eps)?;
    let report = InequalityReport::new(
        "entropic_contraction",
        at,
        a0 - correction,
        json!({ "rho": 0.0, "n": 1.0, "eps": eps, "t": t, "correction": correction }),
        json!({ "n_cells": n, "quad_steps": quad_steps }),
    );
    Ok(BridgeContraction { report, a_flowed: at, a_initial: a0, correction })
}

/// `W₂` by the quantile formula with the circle cut at 0. Identical measures
/// give 0 without the cut condition.
pub fn w2_oracle(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    same_grid(mu, nu)?;
    if mu.values() == nu.values() {
        return Ok(0.0);
    }
    for m in [mu, nu] {
        let out = m.mass_outside(0.05, 0.95);
        if out > 1e-6 {
            return Err(Error::CutViolation(out));
        }
    }
    const Q: usize = 10_000;
    let qm = quantiles(mu, Q);
    let qn = quantiles(nu, Q);
    let w2: f64 = qm.iter().zip(&qn).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / Q as f64;
    Ok(w2.sqrt())
}

/// Inverse of the piecewise-linear CDF at midpoints `(m + ½)/q`.
fn quantiles(m: &GridMeasure, q: usize) -> Vec<f64> {
    let n = m.n_cells();
    let dx = m.dx();
    let mut cdf = vec![0.0; n + 1];
    for i in 0..n {
        cdf[i + 1] = cdf[i] + m.values()[i] * dx;
    }
    let total = cdf[n];
    (0..q)
        .map(|j| {
            let target = (j as f64 + 0.5) / q as f64 * total;
            let i = cdf.partition_point(|&c| c <= target).clamp(1, n) - 1;
            let w = (target - cdf[i]) / (cdf[i + 1] - cdf[i]);
            (i as f64 + w) * dx
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub sch: f64,
    pub a_ent: f64,
    pub w2sq_over_4: f64,
    pub gap: f64,
    pub sinkhorn_iters: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub gap_decreasing: bool,
}

impl SweepTable {
    pub fn table(&self) -> Table {
        Table {
            columns: ["eps", "sch", "a_ent", "w2sq_over_4", "gap", "sinkhorn_iters"].iter().map(|s| s.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| vec![r.eps, r.sch, r.a_ent, r.w2sq_over_4, r.gap, r.sinkhorn_iters as f64])
                .collect(),
        }
    }
}

pub fn epsilon_sweep(mu: &GridMeasure, nu: &GridMeasure, eps_list: &[f64], exec: Exec) -> Result<SweepTable> {
    let n = same_grid(mu, nu)?;
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps_list must be positive and strictly decreasing".into()));
    }
    let smallest = *eps_list.last().expect("non-empty");
    if smallest * ((n * n) as f64) < 50.0 {
        return Err(Error::KernelDegenerate(format!("eps N^2 = {} < 50", smallest * (n * n) as f64)));
    }
    let w2 = w2_oracle(mu, nu)?;
    let target = 0.25 * w2 * w2;
    let rows = par::map(exec, eps_list, |&eps| -> Result<SweepRow> {
        let pots = sinkhorn(mu, nu, eps, SinkhornOptions::default())?;
        let sch = schrodinger_cost(&pots)?;
        Ok(SweepRow {
            eps,
            sch,
            a_ent: a_ent_from(sch, eps, mu.entropy(), nu.entropy()),
            w2sq_over_4: target,
            gap: (sch - target).abs(),
            sinkhorn_iters: pots.iterations,
        })
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_>>()?;
    let gap_decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(SweepTable { rows, gap_decreasing })
}
