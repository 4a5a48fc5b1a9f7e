//! Probability densities on `N` periodic cells of the unit circle.
//!
//! Densities are taken with respect to the normalized length, so the uniform
//! density is identically 1 and cell masses are `values[i] / N`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::io::Table;
use crate::{Error, Result};

pub const FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    values: Vec<f64>,
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!("n_cells must be a power of two >= 2, got {n}")));
    }
    Ok(())
}

pub fn cell_centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

impl GridMeasure {
    /// Samples at cell centres, clamps at the floor and renormalizes.
    pub fn from_density(f: impl Fn(f64) -> f64, n: usize) -> Result<Self> {
        check_n(n)?;
        Self::from_samples(cell_centers(n).into_iter().map(f).collect())
    }

    /// Same normalization rule applied to given cell samples.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        check_n(samples.len())?;
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("density samples".into()));
        }
        let dx = 1.0 / samples.len() as f64;
        let mass: f64 = samples.iter().map(|v| v.max(0.0)).sum::<f64>() * dx;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NonPositive);
        }
        let clamped: Vec<f64> = samples.iter().map(|v| (v.max(0.0) / mass).max(FLOOR)).collect();
        let m2: f64 = clamped.iter().sum::<f64>() * dx;
        Ok(Self { values: clamped.into_iter().map(|v| v / m2).collect() })
    }

    /// Strictly positive values, renormalized without flooring.
    pub fn from_positive(values: Vec<f64>) -> Result<Self> {
        check_n(values.len())?;
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NonPositive);
        }
        let mass: f64 = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self { values: values.into_iter().map(|v| v / mass).collect() })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self { values: vec![1.0; n] })
    }

    /// `exp(κ(cos 2π(x − c) − 1))`, normalized.
    pub fn von_mises(n: usize, center: f64, kappa: f64) -> Result<Self> {
        Self::from_density(|x| (kappa * ((2.0 * PI * (x - center)).cos() - 1.0)).exp(), n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    /// `Σ μ log μ Δx`.
    pub fn entropy(&self) -> f64 {
        self.values.iter().map(|&v| v * v.ln()).sum::<f64>() * self.dx()
    }

    /// `(1/(p−1)) Σ μ^p Δx`.
    pub fn renyi_entropy(&self, p: f64) -> Result<f64> {
        if p == 1.0 || !(p > 0.0) {
            return Err(Error::BadOrder);
        }
        Ok(self.values.iter().map(|v| v.powf(p)).sum::<f64>() * self.dx() / (p - 1.0))
    }

    /// Mass of cells whose centres lie outside `[lo, hi]`.
    pub fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        cell_centers(self.n_cells())
            .iter()
            .zip(&self.values)
            .filter(|(c, _)| **c < lo || **c > hi)
            .map(|(_, v)| v)
            .sum::<f64>()
            * self.dx()
    }

    /// Columns `cell_center, density`.
    pub fn table(&self) -> Table {
        Table {
            columns: vec!["cell_center".into(), "density".into()],
            rows: cell_centers(self.n_cells()).into_iter().zip(&self.values).map(|(c, &v)| vec![c, v]).collect(),
        }
    }
}

/// `P_t = exp(t Δ_h)` for the periodic three-point Laplacian, applied spectrally.
#[derive(Clone)]
pub struct HeatOperator {
    n: usize,
    eigenvalues: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for HeatOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatOperator").field("n", &self.n).finish()
    }
}

impl HeatOperator {
    pub fn new(n: usize) -> Result<Self> {
        check_n(n)?;
        let dx2 = 1.0 / (n * n) as f64;
        let eigenvalues = (0..n).map(|k| -(2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()) / dx2).collect();
        let mut planner = FftPlanner::new();
        Ok(Self { n, eigenvalues, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn apply(&self, values: &[f64], t: f64) -> Vec<f64> {
        assert_eq!(values.len(), self.n, "length mismatch");
        if t == 0.0 {
            return values.to_vec();
        }
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for (z, &lam) in buf.iter_mut().zip(&self.eigenvalues) {
            *z *= (t * lam).exp() * scale;
        }
        self.inverse.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Kernel density `K(d)` with `P_t f(x_i) = Σ_j K(i − j) f_j Δx`.
    pub fn kernel_row(&self, t: f64) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        e[0] = self.n as f64;
        self.apply(&e, t)
    }

    /// `log P_t e^x`, stabilized by the maximum of `x`.
    pub fn log_apply_exp(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = self.apply(&x.iter().map(|v| (v - m).exp()).collect::<Vec<_>>(), t);
        w.into_iter()
            .map(|v| {
                if v > 0.0 {
                    Ok(m + v.ln())
                } else {
                    Err(Error::KernelDegenerate(format!("non-positive heat image {v:e} at t = {t}")))
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct DiffOps {
    pub grad: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn grad_centered(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let h = 2.0 / n as f64;
    (0..n).map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) / h).collect()
}

pub fn laplacian(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let nn = (n * n) as f64;
    (0..n).map(|i| (v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) * nn).collect()
}

pub fn diff_ops(v: &[f64]) -> DiffOps {
    let grad = grad_centered(v);
    let gamma = grad.iter().map(|g| g * g).collect();
    DiffOps { grad, laplacian: laplacian(v), gamma }
}

/// Gradient velocity solving the continuity equation with staggered fluxes.
#[derive(Clone, Debug)]
pub struct VelocityField {
    /// Flux at the edge between cell `i` and `i + 1`.
    pub flux: Vec<f64>,
    /// `J / μ` at the same edges, `μ` averaged from the two cells.
    pub velocity: Vec<f64>,
    /// Sup-norm of `(J_{i+½} − J_{i−½})/Δx + ∂_tμ_i`.
    pub residual: f64,
}

/// Inverts `∂_tμ = −∂_x(μ ∇Φ)` under the gradient constraint `∮ ∇Φ = 0`.
pub fn velocity_potential(mu: &GridMeasure, dmu_dt: &[f64]) -> Result<VelocityField> {
    let n = mu.n_cells();
    if dmu_dt.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: dmu_dt.len() });
    }
    let dx = mu.dx();
    let total: f64 = dmu_dt.iter().sum::<f64>() * dx;
    if total.abs() > 1e-10 {
        return Err(Error::MassNotConserved(total));
    }
    let mu_e: Vec<f64> = (0..n).map(|i| 0.5 * (mu.values[i] + mu.values[(i + 1) % n])).collect();
    let mut j0 = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc -= dmu_dt[i] * dx;
        j0[i] = acc;
    }
    let c = -j0.iter().zip(&mu_e).map(|(j, m)| j / m).sum::<f64>() / mu_e.iter().map(|m| 1.0 / m).sum::<f64>();
    let flux: Vec<f64> = j0.iter().map(|j| j + c).collect();
    let velocity = flux.iter().zip(&mu_e).map(|(j, m)| j / m).collect();
    let residual = (0..n)
        .map(|i| ((flux[i] - flux[(i + n - 1) % n]) / dx + dmu_dt[i]).abs())
        .fold(0.0, f64::max);
    Ok(VelocityField { flux, velocity, residual })
}

#[derive(Clone, Debug)]
pub enum GridFlowKind {
    Heat,
    /// Potential `V` sampled at cell centres.
    FokkerPlanck { v: Vec<f64> },
    PorousMedia { p: f64 },
}

impl GridFlowKind {
    pub fn fokker_planck(v: impl Fn(f64) -> f64, n: usize) -> Self {
        GridFlowKind::FokkerPlanck { v: cell_centers(n).into_iter().map(v).collect() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GridFlowKind::Heat => "heat",
            GridFlowKind::FokkerPlanck { .. } => "fokker_planck",
            GridFlowKind::PorousMedia { .. } => "porous_media",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub functional: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub non_increasing: bool,
    pub max_increase: f64,
}

impl LyapunovReport {
    /// Columns `t, F, I`.
    pub fn table(&self) -> Table {
        Table {
            columns: vec!["t".into(), "F".into(), "I".into()],
            rows: (0..self.times.len()).map(|k| vec![self.times[k], self.values[k], self.dissipation[k]]).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridFlowResult {
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<GridMeasure>,
    pub lyapunov: LyapunovReport,
    pub positivity_clamped: bool,
    pub max_mass_error: f64,
}

struct Flux<'a> {
    kind: &'a GridFlowKind,
    n: usize,
    dx: f64,
}

impl Flux<'_> {
    /// Edge fluxes `J_{i+½}`.
    fn flux(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let k = (i + 1) % n;
                match self.kind {
                    GridFlowKind::Heat => -(mu[k] - mu[i]) / self.dx,
                    GridFlowKind::FokkerPlanck { v } => {
                        let m = (-(v[i] + v[k]) / 2.0).exp();
                        -m * (mu[k] * v[k].exp() - mu[i] * v[i].exp()) / self.dx
                    }
                    GridFlowKind::PorousMedia { p } => -(mu[k].powf(*p) - mu[i].powf(*p)) / self.dx,
                }
            })
            .collect()
    }

    fn functional(&self, mu: &[f64]) -> f64 {
        let ent = |m: &[f64]| m.iter().map(|&v| v * v.ln()).sum::<f64>() * self.dx;
        match self.kind {
            GridFlowKind::Heat => ent(mu),
            GridFlowKind::FokkerPlanck { v } => ent(mu) + mu.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.dx,
            GridFlowKind::PorousMedia { p } => mu.iter().map(|v| v.powf(*p)).sum::<f64>() * self.dx / (p - 1.0),
        }
    }

    /// First variation `δF/δμ` per cell.
    fn variation(&self, mu: &[f64]) -> Vec<f64> {
        match self.kind {
            GridFlowKind::Heat => mu.iter().map(|v| v.ln() + 1.0).collect(),
            GridFlowKind::FokkerPlanck { v } => mu.iter().zip(v).map(|(m, w)| m.ln() + 1.0 + w).collect(),
            GridFlowKind::PorousMedia { p } => mu.iter().map(|v| p / (p - 1.0) * v.powf(p - 1.0)).collect(),
        }
    }

    /// `−dF/dt = −Σ_e J_e (w_{i+1} − w_i)`.
    fn dissipation(&self, mu: &[f64]) -> f64 {
        let j = self.flux(mu);
        let w = self.variation(mu);
        -(0..self.n).map(|i| j[i] * (w[(i + 1) % self.n] - w[i])).sum::<f64>()
    }

    fn diffusivity(&self, mu: &[f64]) -> f64 {
        let n = self.n;
        match self.kind {
            GridFlowKind::Heat => 1.0,
            GridFlowKind::FokkerPlanck { v } => (0..n)
                .map(|i| {
                    let l = (-(v[i] + v[(i + n - 1) % n]) / 2.0).exp();
                    let r = (-(v[i] + v[(i + 1) % n]) / 2.0).exp();
                    0.5 * (l + r) * v[i].exp()
                })
                .fold(0.0, f64::max),
            GridFlowKind::PorousMedia { p } => p * mu.iter().map(|v| v.powf(p - 1.0)).fold(0.0, f64::max),
        }
    }
}

/// Explicit conservative integration of `∂_tμ = ∂_x(μ ∂_x δF/δμ)`.
pub fn grid_flow(kind: &GridFlowKind, mu0: &GridMeasure, t_end: f64, dt: f64, snapshot_every: usize) -> Result<GridFlowResult> {
    let n = mu0.n_cells();
    if let GridFlowKind::FokkerPlanck { v } = kind {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    if let GridFlowKind::PorousMedia { p } = kind {
        if !(*p > 0.0) || *p == 1.0 {
            return Err(Error::BadOrder);
        }
    }
    if !(dt > 0.0) || !(t_end >= 0.0) || snapshot_every == 0 {
        return Err(Error::InvalidInput("need dt > 0, t_end >= 0, snapshot_every >= 1".into()));
    }
    let dx = mu0.dx();
    let fx = Flux { kind, n, dx };
    let mut mu = mu0.values.clone();
    let steps = if t_end == 0.0 { 0 } else { ((t_end / dt) - 1e-9).ceil() as usize };
    let mut times = vec![0.0];
    let mut values = vec![fx.functional(&mu)];
    let mut dissipation = vec![fx.dissipation(&mu)];
    let mut snapshot_times = vec![0.0];
    let mut snapshots = vec![mu0.clone()];
    let mut clamped = false;
    let mut max_mass_error: f64 = 0.0;
    let mut t = 0.0;
    for k in 1..=steps {
        let t_next = if k == steps { t_end } else { k as f64 * dt };
        let h = t_next - t;
        let limit = 0.4 * dx * dx / fx.diffusivity(&mu);
        if h > limit * (1.0 + 1e-12) {
            return Err(Error::StabilityViolation { dt: h, limit });
        }
        let j = fx.flux(&mu);
        for i in 0..n {
            mu[i] -= h * (j[i] - j[(i + n - 1) % n]) / dx;
        }
        if mu.iter().any(|v| *v < FLOOR) {
            clamped = true;
            for v in mu.iter_mut() {
                *v = v.max(FLOOR);
            }
            let m: f64 = mu.iter().sum::<f64>() * dx;
            for v in mu.iter_mut() {
                *v /= m;
            }
        }
        max_mass_error = max_mass_error.max((mu.iter().sum::<f64>() * dx - 1.0).abs());
        t = t_next;
        times.push(t);
        values.push(fx.functional(&mu));
        dissipation.push(fx.dissipation(&mu));
        if k % snapshot_every == 0 || k == steps {
            snapshot_times.push(t);
            snapshots.push(GridMeasure { values: mu.clone() });
        }
    }
    let mut max_increase: f64 = 0.0;
    for k in 1..values.len() {
        max_increase = max_increase.max(values[k] - values[k - 1] - 1e-12 * (1.0 + values[k - 1].abs()));
    }
    Ok(GridFlowResult {
        snapshot_times,
        snapshots,
        lyapunov: LyapunovReport {
            functional: match kind {
                GridFlowKind::Heat => "entropy".into(),
                GridFlowKind::FokkerPlanck { .. } => "entropy_plus_potential".into(),
                GridFlowKind::PorousMedia { p } => format!("renyi_{p}"),
            },
            times,
            values,
            dissipation,
            non_increasing: max_increase <= 0.0,
            max_increase: max_increase.max(0.0),
        },
        positivity_clamped: clamped,
        max_mass_error,
    })
}

/// Largest step allowed by the explicit stability rule at the initial state.
pub fn stable_dt(kind: &GridFlowKind, mu0: &GridMeasure) -> f64 {
    let dx = mu0.dx();
    let fx = Flux { kind, n: mu0.n_cells(), dx };
    0.4 * dx * dx / fx.diffusivity(&mu0.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors() {
        let u = GridMeasure::from_density(|_| 1.0, 8).unwrap();
        assert!(u.values().iter().all(|&v| v == 1.0));
        let b = GridMeasure::von_mises(128, 0.3, 8.0).unwrap();
        assert!((b.mass() - 1.0).abs() < 1e-12);
        assert!(b.values().iter().all(|&v| v > 0.0));
        let c = GridMeasure::from_samples(vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let m = 1.0 + FLOOR / 2.0;
        assert!((c.values()[1] - FLOOR / m).abs() < 1e-27);
        assert!((c.values()[0] - 2.0 / m).abs() < 1e-15);
        assert!(matches!(GridMeasure::from_samples(vec![0.0; 4]), Err(Error::NonPositive)));
        assert!(GridMeasure::uniform(6).is_err());
    }

    #[test]
    fn entropy_examples() {
        let m = GridMeasure::from_positive(vec![1.8, 0.2]).unwrap();
        let want = (1.8 * 1.8f64.ln() + 0.2 * 0.2f64.ln()) / 2.0;
        assert!((m.entropy() - want).abs() < 1e-15);
        assert!((want - 0.3681).abs() < 1e-4);
        assert!((m.renyi_entropy(2.0).unwrap() - 1.64).abs() < 1e-14);
        assert!(matches!(m.renyi_entropy(1.0), Err(Error::BadOrder)));
        assert_eq!(GridMeasure::uniform(16).unwrap().entropy(), 0.0);
        assert_eq!(GridMeasure::uniform(16).unwrap().renyi_entropy(2.0).unwrap(), 1.0);
    }

    #[test]
    fn heat_basics() {
        let op = HeatOperator::new(32).unwrap();
        let f: Vec<f64> = cell_centers(32).iter().map(|x| (2.0 * PI * x).cos()).collect();
        assert_eq!(op.apply(&f, 0.0), f);
        let g = op.apply(&f, 0.01);
        let decay = (0.01 * op.eigenvalues()[1]).exp();
        for (a, b) in g.iter().zip(&f) {
            assert!((a - decay * b).abs() < 1e-14);
        }
        let u = op.apply(&[1.0; 32], 3.0);
        assert!(u.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(op.kernel_row(1e-3).iter().all(|&k| k > 0.0));
    }

    #[test]
    fn diff_ops_examples() {
        let c = diff_ops(&[3.0; 16]);
        assert!(c.grad.iter().chain(&c.laplacian).all(|v| *v == 0.0));
        let n = 64;
        let f: Vec<f64> = cell_centers(n).iter().map(|x| (2.0 * PI * x).cos()).collect();
        let d = diff_ops(&f);
        let lam = -(2.0 - 2.0 * (2.0 * PI / n as f64).cos()) * (n * n) as f64;
        for (l, v) in d.laplacian.iter().zip(&f) {
            assert!((l - lam * v).abs() < 1e-9);
        }
        assert!(d.gamma.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn zero_rate_gives_zero_velocity() {
        let m = GridMeasure::von_mises(32, 0.5, 3.0).unwrap();
        let v = velocity_potential(&m, &[0.0; 32]).unwrap();
        assert!(v.velocity.iter().all(|x| x.abs() < 1e-15));
        assert!(matches!(velocity_potential(&m, &[1.0; 32]), Err(Error::MassNotConserved(_))));
    }

    #[test]
    fn stability_is_enforced() {
        let m = GridMeasure::von_mises(64, 0.5, 3.0).unwrap();
        let dt = stable_dt(&GridFlowKind::Heat, &m);
        assert!(matches!(
            grid_flow(&GridFlowKind::Heat, &m, 0.01, dt * 2.0, 10),
            Err(Error::StabilityViolation { .. })
        ));
    }
}
