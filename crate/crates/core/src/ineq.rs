//! Numerical verifiers for the finite-dimensional contraction, convexity,
//! transport-entropy, concavity and EVI inequalities.

use serde::Serialize;
use serde_json::json;

use crate::flow::{evolve, flow_map};
use crate::interp::{minimize_direct, InterpolationResult};
use crate::potential::{norm, NParam, PotentialSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    PassWithWarning,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub slack: f64,
    pub pass: bool,
    pub status: Status,
    pub params: serde_json::Value,
    pub discretization: serde_json::Value,
}

impl InequalityReport {
    /// Claim `lhs ≤ rhs` with slack `1e-6 (1 + |lhs| + |rhs|)`.
    pub fn new(name: &str, lhs: f64, rhs: f64, params: serde_json::Value, discretization: serde_json::Value) -> Self {
        let margin = rhs - lhs;
        let slack = 1e-6 * (1.0 + lhs.abs() + rhs.abs());
        let status = if margin >= 0.0 {
            Status::Pass
        } else if margin >= -slack {
            Status::PassWithWarning
        } else {
            Status::Fail
        };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            slack,
            pass: status != Status::Fail,
            status,
            params,
            discretization,
        }
    }

    /// Single-line summary of the params record.
    pub fn params_string(&self) -> String {
        serde_json::to_string(&self.params).unwrap_or_default()
    }
}

/// `θ_a(s) = (1 − e^{−2as})/(1 − e^{−2a})`, equal to `s` at `a = 0`.
pub fn theta(a: f64, s: f64) -> f64 {
    if a == 0.0 {
        s
    } else {
        (-2.0 * a * s).exp_m1() / (-2.0 * a).exp_m1()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaWeights {
    pub a: f64,
    pub s: Vec<f64>,
    pub values: Vec<f64>,
}

impl ThetaWeights {
    pub fn new(a: f64, s: &[f64]) -> Self {
        Self { a, s: s.to_vec(), values: s.iter().map(|&v| theta(a, v)).collect() }
    }
}

/// `a coth a`, equal to 1 at `a = 0`.
pub fn a_coth_a(a: f64) -> f64 {
    if a.abs() < 1e-8 {
        1.0 + a * a / 3.0
    } else {
        a / a.tanh()
    }
}

/// `(1 − e^{−2ρε})/(2ε)`, equal to `ρ` at `ε = 0`.
pub fn conforti_constant(rho: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        rho
    } else {
        -(-2.0 * rho * eps).exp_m1() / (2.0 * eps)
    }
}

/// `ε(1 + e^{−ρε})/(1 − e^{−ρε})`, equal to `2/ρ` at `ε = 0`.
pub fn talagrand_constant(rho: f64, eps: f64) -> f64 {
    2.0 / rho * a_coth_a(0.5 * rho * eps)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Discretization {
    #[serde(rename = "S")]
    pub s: usize,
    pub quad_steps: usize,
    pub fd_step: f64,
    /// Flow step used to compute `S_t`.
    pub dt: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { s: 512, quad_steps: 200, fd_step: 1e-4, dt: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReports {
    /// With `e^{−ρt}` on the cost term.
    pub printed_exponent: InequalityReport,
    /// With `e^{−2ρt}` on the cost term.
    pub proof_exponent: InequalityReport,
    pub correction: f64,
}

impl ContractionReports {
    pub fn pass(&self) -> bool {
        self.printed_exponent.pass && self.proof_exponent.pass
    }
}

/// `A(S_t x, S_t y) ≤ e^{−ρt} A(x,y) − (1/n)∫₀ᵗ e^{−2ρ(t−u)}[F(S_u x) − F(S_u y)]² du`
/// in both exponent variants.
#[allow(clippy::too_many_arguments)]
pub fn check_contraction(
    f: &PotentialSpec,
    rho: f64,
    n_param: NParam,
    x: &[f64],
    y: &[f64],
    eps: f64,
    t: f64,
    disc: Discretization,
) -> Result<ContractionReports> {
    if !(t >= 0.0 && t.is_finite()) || disc.quad_steps == 0 {
        return Err(Error::InvalidInput("need t >= 0 and quad_steps >= 1".into()));
    }
    let a0 = minimize_direct(f, x, y, eps, disc.s, None)?.cost;
    let (xt, yt, correction) = if t == 0.0 {
        (x.to_vec(), y.to_vec(), 0.0)
    } else {
        let h = t / disc.quad_steps as f64;
        let tx = evolve(f, x, t, h)?;
        let ty = evolve(f, y, t, h)?;
        let mut integral = 0.0;
        let vals: Vec<f64> = (0..tx.times.len())
            .map(|k| {
                let d = f.eval(&tx.states[k])? - f.eval(&ty.states[k])?;
                Ok((-2.0 * rho * (t - tx.times[k])).exp() * d * d)
            })
            .collect::<Result<_>>()?;
        for k in 1..vals.len() {
            integral += 0.5 * (tx.times[k] - tx.times[k - 1]) * (vals[k] + vals[k - 1]);
        }
        (tx.final_state().to_vec(), ty.final_state().to_vec(), integral)
    };
    let at = minimize_direct(f, &xt, &yt, eps, disc.s, None)?.cost;
    let corr = n_param.recip() * correction;
    let params = json!({ "rho": rho, "n": n_param, "eps": eps, "t": t, "x": x, "y": y, "A_xy": a0, "correction": correction });
    let dj = json!(disc);
    Ok(ContractionReports {
        printed_exponent: InequalityReport::new("contraction[exp(-rho t)]", at, (-rho * t).exp() * a0 - corr, params.clone(), dj.clone()),
        proof_exponent: InequalityReport::new("contraction[exp(-2 rho t)]", at, (-2.0 * rho * t).exp() * a0 - corr, params, dj),
        correction,
    })
}

/// Conforti convexity along an interpolation, worst margin over `s_grid`.
pub fn check_conforti(f: &PotentialSpec, rho: f64, interp: &InterpolationResult, s_grid: &[f64]) -> Result<InequalityReport> {
    if s_grid.is_empty() {
        return Err(Error::EmptySample);
    }
    let p = &interp.path;
    let eps = p.eps;
    let a = rho * eps;
    let f0 = f.eval(&p.knots[0])?;
    let f1 = f.eval(&p.knots[p.segments()])?;
    let c = conforti_constant(rho, eps);
    let mut worst: Option<(f64, f64, f64)> = None;
    for &s in s_grid {
        let lhs = f.eval(&p.at(s))?;
        let (ts, t1s) = (theta(a, s), theta(a, 1.0 - s));
        let rhs = t1s * f0 + ts * f1 - c * ts * t1s * (interp.cost + eps * f0 + eps * f1);
        if worst.is_none_or(|(_, l, r)| rhs - lhs < r - l) {
            worst = Some((s, lhs, rhs));
        }
    }
    let (s, lhs, rhs) = worst.expect("non-empty grid");
    Ok(InequalityReport::new(
        "conforti",
        lhs,
        rhs,
        json!({ "rho": rho, "eps": eps, "x": p.knots[0], "y": p.knots[p.segments()], "worst_s": s, "A_xy": interp.cost }),
        json!({ "S": p.segments() }),
    ))
}

/// `A(x*, x) ≤ ε(1 + e^{−ρε})/(1 − e^{−ρε}) F(x)`.
pub fn check_talagrand(f: &PotentialSpec, rho: f64, x_star: &[f64], x: &[f64], eps: f64, s: usize) -> Result<InequalityReport> {
    if rho <= 0.0 {
        return Err(Error::InvalidInput("Talagrand check needs rho > 0".into()));
    }
    let v = f.eval(x_star)?;
    let g = norm(&f.grad(x_star)?);
    if v.abs() > 1e-10 || g > 1e-8 {
        return Err(Error::NormalizationError { value: v, gradient: g });
    }
    let lhs = minimize_direct(f, x_star, x, eps, s, None)?.cost;
    let rhs = talagrand_constant(rho, eps) * f.eval(x)?;
    Ok(InequalityReport::new(
        "talagrand",
        lhs,
        rhs,
        json!({ "rho": rho, "eps": eps, "x_star": x_star, "x": x }),
        json!({ "S": s }),
    ))
}

/// Concavity of `s ↦ exp(−F(ω_s)/n)` by second differences divided by `Δs²`.
pub fn check_costa(f: &PotentialSpec, n_param: NParam, interp: &InterpolationResult) -> Result<InequalityReport> {
    let p = &interp.path;
    let ds = p.ds();
    let g: Vec<f64> = p
        .knots
        .iter()
        .map(|x| Ok((-f.eval(x)? * n_param.recip()).exp()))
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0;
    for k in 1..g.len() - 1 {
        let d2 = (g[k + 1] - 2.0 * g[k] + g[k - 1]) / (ds * ds);
        if d2 > worst {
            worst = d2;
            at = k;
        }
    }
    Ok(InequalityReport::new(
        "costa",
        worst,
        0.0,
        json!({ "n": n_param, "eps": p.eps, "x": p.knots[0], "y": p.knots[p.segments()], "worst_s": at as f64 * ds }),
        json!({ "S": p.segments() }),
    ))
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EviForm {
    /// `(ρ, ∞)`-convexity.
    Rho(f64),
    /// `(0, n)`-convexity.
    Dim(f64),
}

/// `d/dt⁺ A(S_t x, y)` by Richardson-extrapolated one-sided differences.
pub fn evi_derivative(f: &PotentialSpec, x: &[f64], y: &[f64], eps: f64, disc: Discretization) -> Result<(f64, f64, f64)> {
    let a0 = minimize_direct(f, x, y, eps, disc.s, None)?;
    let h = disc.fd_step;
    let slope = |step: f64| -> Result<f64> {
        let xs = flow_map(f, x, step, step / 4.0)?;
        let a = minimize_direct(f, &xs, y, eps, disc.s, Some(&shifted(&a0.path, &xs)))?;
        Ok((a.cost - a0.cost) / step)
    };
    let d1 = slope(h)?;
    let d2 = slope(h / 2.0)?;
    let scale = d1.abs().max(d2.abs()) + 1e-8;
    if (d1 - d2).abs() > 0.1 * scale {
        return Err(Error::FdUnstable { coarse: d1, fine: d2 });
    }
    Ok((2.0 * d2 - d1, a0.cost, d1))
}

fn shifted(p: &crate::interp::SamplePath, x_new: &[f64]) -> crate::interp::SamplePath {
    let s = p.segments();
    let mut q = p.clone();
    for (k, knot) in q.knots.iter_mut().enumerate() {
        let w = 1.0 - k as f64 / s as f64;
        for d in 0..knot.len() {
            knot[d] += w * (x_new[d] - p.knots[0][d]);
        }
    }
    q
}

/// EVI in the `(ρ, ∞)` or `(0, n)` form.
pub fn check_evi(f: &PotentialSpec, form: EviForm, x: &[f64], y: &[f64], eps: f64, disc: Discretization) -> Result<InequalityReport> {
    let (d, a0, _) = evi_derivative(f, x, y, eps, disc)?;
    let df = f.eval(y)? - f.eval(x)?;
    let (name, lhs, rhs, params) = match form {
        EviForm::Rho(rho) => (
            "evi[rho]",
            d + rho * a0,
            a_coth_a(rho * eps) * df,
            json!({ "rho": rho, "n": NParam::INF, "eps": eps, "x": x, "y": y, "A_xy": a0, "derivative": d }),
        ),
        EviForm::Dim(n) => (
            "evi[n]",
            d,
            -n * (-df / n).exp_m1(),
            json!({ "rho": 0.0, "n": n, "eps": eps, "x": x, "y": y, "A_xy": a0, "derivative": d }),
        ),
    };
    Ok(InequalityReport::new(name, lhs, rhs, params, json!(disc)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_limits() {
        for &a in &[0.0, 1e-8, 0.3, 2.0, -0.7] {
            assert_eq!(theta(a, 0.0), 0.0);
            assert!((theta(a, 1.0) - 1.0).abs() < 1e-15);
        }
        for &s in &[0.1, 0.5, 0.77] {
            assert!((theta(1e-8, s) - theta(0.0, s)).abs() <= 1e-6);
            let a: f64 = 0.8;
            assert!((theta(a, s) * (1.0 - (-2.0 * a).exp()) - (1.0 - (-2.0 * a * s).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn constants_have_stable_limits() {
        assert_eq!(a_coth_a(0.0), 1.0);
        assert!((a_coth_a(1e-9) - 1.0).abs() < 1e-15);
        assert!((conforti_constant(2.0, 1e-12) - 2.0).abs() < 1e-9);
        assert!((talagrand_constant(1.0, 1e-10) - 2.0).abs() < 1e-9);
        let e: f64 = 1.0;
        assert!((talagrand_constant(1.0, e) - e * (1.0 + (-e).exp()) / (1.0 - (-e).exp())).abs() < 1e-14);
    }

    #[test]
    fn report_status() {
        let r = InequalityReport::new("x", 1.0, 1.0 - 1e-7, json!({}), json!({}));
        assert_eq!(r.status, Status::PassWithWarning);
        assert!(r.pass);
        let r = InequalityReport::new("x", 1.0, 0.9, json!({}), json!({}));
        assert!(!r.pass);
    }
}
