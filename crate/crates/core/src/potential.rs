//! Finite-dimensional free energies `F: R^n -> R` with first and second
//! derivative data, and sample-based (rho, n)-convexity certificates.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Minimum distance to a domain boundary.
pub const BOUNDARY_GAP: f64 = 1e-12;

/// Finite-difference step used by fallbacks.
pub fn fd_step(x: &[f64]) -> f64 {
    1e-6 * (1.0 + norm(x))
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dimension parameter `n` in `(0, inf]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NParam(pub f64);

impl NParam {
    pub const INF: NParam = NParam(f64::INFINITY);

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/n`, zero for `n = inf`.
    pub fn recip(self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

impl fmt::Display for NParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for NParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for NParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v > 0.0 => Ok(NParam(v)),
            Raw::Num(v) => Err(D::Error::custom(format!("n must be positive, got {v}"))),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(NParam::INF),
            Raw::Str(s) => Err(D::Error::custom(format!("n must be a positive number or \"inf\", got {s:?}"))),
        }
    }
}

/// User-supplied potential. Missing derivatives fall back to central differences.
pub trait CustomPotential: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn hessian_vector(&self, _x: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn domain_contains(&self, _x: &[f64]) -> bool {
        true
    }
}

#[derive(Clone)]
pub enum Kind {
    Quadratic { scale: f64 },
    NegLog { n_param: f64 },
    LogCos { rho: f64, n_param: f64 },
    LogSinh { rho: f64, n_param: f64 },
    Polynomial { coefficients: Vec<Vec<f64>> },
    Custom { name: String, imp: Arc<dyn CustomPotential> },
}

impl fmt::Debug for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Quadratic { scale } => write!(f, "Quadratic {{ scale: {scale} }}"),
            Kind::NegLog { n_param } => write!(f, "NegLog {{ n_param: {n_param} }}"),
            Kind::LogCos { rho, n_param } => write!(f, "LogCos {{ rho: {rho}, n_param: {n_param} }}"),
            Kind::LogSinh { rho, n_param } => write!(f, "LogSinh {{ rho: {rho}, n_param: {n_param} }}"),
            Kind::Polynomial { coefficients } => write!(f, "Polynomial {{ coefficients: {coefficients:?} }}"),
            Kind::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

/// A free energy together with its open box domain.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    kind: Kind,
    dim: usize,
    domain: Option<Vec<(f64, f64)>>,
}

impl PotentialSpec {
    /// `F(x) = scale |x|^2 / 2`.
    pub fn quadratic(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 || !scale.is_finite() {
            return Err(Error::InvalidInput("quadratic needs dim >= 1 and finite scale".into()));
        }
        Ok(Self { kind: Kind::Quadratic { scale }, dim, domain: None })
    }

    /// `F(x) = -n log x` on `(0, inf)`.
    pub fn neg_log(n_param: f64) -> Result<Self> {
        if !(n_param > 0.0 && n_param.is_finite()) {
            return Err(Error::InvalidInput("neg_log needs n > 0".into()));
        }
        Ok(Self { kind: Kind::NegLog { n_param }, dim: 1, domain: Some(vec![(0.0, f64::INFINITY)]) })
    }

    /// `F(x) = -n log cos(k x)` with `k = sqrt(rho/n)` on `|x| < pi/(2k)`.
    pub fn log_cos(rho: f64, n_param: f64) -> Result<Self> {
        if !(rho > 0.0 && n_param > 0.0 && rho.is_finite() && n_param.is_finite()) {
            return Err(Error::InvalidInput("log_cos needs rho > 0 and n > 0".into()));
        }
        let half = std::f64::consts::FRAC_PI_2 / (rho / n_param).sqrt();
        Ok(Self { kind: Kind::LogCos { rho, n_param }, dim: 1, domain: Some(vec![(-half, half)]) })
    }

    /// `F(x) = -n log sinh(k x)` with `k = sqrt(-rho/n)` on `(0, inf)`.
    pub fn log_sinh(rho: f64, n_param: f64) -> Result<Self> {
        if !(rho < 0.0 && n_param > 0.0 && rho.is_finite() && n_param.is_finite()) {
            return Err(Error::InvalidInput("log_sinh needs rho < 0 and n > 0".into()));
        }
        Ok(Self { kind: Kind::LogSinh { rho, n_param }, dim: 1, domain: Some(vec![(0.0, f64::INFINITY)]) })
    }

    /// Separable polynomial `F(x) = sum_i p_i(x_i)`, `p_i(t) = sum_j c_ij t^j`.
    pub fn polynomial(coefficients: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("polynomial needs finite coefficients for each coordinate".into()));
        }
        let dim = coefficients.len();
        Ok(Self { kind: Kind::Polynomial { coefficients }, dim, domain: None })
    }

    pub fn custom(name: &str, dim: usize, imp: Arc<dyn CustomPotential>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("custom potential needs dim >= 1".into()));
        }
        Ok(Self { kind: Kind::Custom { name: name.to_string(), imp }, dim, domain: None })
    }

    /// Restricts to a box. The box must lie inside the natural domain.
    pub fn with_domain(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: bounds.len() });
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::InvalidInput(format!("empty domain interval for coordinate {i}")));
            }
            if let Some(nat) = &self.domain {
                if lo < nat[i].0 || hi > nat[i].1 {
                    return Err(Error::InvalidInput(format!(
                        "domain ({lo}, {hi}) exceeds the natural domain ({}, {})",
                        nat[i].0, nat[i].1
                    )));
                }
            }
        }
        self.domain = Some(bounds);
        Ok(self)
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Option<&[(f64, f64)]> {
        self.domain.as_deref()
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Quadratic { .. } => "quadratic".into(),
            Kind::NegLog { .. } => "neg_log".into(),
            Kind::LogCos { .. } => "log_cos".into(),
            Kind::LogSinh { .. } => "log_sinh".into(),
            Kind::Polynomial { .. } => "polynomial".into(),
            Kind::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if let Some(b) = &self.domain {
            if x.iter().zip(b).any(|(&v, &(lo, hi))| v - lo <= BOUNDARY_GAP || hi - v <= BOUNDARY_GAP) {
                return false;
            }
        }
        match &self.kind {
            Kind::Custom { imp, .. } => imp.domain_contains(x),
            _ => true,
        }
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !self.in_domain(x) {
            return Err(Error::DomainViolation { what: self.name(), point: x.to_vec() });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Quadratic { scale } => 0.5 * scale * dot(x, x),
            Kind::NegLog { n_param } => -n_param * x[0].ln(),
            Kind::LogCos { rho, n_param } => {
                let k = (rho / n_param).sqrt();
                -n_param * (k * x[0]).cos().ln()
            }
            Kind::LogSinh { rho, n_param } => {
                let k = (-rho / n_param).sqrt();
                -n_param * (k * x[0]).sinh().ln()
            }
            Kind::Polynomial { coefficients } => {
                coefficients.iter().zip(x).map(|(c, &t)| poly_derivs(c, t)[0]).sum()
            }
            Kind::Custom { imp, .. } => imp.value(x),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.grad_unchecked(x)
    }

    fn grad_unchecked(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.kind {
            Kind::Quadratic { scale } => x.iter().map(|v| scale * v).collect(),
            Kind::NegLog { n_param } => vec![-n_param / x[0]],
            Kind::LogCos { rho, n_param } => {
                let k = (rho / n_param).sqrt();
                vec![n_param * k * (k * x[0]).tan()]
            }
            Kind::LogSinh { rho, n_param } => {
                let k = (-rho / n_param).sqrt();
                vec![-n_param * k / (k * x[0]).tanh()]
            }
            Kind::Polynomial { coefficients } => {
                coefficients.iter().zip(x).map(|(c, &t)| poly_derivs(c, t)[1]).collect()
            }
            Kind::Custom { imp, .. } => match imp.gradient(x) {
                Some(g) => g,
                None => self.fd_grad(x)?,
            },
        })
    }

    fn fd_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = fd_step(x);
        let mut g = vec![0.0; self.dim];
        let mut xp = x.to_vec();
        for i in 0..self.dim {
            xp[i] = x[i] + h;
            let fp = self.eval(&xp)?;
            xp[i] = x[i] - h;
            let fm = self.eval(&xp)?;
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }

    /// Second-derivative entries for the 1-D built-ins: `F''(x)`.
    fn second_1d(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::NegLog { n_param } => n_param / (t * t),
            Kind::LogCos { rho, n_param } => {
                let k = (rho / n_param).sqrt();
                let c = (k * t).cos();
                n_param * k * k / (c * c)
            }
            Kind::LogSinh { rho, n_param } => {
                let k = (-rho / n_param).sqrt();
                let s = (k * t).sinh();
                n_param * k * k / (s * s)
            }
            _ => unreachable!(),
        }
    }

    /// `F''(x) v`.
    pub fn hessian_vector(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(match &self.kind {
            Kind::Quadratic { scale } => v.iter().map(|w| scale * w).collect(),
            Kind::NegLog { .. } | Kind::LogCos { .. } | Kind::LogSinh { .. } => {
                vec![self.second_1d(x[0]) * v[0]]
            }
            Kind::Polynomial { coefficients } => coefficients
                .iter()
                .zip(x)
                .zip(v)
                .map(|((c, &t), &w)| poly_derivs(c, t)[2] * w)
                .collect(),
            Kind::Custom { imp, .. } => match imp.hessian_vector(x, v) {
                Some(hv) => hv,
                None => self.fd_hvp(x, v)?,
            },
        })
    }

    fn fd_hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let nv = norm(v);
        if nv == 0.0 {
            return Ok(vec![0.0; self.dim]);
        }
        let h = fd_step(x);
        let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b / nv).collect();
        let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b / nv).collect();
        let gp = self.grad(&xp)?;
        let gm = self.grad(&xm)?;
        Ok(gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * h) * nv).collect())
    }

    /// Dense `F''(x)`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.hessian_vector(x, &e)?;
            e[j] = 0.0;
            for i in 0..n {
                h[(i, j)] = col[i];
            }
        }
        Ok((&h + h.transpose()) * 0.5)
    }

    /// `eps^2 F''(x) F'(x)`, the right-hand side of the Newton equation.
    pub fn newton_rhs(&self, x: &[f64], eps: f64) -> Result<Vec<f64>> {
        let g = self.grad(x)?;
        if eps == 0.0 {
            return Ok(vec![0.0; self.dim]);
        }
        let hv = self.hessian_vector(x, &g)?;
        Ok(hv.into_iter().map(|v| eps * eps * v).collect())
    }

    /// Jacobian of `x -> eps^2 F''(x) F'(x)`, symmetrized.
    pub fn newton_jacobian(&self, x: &[f64], eps: f64) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let n = self.dim;
        let e2 = eps * eps;
        let j = match &self.kind {
            Kind::Quadratic { scale } => DMatrix::identity(n, n) * (scale * scale),
            Kind::NegLog { n_param } => {
                let t = x[0];
                DMatrix::from_element(1, 1, 3.0 * n_param * n_param / t.powi(4))
            }
            Kind::LogCos { n_param, .. } | Kind::LogSinh { n_param, .. } => {
                // (F''F')' = F'''F' + F''^2 with F''' = 2 F' F'' / n.
                let g = self.grad_unchecked(x)?[0];
                let s = self.second_1d(x[0]);
                DMatrix::from_element(1, 1, 2.0 * g * g * s / n_param + s * s)
            }
            Kind::Polynomial { coefficients } => {
                let mut m = DMatrix::zeros(n, n);
                for (i, (c, &t)) in coefficients.iter().zip(x).enumerate() {
                    let d = poly_derivs(c, t);
                    m[(i, i)] = d[1] * d[3] + d[2] * d[2];
                }
                m
            }
            Kind::Custom { .. } => {
                let h = fd_step(x);
                let mut m = DMatrix::zeros(n, n);
                let mut xp = x.to_vec();
                for c in 0..n {
                    xp[c] = x[c] + h;
                    let p = self.newton_rhs(&xp, 1.0)?;
                    xp[c] = x[c] - h;
                    let q = self.newton_rhs(&xp, 1.0)?;
                    xp[c] = x[c];
                    for r in 0..n {
                        m[(r, c)] = (p[r] - q[r]) / (2.0 * h);
                    }
                }
                m
            }
        };
        Ok((&j + j.transpose()) * (0.5 * e2))
    }

    /// `I(x) = |F'(x)|^2`.
    pub fn fisher_info(&self, x: &[f64]) -> Result<f64> {
        let g = self.grad(x)?;
        Ok(dot(&g, &g))
    }
}

/// `[p, p', p'', p''']` at `t`.
fn poly_derivs(c: &[f64], t: f64) -> [f64; 4] {
    let mut d = [0.0; 4];
    for (j, &cj) in c.iter().enumerate() {
        let jf = j as f64;
        d[0] += cj * t.powi(j as i32);
        if j >= 1 {
            d[1] += jf * cj * t.powi(j as i32 - 1);
        }
        if j >= 2 {
            d[2] += jf * (jf - 1.0) * cj * t.powi(j as i32 - 2);
        }
        if j >= 3 {
            d[3] += jf * (jf - 1.0) * (jf - 2.0) * cj * t.powi(j as i32 - 3);
        }
    }
    d
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialJson {
    kind: String,
    dim: usize,
    #[serde(default)]
    params: serde_json::Value,
    #[serde(default)]
    domain: Option<Vec<[f64; 2]>>,
}

fn param(p: &serde_json::Value, key: &str) -> std::result::Result<f64, String> {
    p.get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| format!("missing numeric parameter {key:?}"))
}

fn check_keys(p: &serde_json::Value, allowed: &[&str]) -> std::result::Result<(), String> {
    match p {
        serde_json::Value::Null => Ok(()),
        serde_json::Value::Object(m) => {
            for k in m.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(format!("unknown parameter {k:?}"));
                }
            }
            Ok(())
        }
        _ => Err("params must be an object".into()),
    }
}

impl TryFrom<PotentialJson> for PotentialSpec {
    type Error = String;

    fn try_from(j: PotentialJson) -> std::result::Result<Self, String> {
        let p = &j.params;
        let spec = match j.kind.as_str() {
            "quadratic" => {
                check_keys(p, &["scale"])?;
                let scale = if p.get("scale").is_some() { param(p, "scale")? } else { 1.0 };
                PotentialSpec::quadratic(j.dim, scale)
            }
            "neg_log" => {
                check_keys(p, &["n_param"])?;
                PotentialSpec::neg_log(param(p, "n_param")?)
            }
            "log_cos" => {
                check_keys(p, &["rho", "n_param"])?;
                PotentialSpec::log_cos(param(p, "rho")?, param(p, "n_param")?)
            }
            "log_sinh" => {
                check_keys(p, &["rho", "n_param"])?;
                PotentialSpec::log_sinh(param(p, "rho")?, param(p, "n_param")?)
            }
            "polynomial" => {
                check_keys(p, &["coefficients"])?;
                let c: Vec<Vec<f64>> = serde_json::from_value(
                    p.get("coefficients").cloned().ok_or("missing parameter \"coefficients\"")?,
                )
                .map_err(|e| e.to_string())?;
                PotentialSpec::polynomial(c)
            }
            "custom" => return Err("custom potentials cannot be deserialized".into()),
            other => return Err(format!("unknown potential kind {other:?}")),
        }
        .map_err(|e| e.to_string())?;
        if spec.dim != j.dim {
            return Err(format!("dim {} does not match kind {} (dim {})", j.dim, j.kind, spec.dim));
        }
        match j.domain {
            Some(d) => spec.with_domain(d.into_iter().map(|[a, b]| (a, b)).collect()).map_err(|e| e.to_string()),
            None => Ok(spec),
        }
    }
}

impl Serialize for PotentialSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let params = match &self.kind {
            Kind::Quadratic { scale } => serde_json::json!({ "scale": scale }),
            Kind::NegLog { n_param } => serde_json::json!({ "n_param": n_param }),
            Kind::LogCos { rho, n_param } | Kind::LogSinh { rho, n_param } => {
                serde_json::json!({ "rho": rho, "n_param": n_param })
            }
            Kind::Polynomial { coefficients } => serde_json::json!({ "coefficients": coefficients }),
            Kind::Custom { name, .. } => {
                return Err(S::Error::custom(format!("custom potential {name:?} is not serializable")))
            }
        };
        let domain = self
            .domain
            .as_ref()
            .map(|d| d.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>());
        PotentialJson { kind: self.name(), dim: self.dim, params, domain }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PotentialSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = PotentialJson::deserialize(d)?;
        PotentialSpec::try_from(j).map_err(D::Error::custom)
    }
}

/// Where to evaluate the convexity margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampler {
    /// Tensor grid with `points` per coordinate, endpoints included.
    Grid { lower: Vec<f64>, upper: Vec<f64>, points: usize },
    /// Uniform random points in the box.
    Random { lower: Vec<f64>, upper: Vec<f64>, count: usize, seed: u64 },
}

impl Sampler {
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            Sampler::Grid { lower, upper, points } => {
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
                }
                if *points == 0 || lower.is_empty() {
                    return Ok(Vec::new());
                }
                let axis = |i: usize, k: usize| {
                    if *points == 1 {
                        0.5 * (lower[i] + upper[i])
                    } else {
                        lower[i] + (upper[i] - lower[i]) * k as f64 / (*points - 1) as f64
                    }
                };
                let d = lower.len();
                let total = points.pow(d as u32);
                Ok((0..total)
                    .map(|mut idx| {
                        (0..d)
                            .map(|i| {
                                let k = idx % points;
                                idx /= points;
                                axis(i, k)
                            })
                            .collect()
                    })
                    .collect())
            }
            Sampler::Random { lower, upper, count, seed } => {
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..*count)
                    .map(|_| {
                        lower
                            .iter()
                            .zip(upper)
                            .map(|(&a, &b)| a + (b - a) * rng.random::<f64>())
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityCertificate {
    pub rho: f64,
    pub n_param: NParam,
    pub min_margin: f64,
    pub worst_point: Vec<f64>,
    pub samples_checked: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub sampler: Sampler,
}

/// Smallest eigenvalue of `F'' - rho Id - F' F'^T / n` over the sampled points.
pub fn certify_convexity(
    f: &PotentialSpec,
    rho: f64,
    n_param: NParam,
    sampler: &Sampler,
    tolerance: f64,
) -> Result<ConvexityCertificate> {
    let pts = sampler.points()?;
    if pts.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut min_margin = f64::INFINITY;
    let mut worst = pts[0].clone();
    for x in &pts {
        let h = f.hessian(x)?;
        let g = f.grad(x)?;
        let n = f.dim();
        let mut m = h - DMatrix::identity(n, n) * rho;
        let inv_n = n_param.recip();
        if inv_n != 0.0 {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] -= g[i] * g[j] * inv_n;
                }
            }
        }
        let lam = if n == 1 {
            m[(0, 0)]
        } else {
            SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        if lam < min_margin {
            min_margin = lam;
            worst = x.clone();
        }
    }
    Ok(ConvexityCertificate {
        rho,
        n_param,
        min_margin,
        worst_point: worst,
        samples_checked: pts.len(),
        tolerance,
        pass: min_margin >= -tolerance,
        sampler: sampler.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eval_examples() {
        let q = PotentialSpec::quadratic(2, 1.0).unwrap();
        assert_eq!(q.eval(&[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(q.grad(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(q.fisher_info(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(q.newton_rhs(&[1.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
        let nl = PotentialSpec::neg_log(1.0).unwrap();
        assert_abs_diff_eq!(nl.eval(&[2.0]).unwrap(), -std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(nl.newton_rhs(&[1.0], 1.0).unwrap(), vec![-1.0]);
        assert_eq!(nl.newton_rhs(&[3.0], 0.0).unwrap(), vec![0.0]);
        let nl2 = PotentialSpec::neg_log(2.0).unwrap();
        assert_eq!(nl2.grad(&[1.0]).unwrap(), vec![-2.0]);
        assert_abs_diff_eq!(nl2.fisher_info(&[4.0]).unwrap(), 0.25, epsilon = 1e-15);
        let lc = PotentialSpec::log_cos(1.0, 1.0).unwrap();
        assert_eq!(lc.eval(&[0.0]).unwrap(), 0.0);
        let p = PotentialSpec::polynomial(vec![vec![0.0, 0.0, 0.0, 0.0, 0.25]]).unwrap();
        assert_abs_diff_eq!(p.grad(&[2.0]).unwrap()[0], 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.eval(&[2.0]).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn poly_derivatives_match_direct_formulas() {
        // p(t) = 1 + 2t - t^2 + 0.5 t^3 + 0.25 t^4
        let c = [1.0, 2.0, -1.0, 0.5, 0.25];
        let t: f64 = 1.7;
        let d = poly_derivs(&c, t);
        assert_abs_diff_eq!(d[0], 1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) + 0.25 * t.powi(4), epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 2.0 - 2.0 * t + 1.5 * t * t + t.powi(3), epsilon = 1e-12);
        assert_abs_diff_eq!(d[2], -2.0 + 3.0 * t + 3.0 * t * t, epsilon = 1e-12);
        assert_abs_diff_eq!(d[3], 3.0 + 6.0 * t, epsilon = 1e-12);
    }

    #[test]
    fn domain_is_open() {
        let nl = PotentialSpec::neg_log(1.0).unwrap();
        assert!(matches!(nl.eval(&[0.0]), Err(Error::DomainViolation { .. })));
        assert!(matches!(nl.eval(&[5e-13]), Err(Error::DomainViolation { .. })));
        assert!(nl.eval(&[1e-11]).is_ok());
        let lc = PotentialSpec::log_cos(1.0, 1.0).unwrap();
        assert!(lc.eval(&[std::f64::consts::FRAC_PI_2]).is_err());
        assert!(matches!(
            PotentialSpec::quadratic(2, 1.0).unwrap().eval(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(PotentialSpec::neg_log(1.0).unwrap().with_domain(vec![(-1.0, 1.0)]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = PotentialSpec::log_cos(1.0, 2.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: PotentialSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back.eval(&[0.3]).unwrap(), s.eval(&[0.3]).unwrap());
        let q: PotentialSpec =
            serde_json::from_str(r#"{"kind":"quadratic","dim":2,"params":{"scale":1.0},"domain":null}"#).unwrap();
        assert_eq!(q.dim(), 2);
        assert!(serde_json::from_str::<PotentialSpec>(r#"{"kind":"quadratic","dim":1,"params":{"scal":1}}"#).is_err());
        assert!(serde_json::from_str::<PotentialSpec>(r#"{"kind":"neg_log","dim":2,"params":{"n_param":1}}"#).is_err());
        let n: NParam = serde_json::from_str("\"inf\"").unwrap();
        assert!(n.is_infinite());
        assert_eq!(serde_json::to_string(&NParam::INF).unwrap(), "\"inf\"");
    }

    #[test]
    fn certificates() {
        let nl = PotentialSpec::neg_log(3.0).unwrap();
        let grid = Sampler::Grid { lower: vec![0.1], upper: vec![10.0], points: 200 };
        let c = certify_convexity(&nl, 0.0, NParam(3.0), &grid, 1e-9).unwrap();
        assert!(c.pass);
        assert!(c.min_margin.abs() <= 1e-12, "{}", c.min_margin);

        let q = PotentialSpec::quadratic(3, 1.0).unwrap();
        let b = Sampler::Random { lower: vec![-2.0; 3], upper: vec![2.0; 3], count: 50, seed: 7 };
        let c1 = certify_convexity(&q, 1.0, NParam::INF, &b, 1e-9).unwrap();
        assert!(c1.pass);
        assert_abs_diff_eq!(c1.min_margin, 0.0, epsilon = 1e-14);
        let c2 = certify_convexity(&q, 2.0, NParam::INF, &b, 1e-9).unwrap();
        assert!(!c2.pass);
        assert_abs_diff_eq!(c2.min_margin, -1.0, epsilon = 1e-14);

        let empty = Sampler::Grid { lower: vec![0.1], upper: vec![1.0], points: 0 };
        assert!(matches!(certify_convexity(&nl, 0.0, NParam(3.0), &empty, 0.0), Err(Error::EmptySample)));
    }

    #[test]
    fn equality_examples_on_their_intervals() {
        let lc = PotentialSpec::log_cos(2.0, 3.0).unwrap();
        let half = lc.domain().unwrap()[0].1;
        let g = Sampler::Grid { lower: vec![-0.9 * half], upper: vec![0.9 * half], points: 101 };
        let c = certify_convexity(&lc, 2.0, NParam(3.0), &g, 1e-9).unwrap();
        assert!(c.min_margin.abs() <= 1e-9, "{}", c.min_margin);

        let ls = PotentialSpec::log_sinh(-1.5, 2.0).unwrap();
        let g = Sampler::Grid { lower: vec![0.2], upper: vec![5.0], points: 101 };
        let c = certify_convexity(&ls, -1.5, NParam(2.0), &g, 1e-9).unwrap();
        assert!(c.min_margin.abs() <= 1e-9, "{}", c.min_margin);
    }

    #[test]
    fn sampler_grid_covers_box() {
        let g = Sampler::Grid { lower: vec![0.0, 1.0], upper: vec![1.0, 2.0], points: 3 };
        let p = g.points().unwrap();
        assert_eq!(p.len(), 9);
        assert!(p.contains(&vec![0.5, 2.0]));
    }
}
