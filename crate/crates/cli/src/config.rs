//! Experiment configuration: one JSON document per experiment.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ottolab_core::ineq::Discretization;
use ottolab_core::measure::{GridFlowKind, GridMeasure};
use ottolab_core::potential::{NParam, PotentialSpec, Sampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FiniteFlow,
    FiniteInterp,
    FiniteInequalities,
    GridFlow,
    GridBridge,
    GridContraction,
    EpsilonSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FiniteFlow => "finite-flow",
            Command::FiniteInterp => "finite-interp",
            Command::FiniteInequalities => "finite-inequalities",
            Command::GridFlow => "grid-flow",
            Command::GridBridge => "grid-bridge",
            Command::GridContraction => "grid-contraction",
            Command::EpsilonSweep => "epsilon-sweep",
        }
    }
}

fn default_format_version() -> u32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_format_version")]
    pub format_version: u32,
}

/// Configuration error naming the offending field.
#[derive(Debug)]
pub struct ConfigInvalid(pub String);

impl std::fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigInvalid {}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigInvalid(msg.into()).into())
}

fn positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return invalid(format!("{field} must be positive and finite, got {v}"));
    }
    Ok(())
}

fn finite(field: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return invalid(format!("{field} must be finite"));
    }
    Ok(())
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v < min {
        return invalid(format!("{field} must be at least {min}, got {v}"));
    }
    Ok(())
}

fn power_of_two(field: &str, n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return invalid(format!("{field} must be a power of two >= 8, got {n}"));
    }
    Ok(())
}

fn in_domain(field: &str, f: &PotentialSpec, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return invalid(format!("{field} has dimension {}, potential has {}", x.len(), f.dim()));
    }
    finite(field, x)?;
    if !f.in_domain(x) {
        return invalid(format!("{field} lies outside the domain of {}", f.name()));
    }
    Ok(())
}

fn default_s() -> usize {
    512
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Direct,
    Shooting,
    Both,
}

fn default_method() -> MethodChoice {
    MethodChoice::Direct
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteFlowParams {
    pub potential: PotentialSpec,
    pub x0: Vec<f64>,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteInterpParams {
    pub potential: PotentialSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub eps: f64,
    #[serde(rename = "S", default = "default_s")]
    pub s: usize,
    #[serde(default = "default_method")]
    pub method: MethodChoice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Contraction,
    Conforti,
    Talagrand,
    Costa,
    Evi,
}

fn all_checks() -> Vec<CheckName> {
    vec![CheckName::Contraction, CheckName::Conforti, CheckName::Talagrand, CheckName::Costa, CheckName::Evi]
}

fn default_s_grid() -> Vec<f64> {
    (1..10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteInequalitiesParams {
    pub potential: PotentialSpec,
    pub rho: f64,
    #[serde(rename = "n")]
    pub n_param: NParam,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub eps: f64,
    #[serde(default = "default_t")]
    pub t: f64,
    /// Minimizer of the potential, needed by the Talagrand check.
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
    #[serde(default = "all_checks")]
    pub checks: Vec<CheckName>,
    #[serde(rename = "S", default = "default_s")]
    pub s: usize,
    #[serde(default = "default_quad_steps")]
    pub quad_steps: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_s_grid")]
    pub s_grid: Vec<f64>,
    /// Where to certify `(ρ, n)`-convexity before running the checks.
    #[serde(default)]
    pub sampler: Option<Sampler>,
}

fn default_t() -> f64 {
    0.5
}

fn default_quad_steps() -> usize {
    200
}

fn default_fd_step() -> f64 {
    1e-4
}

impl FiniteInequalitiesParams {
    pub fn discretization(&self) -> Discretization {
        Discretization { s: self.s, quad_steps: self.quad_steps, fd_step: self.fd_step, dt: self.dt }
    }
}

/// Density on the periodic grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Uniform,
    VonMises { center: f64, kappa: f64 },
    Samples { values: Vec<f64> },
}

impl MeasureSpec {
    fn validate(&self, field: &str, n: usize) -> Result<()> {
        match self {
            MeasureSpec::Uniform => Ok(()),
            MeasureSpec::VonMises { center, kappa } => {
                finite(&format!("{field}.center"), &[*center])?;
                if !(*kappa >= 0.0 && kappa.is_finite()) {
                    return invalid(format!("{field}.kappa must be non-negative, got {kappa}"));
                }
                Ok(())
            }
            MeasureSpec::Samples { values } => {
                if values.len() != n {
                    return invalid(format!("{field}.values has {} entries, n_cells is {n}", values.len()));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return invalid(format!("{field}.values must be non-negative and finite"));
                }
                if !values.iter().any(|v| *v > 0.0) {
                    return invalid(format!("{field}.values must have positive mass"));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, n: usize) -> Result<GridMeasure> {
        Ok(match self {
            MeasureSpec::Uniform => GridMeasure::uniform(n)?,
            MeasureSpec::VonMises { center, kappa } => GridMeasure::von_mises(n, *center, *kappa)?,
            MeasureSpec::Samples { values } => GridMeasure::from_samples(values.clone())?,
        })
    }
}

/// Confining potential for the Fokker–Planck flow.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridPotential {
    /// `V(x) = amplitude · cos(2π frequency x)`.
    Cosine { amplitude: f64, frequency: u32 },
    Samples { values: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowSpec {
    Heat,
    FokkerPlanck { potential: GridPotential },
    PorousMedia { p: f64 },
}

impl FlowSpec {
    pub fn build(&self, n: usize) -> GridFlowKind {
        match self {
            FlowSpec::Heat => GridFlowKind::Heat,
            FlowSpec::FokkerPlanck { potential: GridPotential::Cosine { amplitude, frequency } } => {
                let (a, k) = (*amplitude, *frequency as f64);
                GridFlowKind::fokker_planck(|x| a * (2.0 * std::f64::consts::PI * k * x).cos(), n)
            }
            FlowSpec::FokkerPlanck { potential: GridPotential::Samples { values } } => {
                GridFlowKind::FokkerPlanck { v: values.clone() }
            }
            FlowSpec::PorousMedia { p } => GridFlowKind::PorousMedia { p: *p },
        }
    }
}

fn default_n_cells() -> usize {
    128
}

fn default_bridge_s() -> usize {
    200
}

fn default_snapshot_every() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFlowParams {
    pub flow: FlowSpec,
    pub mu0: MeasureSpec,
    #[serde(default = "default_n_cells")]
    pub n_cells: usize,
    pub t_end: f64,
    /// Defaults to half the explicit stability limit.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBridgeParams {
    pub mu: MeasureSpec,
    pub nu: MeasureSpec,
    #[serde(default = "default_n_cells")]
    pub n_cells: usize,
    pub eps: f64,
    #[serde(rename = "S", default = "default_bridge_s")]
    pub s: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridContractionParams {
    pub mu: MeasureSpec,
    pub nu: MeasureSpec,
    #[serde(default = "default_n_cells")]
    pub n_cells: usize,
    pub eps_list: Vec<f64>,
    pub t_list: Vec<f64>,
    #[serde(default = "default_quad_steps")]
    pub quad_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSweepParams {
    pub mu: MeasureSpec,
    pub nu: MeasureSpec,
    #[serde(default = "default_sweep_n")]
    pub n_cells: usize,
    pub eps_list: Vec<f64>,
}

fn default_sweep_n() -> usize {
    256
}

#[derive(Clone, Debug)]
pub enum Params {
    FiniteFlow(FiniteFlowParams),
    FiniteInterp(FiniteInterpParams),
    FiniteInequalities(FiniteInequalitiesParams),
    GridFlow(GridFlowParams),
    GridBridge(GridBridgeParams),
    GridContraction(GridContractionParams),
    EpsilonSweep(EpsilonSweepParams),
}

fn parse<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| ConfigInvalid(format!("params: {e}")).into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigInvalid(e.to_string()).into())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    /// Typed, range-checked parameters.
    pub fn validate(&self) -> Result<Params> {
        if self.format_version != 1 {
            return invalid(format!("format_version must be 1, got {}", self.format_version));
        }
        let p = match self.command {
            Command::FiniteFlow => {
                let p: FiniteFlowParams = parse(&self.params)?;
                in_domain("params.x0", &p.potential, &p.x0)?;
                if !(p.t_end >= 0.0 && p.t_end.is_finite()) {
                    return invalid("params.t_end must be non-negative and finite");
                }
                positive("params.dt", p.dt)?;
                Params::FiniteFlow(p)
            }
            Command::FiniteInterp => {
                let p: FiniteInterpParams = parse(&self.params)?;
                in_domain("params.x", &p.potential, &p.x)?;
                in_domain("params.y", &p.potential, &p.y)?;
                positive("params.eps", p.eps)?;
                at_least("params.S", p.s, 2)?;
                Params::FiniteInterp(p)
            }
            Command::FiniteInequalities => {
                let p: FiniteInequalitiesParams = parse(&self.params)?;
                in_domain("params.x", &p.potential, &p.x)?;
                in_domain("params.y", &p.potential, &p.y)?;
                if let Some(xs) = &p.x_star {
                    in_domain("params.x_star", &p.potential, xs)?;
                }
                positive("params.eps", p.eps)?;
                finite("params.rho", &[p.rho])?;
                if !(p.n_param.0 > 0.0) {
                    return invalid("params.n must be positive or \"inf\"");
                }
                if !(p.t >= 0.0 && p.t.is_finite()) {
                    return invalid("params.t must be non-negative and finite");
                }
                at_least("params.S", p.s, 8)?;
                at_least("params.quad_steps", p.quad_steps, 1)?;
                positive("params.fd_step", p.fd_step)?;
                positive("params.dt", p.dt)?;
                if p.checks.is_empty() {
                    return invalid("params.checks must not be empty");
                }
                if p.s_grid.is_empty() || p.s_grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
                    return invalid("params.s_grid must be a non-empty list in [0, 1]");
                }
                if p.checks.contains(&CheckName::Talagrand) {
                    if p.x_star.is_none() {
                        return invalid("params.x_star is required by the talagrand check");
                    }
                    if !(p.rho > 0.0) {
                        return invalid("params.rho must be positive for the talagrand check");
                    }
                }
                if p.checks.contains(&CheckName::Evi) && p.rho != 0.0 && !p.n_param.is_infinite() {
                    return invalid("params: evi needs either n = \"inf\" or rho = 0");
                }
                Params::FiniteInequalities(p)
            }
            Command::GridFlow => {
                let p: GridFlowParams = parse(&self.params)?;
                power_of_two("params.n_cells", p.n_cells)?;
                p.mu0.validate("params.mu0", p.n_cells)?;
                if !(p.t_end >= 0.0 && p.t_end.is_finite()) {
                    return invalid("params.t_end must be non-negative and finite");
                }
                if let Some(dt) = p.dt {
                    positive("params.dt", dt)?;
                }
                at_least("params.snapshot_every", p.snapshot_every, 1)?;
                match &p.flow {
                    FlowSpec::Heat => {}
                    FlowSpec::FokkerPlanck { potential: GridPotential::Cosine { amplitude, .. } } => {
                        finite("params.flow.potential.amplitude", &[*amplitude])?
                    }
                    FlowSpec::FokkerPlanck { potential: GridPotential::Samples { values } } => {
                        if values.len() != p.n_cells {
                            return invalid("params.flow.potential.values must have n_cells entries");
                        }
                        finite("params.flow.potential.values", values)?;
                    }
                    FlowSpec::PorousMedia { p } => {
                        if !(*p > 1.0 && p.is_finite()) {
                            return invalid(format!("params.flow.p must exceed 1, got {p}"));
                        }
                    }
                }
                Params::GridFlow(p)
            }
            Command::GridBridge => {
                let p: GridBridgeParams = parse(&self.params)?;
                power_of_two("params.n_cells", p.n_cells)?;
                p.mu.validate("params.mu", p.n_cells)?;
                p.nu.validate("params.nu", p.n_cells)?;
                positive("params.eps", p.eps)?;
                at_least("params.S", p.s, 8)?;
                Params::GridBridge(p)
            }
            Command::GridContraction => {
                let p: GridContractionParams = parse(&self.params)?;
                power_of_two("params.n_cells", p.n_cells)?;
                p.mu.validate("params.mu", p.n_cells)?;
                p.nu.validate("params.nu", p.n_cells)?;
                if p.eps_list.is_empty() || p.t_list.is_empty() {
                    return invalid("params.eps_list and params.t_list must not be empty");
                }
                for &e in &p.eps_list {
                    positive("params.eps_list", e)?;
                }
                for &t in &p.t_list {
                    positive("params.t_list", t)?;
                }
                at_least("params.quad_steps", p.quad_steps, 1)?;
                Params::GridContraction(p)
            }
            Command::EpsilonSweep => {
                let p: EpsilonSweepParams = parse(&self.params)?;
                power_of_two("params.n_cells", p.n_cells)?;
                p.mu.validate("params.mu", p.n_cells)?;
                p.nu.validate("params.nu", p.n_cells)?;
                if p.eps_list.is_empty() {
                    return invalid("params.eps_list must not be empty");
                }
                for &e in &p.eps_list {
                    positive("params.eps_list", e)?;
                }
                if p.eps_list.windows(2).any(|w| w[1] >= w[0]) {
                    return invalid("params.eps_list must be strictly decreasing");
                }
                Params::EpsilonSweep(p)
            }
        };
        Ok(p)
    }

    /// Hash of everything that determines the numbers.
    pub fn param_hash(&self) -> String {
        let v = serde_json::json!({
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "format_version": self.format_version,
        });
        hash_value(&v)
    }
}

/// First 16 hex digits of the SHA-256 of the compact JSON encoding.
pub fn hash_value(v: &serde_json::Value) -> String {
    let text = serde_json::to_string(v).expect("JSON values serialize");
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}
