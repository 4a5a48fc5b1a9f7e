//! Dispatch of a validated config to the solvers and verifiers.

use anyhow::{Context, Result};
use serde_json::json;

use ottolab_core::bridge::{
    conserved_quantity, contraction_check, convexity_suite, entropic_cost, entropic_interpolation,
    epsilon_sweep, kantorovich_dual, newton_residual, sinkhorn, SinkhornOptions,
};
use ottolab_core::flow::evolve;
use ottolab_core::ineq::{
    check_conforti, check_contraction, check_costa, check_evi, check_talagrand, EviForm, InequalityReport,
};
use ottolab_core::interp::{cost_decompositions, minimize_direct, solve_shooting};
use ottolab_core::io::{fmt_f64, Header, Table};
use ottolab_core::measure::{grid_flow, stable_dt};
use ottolab_core::par::Exec;
use ottolab_core::potential::certify_convexity;

use crate::config::{
    CheckName, EpsilonSweepParams, ExperimentConfig, FiniteFlowParams, FiniteInequalitiesParams,
    FiniteInterpParams, GridBridgeParams, GridContractionParams, GridFlowParams, MethodChoice, Params,
};
use crate::output::{Outcome, Status};

/// Relative tolerance of the three-route agreement.
pub const ROUTE_TOL: f64 = 0.01;
/// Absolute tolerance of the Kantorovich identity.
pub const DUAL_TOL: f64 = 1e-8;
/// Sinkhorn marginal log-error bound.
pub const MARGINAL_TOL: f64 = 1e-10;

/// Runs a config whose parameters have been validated, without touching the disk.
pub fn execute(cfg: &ExperimentConfig, params: &Params, exec: Exec) -> Result<Outcome> {
    let header = Header::new(cfg.command.name(), &cfg.param_hash());
    let mut out = Outcome::new(header);
    match params {
        Params::FiniteFlow(p) => finite_flow(p, &mut out)?,
        Params::FiniteInterp(p) => finite_interp(p, &mut out)?,
        Params::FiniteInequalities(p) => finite_inequalities(p, &mut out, exec)?,
        Params::GridFlow(p) => run_grid_flow(p, &mut out)?,
        Params::GridBridge(p) => grid_bridge(p, &mut out, exec)?,
        Params::GridContraction(p) => grid_contraction(p, &mut out, exec)?,
        Params::EpsilonSweep(p) => run_sweep(p, &mut out, exec)?,
    }
    let report = json!({
        "config": cfg,
        "status": Status::from_pass(out.pass),
        "results": out.results,
    });
    out.json("report.json", &report)?;
    Ok(out)
}

fn finite_flow(p: &FiniteFlowParams, out: &mut Outcome) -> Result<()> {
    let tr = evolve(&p.potential, &p.x0, p.t_end, p.dt).context("integrating the gradient flow")?;
    let diss = tr.dissipation_identity()?;
    let violation = tr.lyapunov_violation()?;
    let gap_ok = diss.gap.abs() <= 1e-8 * (1.0 + diss.lhs.abs());
    out.pass = violation.is_none() && gap_ok;
    out.results = json!({
        "final_state": tr.final_state(),
        "dissipation": diss,
        "dissipation_ok": gap_ok,
        "lyapunov_violation_step": violation,
        "steps": tr.times.len() - 1,
    });
    out.table("trajectory.csv", &tr.table()?)
}

fn finite_interp(p: &FiniteInterpParams, out: &mut Outcome) -> Result<()> {
    let mut results = serde_json::Map::new();
    let mut pass = true;
    if matches!(p.method, MethodChoice::Direct | MethodChoice::Both) {
        let r = minimize_direct(&p.potential, &p.x, &p.y, p.eps, p.s, None).context("direct minimization")?;
        let dec = cost_decompositions(&r)?;
        pass &= r.converged;
        results.insert("direct".into(), json!({ "summary": r.summary(), "decompositions": dec }));
        out.table("interpolation_direct.csv", &r.table())?;
    }
    if matches!(p.method, MethodChoice::Shooting | MethodChoice::Both) {
        let r = solve_shooting(&p.potential, &p.x, &p.y, p.eps, p.s).context("shooting")?;
        pass &= r.converged;
        results.insert("shooting".into(), json!({ "summary": r.summary() }));
        out.table("interpolation_shooting.csv", &r.table())?;
    }
    let cost = results
        .get("direct")
        .or_else(|| results.get("shooting"))
        .and_then(|v| v["summary"]["cost"].as_f64());
    results.insert("cost".into(), json!(cost));
    out.pass = pass;
    out.results = serde_json::Value::Object(results);
    Ok(())
}

/// Rows `name, params, lhs, rhs, margin, pass`.
pub fn report_rows(reports: &[InequalityReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.params_string(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                fmt_f64(r.margin),
                r.pass.to_string(),
            ]
        })
        .collect()
}

pub const REPORT_COLUMNS: [&str; 6] = ["name", "params", "lhs", "rhs", "margin", "pass"];

pub fn inequality_reports(p: &FiniteInequalitiesParams, exec: Exec) -> Result<Vec<InequalityReport>> {
    let f = &p.potential;
    let disc = p.discretization();
    let runs = ottolab_core::par::map(exec, &p.checks, |check| -> Result<Vec<InequalityReport>> {
        Ok(match check {
            CheckName::Contraction => {
                let c = check_contraction(f, p.rho, p.n_param, &p.x, &p.y, p.eps, p.t, disc)?;
                vec![c.printed_exponent, c.proof_exponent]
            }
            CheckName::Conforti => {
                let it = minimize_direct(f, &p.x, &p.y, p.eps, p.s, None)?;
                vec![check_conforti(f, p.rho, &it, &p.s_grid)?]
            }
            CheckName::Talagrand => {
                let xs = p.x_star.as_ref().expect("validated");
                vec![check_talagrand(f, p.rho, xs, &p.x, p.eps, p.s)?]
            }
            CheckName::Costa => {
                let it = minimize_direct(f, &p.x, &p.y, p.eps, p.s, None)?;
                vec![check_costa(f, p.n_param, &it)?]
            }
            CheckName::Evi => {
                let form = if p.n_param.is_infinite() { EviForm::Rho(p.rho) } else { EviForm::Dim(p.n_param.0) };
                vec![check_evi(f, form, &p.x, &p.y, p.eps, disc)?]
            }
        })
    });
    let mut all = Vec::new();
    for (check, r) in p.checks.iter().zip(runs) {
        all.extend(r.with_context(|| format!("{check:?} check"))?);
    }
    Ok(all)
}

fn finite_inequalities(p: &FiniteInequalitiesParams, out: &mut Outcome, exec: Exec) -> Result<()> {
    let cert = match &p.sampler {
        Some(s) => Some(certify_convexity(&p.potential, p.rho, p.n_param, s, 1e-9).context("convexity certificate")?),
        None => None,
    };
    let reports = inequality_reports(p, exec)?;
    out.pass = reports.iter().all(|r| r.pass) && cert.as_ref().is_none_or(|c| c.pass);
    out.results = json!({ "certificate": cert, "reports": reports });
    out.jsonl("reports.jsonl", &reports)?;
    out.csv("summary.csv", &REPORT_COLUMNS, &report_rows(&reports))
}

fn run_grid_flow(p: &GridFlowParams, out: &mut Outcome) -> Result<()> {
    let mu0 = p.mu0.build(p.n_cells)?;
    let kind = p.flow.build(p.n_cells);
    let dt = p.dt.unwrap_or_else(|| 0.5 * stable_dt(&kind, &mu0));
    let r = grid_flow(&kind, &mu0, p.t_end, dt, p.snapshot_every).context("grid flow")?;
    let centers = ottolab_core::measure::cell_centers(p.n_cells);
    let mut rows = Vec::new();
    for (t, m) in r.snapshot_times.iter().zip(&r.snapshots) {
        for (x, v) in centers.iter().zip(m.values()) {
            rows.push(vec![*t, *x, *v]);
        }
    }
    let snaps = Table { columns: vec!["t".into(), "cell_center".into(), "density".into()], rows };
    out.pass = r.lyapunov.non_increasing && r.max_mass_error <= 1e-10;
    out.results = json!({
        "flow": kind.name(),
        "dt": dt,
        "functional": r.lyapunov.functional,
        "non_increasing": r.lyapunov.non_increasing,
        "max_increase": r.lyapunov.max_increase,
        "max_mass_error": r.max_mass_error,
        "positivity_clamped": r.positivity_clamped,
        "final_value": r.lyapunov.values.last(),
    });
    out.table("snapshots.csv", &snaps)?;
    out.table("lyapunov.csv", &r.lyapunov.table())
}

fn grid_bridge(p: &GridBridgeParams, out: &mut Outcome, exec: Exec) -> Result<()> {
    let mu = p.mu.build(p.n_cells)?;
    let nu = p.nu.build(p.n_cells)?;
    let pots = sinkhorn(&mu, &nu, p.eps, SinkhornOptions::default()).context("Sinkhorn")?;
    let bundle = entropic_cost(&mu, &nu, &pots, p.s, exec)?;
    let dual = kantorovich_dual(&pots, &mu, &nu, &bundle)?;
    let interp = entropic_interpolation(&pots, p.s, exec)?;
    let residual = newton_residual(&interp)?;
    let conserved = conserved_quantity(&interp);
    let convexity = convexity_suite(&interp, 1.0);
    let route_gap = (bundle.a_ent - bundle.dynamic_action).abs();
    let routes_ok = route_gap <= (ROUTE_TOL * bundle.a_ent.abs()).max(1e-12);
    let dual_ok = dual.gap <= DUAL_TOL;
    let marginals_ok = pots.marginal_error <= MARGINAL_TOL;
    out.pass = routes_ok && dual_ok && marginals_ok && convexity.entropy.pass && convexity.exp_entropy.pass;
    out.results = json!({
        "cost_bundle": bundle,
        "route_gap": route_gap,
        "routes_ok": routes_ok,
        "kantorovich": dual,
        "dual_ok": dual_ok,
        "marginals_ok": marginals_ok,
        "newton_residual": { "max": residual.max_residual, "weighted_max": residual.weighted_max },
        "conserved_drift": conserved.drift,
        "convexity": convexity,
    });
    out.json("cost_bundle.json", &bundle)?;
    out.table("interpolation.csv", &interp.table())?;
    let rows = interp
        .s_grid
        .iter()
        .zip(&conserved.values)
        .zip(&residual.per_s)
        .map(|((s, e), r)| vec![*s, *e, *r])
        .collect();
    out.table(
        "conserved.csv",
        &Table { columns: vec!["s".into(), "E".into(), "newton_residual".into()], rows },
    )
}

fn grid_contraction(p: &GridContractionParams, out: &mut Outcome, exec: Exec) -> Result<()> {
    let mu = p.mu.build(p.n_cells)?;
    let nu = p.nu.build(p.n_cells)?;
    let grid: Vec<(f64, f64)> = p.eps_list.iter().flat_map(|&e| p.t_list.iter().map(move |&t| (e, t))).collect();
    let runs = ottolab_core::par::map(exec, &grid, |&(eps, t)| {
        contraction_check(&mu, &nu, eps, t, p.quad_steps, Exec::Sequential)
    });
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut pass = true;
    for (&(eps, t), r) in grid.iter().zip(runs) {
        let c = r.with_context(|| format!("contraction at eps={eps}, t={t}"))?;
        pass &= c.report.margin >= -1e-8;
        rows.push(vec![eps, t, c.report.lhs, c.report.rhs, c.report.margin, c.correction]);
        reports.push(c);
    }
    out.pass = pass;
    out.results = json!({ "ent_mu": mu.entropy(), "ent_nu": nu.entropy(), "checks": reports });
    out.table(
        "contraction.csv",
        &Table {
            columns: ["eps", "t", "lhs", "rhs", "margin", "correction"].iter().map(|s| s.to_string()).collect(),
            rows,
        },
    )
}

fn run_sweep(p: &EpsilonSweepParams, out: &mut Outcome, exec: Exec) -> Result<()> {
    let mu = p.mu.build(p.n_cells)?;
    let nu = p.nu.build(p.n_cells)?;
    let t = epsilon_sweep(&mu, &nu, &p.eps_list, exec).context("epsilon sweep")?;
    out.pass = t.gap_decreasing;
    out.results = json!(t);
    out.table("sweep.csv", &t.table())
}
