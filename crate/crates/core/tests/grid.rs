use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ottolab_core::bridge::{
    conserved_quantity, contraction_check, entropic_cost, entropic_interpolation, epsilon_sweep,
    kantorovich_dual, newton_residual, schrodinger_cost, sinkhorn, w2_oracle, SinkhornOptions,
};
use ottolab_core::measure::{grid_flow, stable_dt, GridFlowKind, GridMeasure, HeatOperator};
use ottolab_core::par::Exec;

fn bump_pair(n: usize) -> (GridMeasure, GridMeasure) {
    (GridMeasure::von_mises(n, 0.3, 12.0).unwrap(), GridMeasure::von_mises(n, 0.5, 12.0).unwrap())
}

/// `exp(tL)` for the periodic second-difference matrix, through a symmetric eigensolve.
fn dense_heat(n: usize, t: f64) -> DMatrix<f64> {
    let nn = (n * n) as f64;
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] = -2.0 * nn;
        l[(i, (i + 1) % n)] += nn;
        l[(i, (i + n - 1) % n)] += nn;
    }
    let e = SymmetricEigen::new(l);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| (t * v).exp()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

#[test]
fn spectral_heat_matches_dense_exponential() {
    let n = 16;
    let op = HeatOperator::new(n).unwrap();
    let x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i * i) as f64 * 0.37).sin()).collect();
    for &t in &[1e-4, 0.01, 0.3] {
        let want = dense_heat(n, t) * DVector::from_vec(x.clone());
        let got = op.apply(&x, t);
        for i in 0..n {
            assert!((got[i] - want[i]).abs() < 1e-12, "t={t} i={i}");
        }
        let lw = op.log_apply_exp(&x, t).unwrap();
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let want = dense_heat(n, t) * DVector::from_vec(ex);
        for i in 0..n {
            assert!((lw[i] - want[i].ln()).abs() < 1e-12);
        }
    }
}

/// Plain scaling iterations on the dense kernel.
fn dense_sinkhorn(mu: &[f64], nu: &[f64], eps: f64) -> f64 {
    let n = mu.len();
    let k = dense_heat(n, eps);
    let mut f = vec![1.0; n];
    let mut g = vec![1.0; n];
    for _ in 0..20_000 {
        for i in 0..n {
            f[i] = mu[i] / (0..n).map(|j| k[(i, j)] * g[j]).sum::<f64>();
        }
        for j in 0..n {
            g[j] = nu[j] / (0..n).map(|i| k[(i, j)] * f[i]).sum::<f64>();
        }
    }
    let dx = 1.0 / n as f64;
    let mut h = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = f[i] * k[(i, j)] * g[j];
            h += p * (f[i] * g[j]).ln();
        }
    }
    eps * h * dx
}

#[test]
fn sinkhorn_matches_dense_scaling() {
    let (mu, nu) = bump_pair(32);
    let eps = 0.1;
    let pots = sinkhorn(&mu, &nu, eps, SinkhornOptions::default()).unwrap();
    let want = dense_sinkhorn(mu.values(), nu.values(), eps);
    let got = schrodinger_cost(&pots).unwrap();
    assert!((got - want).abs() < 1e-9 * (1.0 + want), "{got} vs {want}");
}

#[test]
fn sinkhorn_marginals_and_gauge() {
    let (mu, nu) = bump_pair(128);
    for &eps in &[0.05, 0.1, 0.2] {
        let p = sinkhorn(&mu, &nu, eps, SinkhornOptions::default()).unwrap();
        assert!(p.marginal_error <= 1e-10, "eps={eps}: {}", p.marginal_error);
        let gauge: f64 = p.a.iter().sum::<f64>() - p.b.iter().sum::<f64>();
        assert!(gauge.abs() < 1e-9);
    }
}

#[test]
fn costs_are_time_reversible() {
    let (mu, nu) = bump_pair(64);
    let eps = 0.1;
    let p = sinkhorn(&mu, &nu, eps, SinkhornOptions::default()).unwrap();
    let q = sinkhorn(&nu, &mu, eps, SinkhornOptions::default()).unwrap();
    let a = entropic_cost(&mu, &nu, &p, 100, Exec::default()).unwrap();
    let b = entropic_cost(&nu, &mu, &q, 100, Exec::default()).unwrap();
    assert!((a.sch - b.sch).abs() < 1e-10);
    assert!((a.a_ent - b.a_ent).abs() < 1e-10);
    assert!((a.dynamic_action - b.dynamic_action).abs() < 1e-10);
    assert!((a.sch - (0.5 * a.a_ent + 0.5 * eps * (a.ent_mu + a.ent_nu))).abs() < 1e-12);
}

#[test]
fn three_routes_and_dual_identity() {
    let (mu, nu) = bump_pair(128);
    for &eps in &[0.05, 0.1] {
        let p = sinkhorn(&mu, &nu, eps, SinkhornOptions::default()).unwrap();
        let b = entropic_cost(&mu, &nu, &p, 200, Exec::default()).unwrap();
        let rel = (b.a_ent - b.dynamic_action).abs() / b.a_ent;
        assert!(rel <= 0.01, "eps={eps}: {rel}");
        let k = kantorovich_dual(&p, &mu, &nu, &b).unwrap();
        assert!(k.gap <= 1e-8, "{k:?}");
        assert!(k.sup_property);
    }
}

#[test]
fn heat_flowed_endpoint_has_zero_conserved_quantity() {
    let mu = GridMeasure::von_mises(64, 0.4, 6.0).unwrap();
    let eps = 0.05;
    let nu = GridMeasure::from_positive(HeatOperator::new(64).unwrap().apply(mu.values(), eps)).unwrap();
    let p = sinkhorn(&mu, &nu, eps, SinkhornOptions::default()).unwrap();
    let it = entropic_interpolation(&p, 50, Exec::Sequential).unwrap();
    let e = conserved_quantity(&it);
    assert!(e.values.iter().all(|v| v.abs() < 1e-7), "{:?}", e.values);
}

#[test]
fn newton_residual_refines_and_detects_sign_error() {
    let eps = 0.05;
    let run = |n: usize, s: usize| {
        let (mu, nu) = bump_pair(n);
        let p = sinkhorn(&mu, &nu, eps, SinkhornOptions::default()).unwrap();
        entropic_interpolation(&p, s, Exec::default()).unwrap()
    };
    let coarse = run(128, 200);
    let fine = run(256, 400);
    let r0 = newton_residual(&coarse).unwrap();
    let r1 = newton_residual(&fine).unwrap();
    assert!(r0.max_residual / r1.max_residual >= 3.0, "{} {}", r0.max_residual, r1.max_residual);
    let bad = newton_residual(&coarse.with_flipped_potential()).unwrap();
    assert!(bad.max_residual >= 10.0 * r0.max_residual);
}

#[test]
fn w2_of_translated_bumps() {
    let (mu, nu) = bump_pair(256);
    assert!((w2_oracle(&mu, &nu).unwrap() - 0.2).abs() < 1e-4);
    assert_eq!(w2_oracle(&mu, &mu).unwrap(), 0.0);
    let wide = GridMeasure::von_mises(64, 0.1, 2.0).unwrap();
    assert!(w2_oracle(&wide, &mu.clone()).is_err());
}

/// Monotone coupling of atoms at cell centres.
fn monotone_w2(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let x = |i: usize| (i as f64 + 0.5) / n as f64;
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    let mut cost = 0.0;
    while i < n && j < n {
        let m = ra.min(rb);
        cost += m * (x(i) - x(j)).powi(2);
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            ra = if i < n { a[i] } else { 0.0 };
        }
        if rb <= 1e-15 {
            j += 1;
            rb = if j < n { b[j] } else { 0.0 };
        }
    }
    cost.sqrt()
}

#[test]
fn w2_matches_monotone_coupling() {
    let (mu, nu) = (GridMeasure::von_mises(32, 0.35, 12.0).unwrap(), GridMeasure::von_mises(32, 0.55, 20.0).unwrap());
    let w = |m: &GridMeasure| m.values().iter().map(|v| v / 32.0).collect::<Vec<_>>();
    let want = monotone_w2(&w(&mu), &w(&nu));
    let got = w2_oracle(&mu, &nu).unwrap();
    assert!((got - want).abs() < 2e-3, "{got} vs {want}");
}

#[test]
fn gibbs_state_is_stationary() {
    let n = 64;
    let v = |x: f64| (2.0 * std::f64::consts::PI * x).cos();
    let kind = GridFlowKind::fokker_planck(v, n);
    let gibbs = GridMeasure::from_density(|x| (-v(x)).exp(), n).unwrap();
    let dt = stable_dt(&kind, &gibbs);
    let r = grid_flow(&kind, &gibbs, 0.01, dt, 10).unwrap();
    let last = r.snapshots.last().unwrap();
    for (a, b) in last.values().iter().zip(gibbs.values()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn heat_flow_converges_to_spectral_semigroup() {
    let n = 32;
    let mu = GridMeasure::von_mises(n, 0.5, 4.0).unwrap();
    let h0 = 0.2 * stable_dt(&GridFlowKind::Heat, &mu);
    let t = 200.0 * h0;
    let want = HeatOperator::new(n).unwrap().apply(mu.values(), t);
    let err = |dt: f64| {
        let r = grid_flow(&GridFlowKind::Heat, &mu, t, dt, 10_000).unwrap();
        assert!(r.lyapunov.non_increasing);
        assert!(r.max_mass_error < 1e-12);
        let got = r.snapshots.last().unwrap();
        got.values().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(h0), err(h0 / 2.0));
    assert!(e1 < 5e-3);
    assert!((e1 / e2 - 2.0).abs() < 0.1, "{e1} {e2}");
}

#[test]
fn bridge_contraction_has_positive_margin() {
    let (mu, nu) = (GridMeasure::von_mises(64, 0.3, 12.0).unwrap(), GridMeasure::von_mises(64, 0.5, 6.0).unwrap());
    let c = contraction_check(&mu, &nu, 0.1, 0.05, 50, Exec::default()).unwrap();
    assert!(c.report.margin >= -1e-8, "{:?}", c.report);
    assert!(c.correction > 0.0);
    let same = contraction_check(&mu, &mu, 0.1, 0.05, 50, Exec::default()).unwrap();
    assert_eq!(same.correction, 0.0);
}

#[test]
fn sweep_for_equal_marginals_vanishes() {
    let mu = GridMeasure::von_mises(128, 0.5, 12.0).unwrap();
    let t = epsilon_sweep(&mu, &mu, &[0.2, 0.1, 0.05], Exec::default()).unwrap();
    assert!(t.gap_decreasing);
    assert!(t.rows.iter().all(|r| r.w2sq_over_4 == 0.0 && r.gap == r.sch));
    let u = GridMeasure::uniform(64).unwrap();
    let t = epsilon_sweep(&u, &u, &[0.2, 0.1], Exec::default()).unwrap();
    assert!(t.rows.iter().all(|r| r.sch.abs() < 1e-14 && r.a_ent.abs() < 1e-14));
}
