use ottolab_core::flow::{evolve, flow_map};
use ottolab_core::interp::{
    cost, cost_decompositions, dual_check, hj_value, minimize_direct, solve_shooting, Linear,
};
use ottolab_core::par::Exec;
use ottolab_core::potential::PotentialSpec;

/// Minimal action of `½ẇ² + ½ε²w²` from `x` to `y` over time `t`.
fn quad_cost(x: f64, y: f64, eps: f64, t: f64) -> f64 {
    let a = eps * t;
    eps * ((x * x + y * y) * a.cosh() - 2.0 * x * y) / (2.0 * a.sinh())
}

fn quad_path(x: f64, y: f64, eps: f64, s: f64) -> f64 {
    (x * (eps * (1.0 - s)).sinh() + y * (eps * s).sinh()) / eps.sinh()
}

#[test]
fn quadratic_loop_cost_matches_hyperbolic_form() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    for &eps in &[0.5f64, 1.0, 2.0] {
        for &x in &[1.0, 2.0] {
            let want = eps * (eps / 2.0).tanh() * x * x;
            assert!((want - quad_cost(x, x, eps, 1.0)).abs() < 1e-14);
            let got = cost(&f, &[x], &[x], eps, 2048).unwrap();
            assert!((got - want).abs() / want < 1e-4, "eps={eps} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn quadratic_two_point_cost_and_path() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    for &(x, y, eps) in &[(1.0, -0.5, 0.7), (0.3, 2.0, 1.5), (-1.0, 1.0, 0.2)] {
        let r = minimize_direct(&f, &[x], &[y], eps, 1024, None).unwrap();
        let want = quad_cost(x, y, eps, 1.0);
        assert!((r.cost - want).abs() / want < 1e-5);
        for (k, knot) in r.path.knots.iter().enumerate() {
            let s = k as f64 / 1024.0;
            assert!((knot[0] - quad_path(x, y, eps, s)).abs() < 1e-5);
        }
        let sh = solve_shooting(&f, &[x], &[y], eps, 1024).unwrap();
        assert!((sh.cost - r.cost).abs() < 1e-6);
    }
}

#[test]
fn two_dimensional_quadratic_separates() {
    let f = PotentialSpec::quadratic(2, 1.0).unwrap();
    let r = minimize_direct(&f, &[1.0, -1.0], &[0.5, 2.0], 1.0, 1024, None).unwrap();
    let want = quad_cost(1.0, 0.5, 1.0, 1.0) + quad_cost(-1.0, 2.0, 1.0, 1.0);
    assert!((r.cost - want).abs() / want < 1e-5);
}

#[test]
fn gradient_flow_paths_are_interpolations() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    let eps = 0.8f64;
    let x = 1.5;
    let r = minimize_direct(&f, &[x], &[x * (-eps).exp()], eps, 512, None).unwrap();
    for (k, knot) in r.path.knots.iter().enumerate() {
        let s = k as f64 / 512.0;
        assert!((knot[0] - x * (-eps * s).exp()).abs() < 1e-5);
    }
    assert!(r.hamiltonian.iter().all(|h| h.abs() < 1e-4));

    // ẋ = n/x gives x(t)² = x₀² + 2nt.
    let g = PotentialSpec::neg_log(1.0).unwrap();
    let (x0, eps) = (1.0f64, 0.5);
    let end = (x0 * x0 + 2.0 * eps).sqrt();
    let r = minimize_direct(&g, &[x0], &[end], eps, 512, None).unwrap();
    for (k, knot) in r.path.knots.iter().enumerate() {
        let s = k as f64 / 512.0;
        assert!((knot[0] - (x0 * x0 + 2.0 * eps * s).sqrt()).abs() < 1e-5);
    }
    assert!(r.hamiltonian.iter().all(|h| h.abs() < 1e-4));
}

#[test]
fn flow_matches_exponential_decay() {
    let f = PotentialSpec::quadratic(1, 2.0).unwrap();
    let x = flow_map(&f, &[3.0], 1.3, 1e-3).unwrap();
    assert!((x[0] - 3.0 * (-2.6f64).exp()).abs() < 1e-12);
    let tr = evolve(&f, &[3.0], 1.0, 1e-3).unwrap();
    let d = tr.dissipation_identity().unwrap();
    assert!(d.gap.abs() < 1e-8, "{d:?}");
    assert!(tr.lyapunov_violation().unwrap().is_none());
}

#[test]
fn hamiltonian_drift_is_second_order() {
    let f = PotentialSpec::neg_log(1.0).unwrap();
    let drift = |s| minimize_direct(&f, &[0.5], &[2.0], 1.0, s, None).unwrap().hamiltonian_drift();
    let (a, b) = (drift(128), drift(256));
    assert!(a / b > 3.5, "{a} {b}");
}

#[test]
fn cost_rewritings_agree() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    let r = minimize_direct(&f, &[1.0], &[-0.4], 0.9, 1024, None).unwrap();
    let d = cost_decompositions(&r).unwrap();
    assert!(d.max_gap < 1e-5, "{d:?}");
}

/// `inf_w p w + A_t(w, y)` in closed form.
fn hj_quadratic_linear(p: f64, y: f64, eps: f64, t: f64) -> f64 {
    let a = eps * t;
    let (c, s) = (a.cosh(), a.sinh());
    let w = (y * eps / s - p) / (eps * c / s);
    p * w + quad_cost(w, y, eps, t)
}

#[test]
fn hopf_lax_closed_form() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    for &(p, y, eps, t) in &[(0.7, 1.0, 1.0, 1.0), (-1.2, 0.3, 0.5, 0.6), (0.0, 2.0, 2.0, 1.0)] {
        let oracle = hj_quadratic_linear(p, y, eps, t);
        // Q_t h(y) = Q⁰_τ f(e^{−εt}y) + ε y²/2 with f = h − ε|·|²/2.
        let tau = -(-2.0 * eps * t).exp_m1() / (2.0 * eps);
        let z = (-eps * t).exp() * y;
        let w = (z / tau - p) / (1.0 / tau - eps);
        let formula = p * w - 0.5 * eps * w * w + (z - w).powi(2) / (2.0 * tau) + 0.5 * eps * y * y;
        assert!((formula - oracle).abs() < 1e-12, "{formula} vs {oracle}");
        let got = hj_value(&f, &Linear { slope: vec![p] }, t, &[y], eps, 1024).unwrap();
        assert!((got.value - oracle).abs() < 1e-5, "{} vs {oracle}", got.value);
    }
}

#[test]
fn dual_reaches_cost() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    let (x, y, eps) = (0.8, -0.6, 1.1);
    let slopes: Vec<Vec<f64>> = (-20..=20).map(|i| vec![i as f64 * 0.25]).collect();
    let d = dual_check(&f, &[x], &[y], eps, 512, &slopes, Exec::default()).unwrap();
    assert!(d.sup_value <= d.cost + 1e-4);
    assert!(d.cost - d.sup_value <= 1e-3, "{d:?}");
    assert!((d.value_at_interpolation_slope - d.cost).abs() < 1e-3);
}

#[test]
fn parallel_and_sequential_agree() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    let slopes: Vec<Vec<f64>> = (-4..=4).map(|i| vec![i as f64 * 0.5]).collect();
    let a = dual_check(&f, &[0.2], &[1.0], 0.5, 128, &slopes, Exec::Sequential).unwrap();
    let b = dual_check(&f, &[0.2], &[1.0], 0.5, 128, &slopes, Exec::default()).unwrap();
    assert_eq!(a.sup_value.to_bits(), b.sup_value.to_bits());
}
