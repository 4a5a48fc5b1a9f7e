use ottolab_core::ineq::{
    check_contraction, check_conforti, check_costa, check_evi, check_talagrand, Discretization, EviForm,
};
use ottolab_core::interp::minimize_direct;
use ottolab_core::potential::{NParam, PotentialSpec};

fn disc() -> Discretization {
    Discretization { s: 256, ..Discretization::default() }
}

#[test]
fn quadratic_contraction_both_exponents() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    for &(x, y, eps, t) in &[(-2.0, 1.5, 0.5, 0.5), (1.0, 2.0, 1.0, 1.0), (0.5, -0.5, 0.1, 0.1)] {
        let r = check_contraction(&f, 1.0, NParam::INF, &[x], &[y], eps, t, disc()).unwrap();
        assert!(r.pass(), "{r:?}");
        // Along the quadratic flow A(S_t x, S_t y) = e^{−2t} A(x, y).
        let a = r.proof_exponent.params["A_xy"].as_f64().unwrap();
        assert!((r.proof_exponent.lhs - (-2.0 * t).exp() * a).abs() < 1e-6 * a.max(1e-3));
    }
}

#[test]
fn neg_log_contraction_has_dimensional_correction() {
    let f = PotentialSpec::neg_log(1.0).unwrap();
    let r = check_contraction(&f, 0.0, NParam(1.0), &[0.5], &[2.0], 0.5, 0.3, disc()).unwrap();
    assert!(r.correction > 0.0);
    assert!(r.pass(), "{r:?}");
}

#[test]
fn conforti_and_costa_along_interpolations() {
    let grid: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    let it = minimize_direct(&f, &[-1.5], &[1.8], 0.5, 256, None).unwrap();
    assert!(check_conforti(&f, 1.0, &it, &grid).unwrap().pass);

    let g = PotentialSpec::neg_log(1.0).unwrap();
    let it = minimize_direct(&g, &[0.3], &[2.5], 1.0, 256, None).unwrap();
    assert!(check_costa(&g, NParam(1.0), &it).unwrap().pass);
    assert!(check_conforti(&g, 0.0, &it, &grid).unwrap().pass);

    let h = PotentialSpec::log_cos(1.0, 1.0).unwrap();
    let it = minimize_direct(&h, &[-0.4], &[0.6], 0.5, 256, None).unwrap();
    assert!(check_costa(&h, NParam(1.0), &it).unwrap().pass);
}

#[test]
fn talagrand_for_quadratic() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    for &x in &[-2.0, 0.5, 2.0] {
        let r = check_talagrand(&f, 1.0, &[0.0], &[x], 0.5, 256).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn evi_in_both_forms() {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    let r = check_evi(&f, EviForm::Rho(1.0), &[2.0], &[0.0], 0.5, disc()).unwrap();
    assert!(r.pass, "{r:?}");
    let g = PotentialSpec::neg_log(1.0).unwrap();
    let r = check_evi(&g, EviForm::Dim(1.0), &[0.8], &[1.6], 0.5, disc()).unwrap();
    assert!(r.pass, "{r:?}");
}
