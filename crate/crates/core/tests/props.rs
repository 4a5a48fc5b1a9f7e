use ottolab_core::bridge::{schrodinger_cost, sinkhorn, SinkhornOptions};
use ottolab_core::ineq::theta;
use ottolab_core::interp::{action, action_gradient, SamplePath};
use ottolab_core::measure::{velocity_potential, GridMeasure, HeatOperator};
use ottolab_core::potential::{NParam, PotentialSpec};
use proptest::prelude::*;

fn potentials() -> impl Strategy<Value = (PotentialSpec, f64)> {
    prop_oneof![
        (0.2f64..3.0, -2.0f64..2.0).prop_map(|(c, x)| (PotentialSpec::quadratic(1, c).unwrap(), x)),
        (0.5f64..3.0, 0.2f64..3.0).prop_map(|(n, x)| (PotentialSpec::neg_log(n).unwrap(), x)),
        (0.2f64..2.0, 0.5f64..3.0, -0.8f64..0.8).prop_map(|(rho, n, u)| {
            let half = std::f64::consts::FRAC_PI_2 / (rho / n).sqrt();
            (PotentialSpec::log_cos(rho, n).unwrap(), u * half)
        }),
        (0.2f64..2.0, 0.5f64..3.0, 0.2f64..3.0)
            .prop_map(|(rho, n, x)| (PotentialSpec::log_sinh(-rho, n).unwrap(), x)),
        (prop::collection::vec(-1.0f64..1.0, 5), -1.5f64..1.5)
            .prop_map(|(c, x)| (PotentialSpec::polynomial(vec![c]).unwrap(), x)),
    ]
}

fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_hessian_match_differences((f, x) in potentials()) {
        let h = 1e-5 * (1.0 + x.abs());
        let fd = (f.eval(&[x + h]).unwrap() - f.eval(&[x - h]).unwrap()) / (2.0 * h);
        let g = f.grad(&[x]).unwrap()[0];
        prop_assert!((fd - g).abs() <= 1e-5 * (1.0 + g.abs()), "{fd} vs {g}");
        let fd2 = (f.grad(&[x + h]).unwrap()[0] - f.grad(&[x - h]).unwrap()[0]) / (2.0 * h);
        let hv = f.hessian_vector(&[x], &[1.0]).unwrap()[0];
        prop_assert!((fd2 - hv).abs() <= 1e-4 * (1.0 + hv.abs()), "{fd2} vs {hv}");
    }

    #[test]
    fn newton_jacobian_is_derivative_of_rhs((f, x) in potentials(), eps in 0.1f64..2.0) {
        let h = 1e-5 * (1.0 + x.abs());
        let fd = (f.newton_rhs(&[x + h], eps).unwrap()[0] - f.newton_rhs(&[x - h], eps).unwrap()[0]) / (2.0 * h);
        let j = f.newton_jacobian(&[x], eps).unwrap()[(0, 0)];
        prop_assert!((fd - j).abs() <= 1e-4 * (1.0 + j.abs()), "{fd} vs {j}");
    }

    #[test]
    fn action_gradient_matches_differences(
        knots in prop::collection::vec(-1.0f64..1.0, 9),
        eps in 0.1f64..2.0,
        k in 0usize..9,
    ) {
        let f = PotentialSpec::polynomial(vec![vec![0.0, 0.3, 0.5, 0.0, 0.1]]).unwrap();
        let path = |v: &[f64]| SamplePath {
            knots: v.iter().map(|x| vec![*x]).collect(),
            eps,
            duration: 1.0,
            potential: f.clone(),
        };
        let g = action_gradient(&path(&knots)).unwrap()[k][0];
        let h = 1e-6;
        let (mut p, mut m) = (knots.clone(), knots.clone());
        p[k] += h;
        m[k] -= h;
        let fd = (action(&path(&p)).unwrap() - action(&path(&m)).unwrap()) / (2.0 * h);
        prop_assert!((fd - g).abs() <= 1e-5 * (1.0 + g.abs()), "{fd} vs {g}");
    }

    #[test]
    fn theta_identity(a in -3.0f64..3.0, s in 0.0f64..1.0) {
        prop_assume!(a.abs() > 1e-6);
        let lhs = theta(a, s) * (-(-2.0 * a).exp_m1());
        let rhs = -(-2.0 * a * s).exp_m1();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn entropy_is_nonnegative_and_decreases_under_heat(v in positive_vec(32), t in 1e-4f64..0.1) {
        let mu = GridMeasure::from_samples(v).unwrap();
        prop_assert!(mu.entropy() >= -1e-15);
        let op = HeatOperator::new(32).unwrap();
        let flowed = op.apply(mu.values(), t);
        let mass: f64 = flowed.iter().sum::<f64>() / 32.0;
        prop_assert!((mass - 1.0).abs() < 1e-13);
        let nu = GridMeasure::from_positive(flowed).unwrap();
        prop_assert!(nu.entropy() <= mu.entropy() + 1e-14);
    }

    #[test]
    fn velocity_is_recovered_from_continuity(v in positive_vec(32), phi in prop::collection::vec(-1.0f64..1.0, 32)) {
        let mu = GridMeasure::from_samples(v).unwrap();
        let n = 32;
        let dx = 1.0 / n as f64;
        let vel: Vec<f64> = (0..n).map(|i| (phi[(i + 1) % n] - phi[i]) / dx).collect();
        let flux: Vec<f64> = (0..n)
            .map(|i| 0.5 * (mu.values()[i] + mu.values()[(i + 1) % n]) * vel[i])
            .collect();
        let rate: Vec<f64> = (0..n).map(|i| -(flux[i] - flux[(i + n - 1) % n]) / dx).collect();
        let got = velocity_potential(&mu, &rate).unwrap();
        for i in 0..n {
            prop_assert!((got.velocity[i] - vel[i]).abs() < 1e-8 * (1.0 + vel[i].abs()));
        }
        prop_assert!(got.residual < 1e-8);
    }

    #[test]
    fn n_param_round_trips(n in prop_oneof![Just(f64::INFINITY), 0.1f64..100.0]) {
        let p = NParam(n);
        let s = serde_json::to_string(&p).unwrap();
        let back: NParam = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back.0, n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sinkhorn_is_symmetric_and_nonnegative(a in positive_vec(32), b in positive_vec(32), eps in 0.05f64..0.3) {
        let mu = GridMeasure::from_samples(a).unwrap();
        let nu = GridMeasure::from_samples(b).unwrap();
        let p = sinkhorn(&mu, &nu, eps, SinkhornOptions::default()).unwrap();
        let q = sinkhorn(&nu, &mu, eps, SinkhornOptions::default()).unwrap();
        prop_assert!(p.marginal_error <= 1e-10);
        let (s1, s2) = (schrodinger_cost(&p).unwrap(), schrodinger_cost(&q).unwrap());
        prop_assert!((s1 - s2).abs() <= 1e-10 * (1.0 + s1.abs()));
        prop_assert!(s1 >= -1e-12);
    }
}
