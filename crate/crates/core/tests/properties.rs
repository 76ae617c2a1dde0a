use proptest::prelude::*;

use skrein::asymptotics::{
    predict_heat_expansion, series_inverse, series_mul, FractionalSeries, LatticeExponent, Variable,
};
use skrein::green_krein::{krein_k, krein_residual};
use skrein::model::{eval_potential, validate};
use skrein::singular_ode::{connection_coefficients, solve_l, solve_r};
use skrein::specfun::gamma;
use skrein::spectrum::eigenvalues;
use skrein::{ExtensionParam, Potential, ProblemSpec};

fn cheap() -> ProptestConfig {
    ProptestConfig::with_cases(256)
}

fn costly() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

/// Random z-series with a unit term and positive exponents (p, q ≤ 3).
fn unit_series(nu: f64) -> impl Strategy<Value = FractionalSeries> {
    prop::collection::vec(((0i32..4, 0i32..4), -2.0f64..2.0), 1..6).prop_map(move |terms| {
        let mut s = FractionalSeries::one(Variable::Z, nu, 3.0);
        for ((p, q), c) in terms {
            if p + q > 0 {
                s.add_term(LatticeExponent::new(p, q), 0, c);
            }
        }
        s
    })
}

fn max_gap(a: &FractionalSeries, b: &FractionalSeries) -> f64 {
    let mut keys: Vec<_> = a.terms.keys().chain(b.terms.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| {
            let x = a.coeff(k.exponent, k.theta_power);
            let y = b.coeff(k.exponent, k.theta_power);
            (x - y).abs() / (1.0 + x.abs().max(y.abs()))
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn gamma_reflection(x in 0.001f64..0.999) {
        let v = gamma(x).unwrap() * gamma(1.0 - x).unwrap() * (std::f64::consts::PI * x).sin() / std::f64::consts::PI;
        prop_assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn validation_is_idempotent(nu in 0.05f64..0.95, coeffs in prop::collection::vec(0.0f64..3.0, 0..9), r in 0.2f64..5.0) {
        prop_assume!((nu - 0.5).abs() > 1e-3);
        let spec = ProblemSpec::unchecked(nu, coeffs, r);
        let once = validate(&spec).unwrap();
        let twice = validate(&once).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn horner_matches_term_sum(coeffs in prop::collection::vec(-3.0f64..3.0, 0..9), x in 0.0f64..4.0) {
        let p = Potential::new(coeffs.clone());
        let direct: f64 = coeffs.iter().enumerate().map(|(j, c)| c * x.powi(j as i32)).sum();
        let scale: f64 = coeffs.iter().enumerate().map(|(j, c)| (c * x.powi(j as i32)).abs()).sum();
        prop_assert!((eval_potential(&p, x) - direct).abs() <= 8.0 * f64::EPSILON * scale.max(1e-300));
    }

    #[test]
    fn series_mul_commutes_and_associates(a in unit_series(0.3), b in unit_series(0.3), c in unit_series(0.3)) {
        let ab = series_mul(&a, &b).unwrap();
        let ba = series_mul(&b, &a).unwrap();
        prop_assert!(max_gap(&ab, &ba) < 1e-14);
        let l = series_mul(&ab, &c).unwrap();
        let r = series_mul(&a, &series_mul(&b, &c).unwrap()).unwrap();
        prop_assert!(max_gap(&l, &r) < 1e-12);
    }

    #[test]
    fn series_inverse_is_two_sided(a in unit_series(0.37)) {
        let inv = series_inverse(&a).unwrap();
        let one = FractionalSeries::one(Variable::Z, 0.37, 3.0);
        let l = series_mul(&a, &inv).unwrap();
        let r = series_mul(&inv, &a).unwrap();
        // Coefficients grow geometrically; compare relative to their size.
        let size = inv.terms.values().fold(1.0f64, |m, c| m.max(c.abs()));
        prop_assert!(max_gap(&l, &one) < 1e-12 * size * size);
        prop_assert!(max_gap(&r, &one) < 1e-12 * size * size);
    }

    #[test]
    fn outputs_stay_on_the_lattice(a in unit_series(0.41), b in unit_series(0.41)) {
        let p = series_mul(&a, &b).unwrap();
        for k in p.terms.keys() {
            let v = k.exponent.value(0.41);
            prop_assert!(v <= 3.0 + 1e-12);
            prop_assert_eq!(v, 0.5 * k.exponent.p as f64 + 0.41 * k.exponent.q as f64);
        }
    }

    #[test]
    fn collision_flags_track_rational_orders(m in 1u32..12, d in 2u32..12, shift in prop::sample::select(vec![0.0, 1e-6])) {
        let nu = m as f64 / d as f64 + shift;
        prop_assume!(nu > 0.05 && nu < 0.95);
        let h = FractionalSeries::one(Variable::Z, nu, 4.0);
        let base = FractionalSeries::half_integer(Variable::Z, nu, 4.0, &[(2, nu)]);
        let trunc = 3.0;
        let e = predict_heat_expansion(nu, ExtensionParam::Finite(1.0), &h, &base, trunc).unwrap();
        let flagged = e.terms.iter().any(|t| t.collision);
        // Some q ≤ trunc/ν with 2qν an integer, i.e. ν = k/(2q).
        let q_max = (trunc / nu).floor() as i32;
        let expected = (1..=q_max).any(|q| {
            let x = 2.0 * q as f64 * nu;
            (x - x.round()).abs() < 2e-9
        });
        prop_assert_eq!(flagged, expected);
    }
}

proptest! {
    #![proptest_config(costly())]

    #[test]
    fn theta_round_trip(theta in -2.0f64..10.0, lambda in -20.0f64..20.0, nu in prop::sample::select(vec![0.3, 0.7])) {
        let spec = ProblemSpec::new(nu, vec![0.0, 1.0], 1.0).unwrap();
        let l = solve_l(&spec, ExtensionParam::Finite(theta), lambda).unwrap();
        let cc = connection_coefficients(&spec, lambda, &l).unwrap();
        prop_assert!((cc.theta() - theta).abs() < 1e-8 * (1.0 + theta.abs()));
    }

    #[test]
    fn wronskian_is_constant(theta in -1.0f64..5.0, z in 0.5f64..50.0) {
        let spec = ProblemSpec::new(0.7, vec![0.0, 1.0, 0.5], 1.0).unwrap();
        let lambda = -z;
        let l = solve_l(&spec, ExtensionParam::Finite(theta), lambda).unwrap();
        let r = solve_r(&spec, lambda).unwrap();
        let xs = [0.1, 0.3, 0.5, 0.7, 0.9];
        let a = l.sample_many(&xs).unwrap();
        let b = r.sample_many(&xs).unwrap();
        let w: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a.psi * b.dpsi - a.dpsi * b.psi).collect();
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((hi - lo) <= 1e-9 * lo.abs().max(hi.abs()));
    }

    #[test]
    fn krein_identity_holds(theta in -1.0f64..10.0, z in 2.0f64..50.0, x in 0.05f64..0.95, y in 0.05f64..0.95) {
        let spec = ProblemSpec::new(0.3, vec![0.0, 1.0], 1.0).unwrap();
        prop_assert!(krein_residual(&spec, theta, -z, x, y).unwrap().abs() < 1e-8);
    }

    #[test]
    fn krein_function_is_positive(z in 0.1f64..500.0, nu in 0.1f64..0.9) {
        prop_assume!((nu - 0.5).abs() > 1e-3);
        let spec = ProblemSpec::new(nu, vec![0.5, 0.0, 1.0], 1.0).unwrap();
        prop_assert!(krein_k(&spec, z).unwrap() > 0.0);
    }

    #[test]
    fn eigenvalues_monotone_in_theta(t1 in -1.0f64..10.0, t2 in -1.0f64..10.0) {
        prop_assume!((t1 - t2).abs() > 1e-3);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let spec = ProblemSpec::new(0.3, vec![], 1.0).unwrap();
        let a = eigenvalues(&spec, ExtensionParam::Finite(lo), 300.0).unwrap();
        let b = eigenvalues(&spec, ExtensionParam::Finite(hi), 300.0).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!(x < y);
        }
    }
}
