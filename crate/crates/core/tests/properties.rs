use ess_stab::certify::{analyze, density_experiment, Analysis, CertifyOptions, DensityOptions, Overall, Verdict};
use ess_stab::compactify::infinity_singularities;
use ess_stab::model::{distance, monomial_count, EssField};
use ess_stab::perturb::rotate_family;
use ess_stab::polycycle::{detect_square_polycycle, TOL_GENERIC};
use ess_stab::singular::{find_finite_singularities, Corner, Rect, TOL_HYPERBOLIC};
use proptest::prelude::*;

fn arb_field(d: u32) -> impl Strategy<Value = EssField> {
    proptest::collection::vec(-3.0f64..3.0, 2 * monomial_count(d))
        .prop_map(move |v| EssField::from_coefficient_vector(d, &v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corners_are_always_singular(x in arb_field(1)) {
        if let Ok(fin) = find_finite_singularities(&x, Rect::default(), TOL_HYPERBOLIC) {
            for c in Corner::ALL {
                prop_assert!(fin.iter().any(|s| s.finite_xy() == Some(c.xy())));
            }
            let ev = x.evaluator();
            for s in &fin {
                let (a, b) = s.finite_xy().unwrap();
                let v = ev.vector(a, b);
                let scale = 1.0 + a.abs().max(b.abs()).powi(x.n() as i32);
                prop_assert!(v[0].hypot(v[1]) <= 1e-8 * scale, "{a} {b} {v:?}");
            }
        }
    }

    #[test]
    fn equator_points_come_in_antipodal_pairs(x in arb_field(2)) {
        if let Ok(inf) = infinity_singularities(&x, TOL_HYPERBOLIC) {
            for s in &inf {
                let twin = inf.iter().find(|o| o.chart == s.chart.antipode() && o.u0 == s.u0);
                prop_assert!(twin.is_some());
                let t = twin.unwrap();
                for k in 0..3 {
                    prop_assert!((t.direction[k] + s.direction[k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn reversal_inverts_the_ratio(x in arb_field(1)) {
        let a = detect_square_polycycle(&x, TOL_HYPERBOLIC, TOL_GENERIC);
        let b = detect_square_polycycle(&x.reversed(), TOL_HYPERBOLIC, TOL_GENERIC);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a.exists, b.exists);
            if let (Some(ra), Some(rb)) = (a.ratio, b.ratio) {
                prop_assert!((ra * rb - 1.0).abs() < 1e-12);
                prop_assert_ne!(a.orientation, b.orientation);
            }
        }
    }

    #[test]
    fn rotation_distance_is_linear(x in arb_field(2), eps in 0.01f64..1.0, l in -2.0f64..2.0) {
        let y = rotate_family(&x, eps, l);
        prop_assert!(y.lambda_invariant());
        let rho = distance(&x, &y).unwrap();
        let want = l.abs() * eps * (x.f().coeff_norm().powi(2) + x.g().coeff_norm().powi(2)).sqrt();
        prop_assert!((rho - want).abs() <= 1e-12 * want.max(1e-300));
    }
}

fn overall_rule(a: &Analysis) -> Overall {
    let c = &a.certificate;
    let v = [&c.a_prime, &c.b_prime, &c.c, &c.d_prime];
    if v.iter().all(|v| matches!(v, Verdict::Pass)) {
        Overall::InPd
    } else if v.iter().any(|v| matches!(v, Verdict::Fail(_))) {
        Overall::NotInPd
    } else {
        Overall::Inconclusive
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn certificate_is_consistent_and_serializable(x in arb_field(1)) {
        let a = analyze(&x, &CertifyOptions::default());
        prop_assert_eq!(a.certificate.overall, overall_rule(&a));
        if a.certificate.overall == Overall::InPd {
            prop_assert!(a.certificate.margins.hyperbolicity.is_some_and(|m| m > 0.0));
            prop_assert!(a.cycles.cycles.len() <= 1);
        }
        let back: Analysis = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn matching_pennies_analysis() {
    let a = analyze(&EssField::matching_pennies(), &CertifyOptions::default());
    assert_eq!(a.finite.len(), 5);
    assert!(a.polycycle.as_ref().is_some_and(|p| p.exists && !p.generic));
    assert!(matches!(a.certificate.a_prime, Verdict::Fail(_)));
    assert!(matches!(a.certificate.d_prime, Verdict::Fail(_)));
    assert_eq!(a.certificate.overall, Overall::NotInPd);
}

#[test]
fn density_is_seed_deterministic() {
    let mut o = DensityOptions::new(1, 6, 11, 1.0);
    o.probes = 2;
    let a = density_experiment(&o).unwrap();
    let b = density_experiment(&o).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.in_pd + a.not_in_pd + a.inconclusive, 6);
    o.seed = 12;
    let c = density_experiment(&o).unwrap();
    assert_ne!(a.records[0].coefficients, c.records[0].coefficients);
    // Samples lie in the coefficient ball.
    for r in &a.records {
        assert!(r.coefficients.iter().map(|v| v * v).sum::<f64>() <= 1.0);
    }
}
