mod common;

use std::f64::consts::PI;

use hstv::radial::{eval_average_gap, radial_htv, radial_htv_annulus, RadialProfile};
use hstv::schatten::PExponent;
use proptest::prelude::*;

const PS: [PExponent; 3] = [PExponent::ONE, PExponent::TWO, PExponent::Infinity];

fn breakpoint_free(prof: &RadialProfile, r: f64) -> bool {
    prof.pieces().iter().all(|p| (p.to - r).abs() > 1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn additive_in_radius(seed in any::<u64>(), a in 0.05f64..0.45, b in 0.55f64..0.95) {
        let prof = common::random_profile(&mut common::rng(seed), 1.0);
        prop_assume!(breakpoint_free(&prof, a) && breakpoint_free(&prof, b));
        for p in PS {
            let whole = radial_htv(&prof, p, b).unwrap().value;
            let inner = radial_htv(&prof, p, a).unwrap().value;
            let ring = radial_htv_annulus(&prof, p, a, b).unwrap();
            prop_assert!((whole - inner - ring).abs() <= 1e-9 * (1.0 + whole));
        }
    }

    #[test]
    fn monotone_in_radius_and_p(seed in any::<u64>(), a in 0.05f64..0.5, b in 0.5f64..1.0) {
        let prof = common::random_profile(&mut common::rng(seed), 1.0);
        for p in PS {
            prop_assert!(radial_htv(&prof, p, a).unwrap().value <= radial_htv(&prof, p, b).unwrap().value + 1e-12);
        }
        let v: Vec<f64> = PS.iter().map(|&p| radial_htv(&prof, p, b).unwrap().value).collect();
        prop_assert!(v[2] <= v[1] * (1.0 + 1e-12) + 1e-12);
        prop_assert!(v[1] <= v[0] * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn cone_matches_closed_form(r in 0.01f64..5.0, three in any::<bool>()) {
        let d = if three { 3usize } else { 2 };
        let omega = if three { 4.0 * PI / 3.0 } else { PI };
        let cone = RadialProfile::cone(d);
        for (p, inv) in [(PExponent::ONE, 1.0), (PExponent::TWO, 0.5), (PExponent::Infinity, 0.0)] {
            let expected = d as f64 * omega
                * (((d - 1) as f64).powf(inv - 1.0) * r.min(1.0).powi(d as i32 - 1) + if r > 1.0 { 1.0 } else { 0.0 });
            let got = radial_htv(&cone, p, r).unwrap().value;
            prop_assert!((got - expected).abs() <= 1e-9 * expected);
        }
    }

    #[test]
    fn average_gap_bound(seed in any::<u64>(), frac in 0.01f64..0.5) {
        let mut rng = common::rng(seed);
        let prof = common::random_profile(&mut rng, 2.0);
        let g = eval_average_gap(&prof, frac * 2.0).unwrap();
        prop_assert!(g.holds, "gap {} above bound {}", g.gap, g.bound);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let prof = common::random_profile(&mut common::rng(seed), 1.5);
        prop_assert_eq!(RadialProfile::from_json(&prof.to_json()).unwrap(), prof);
    }
}
