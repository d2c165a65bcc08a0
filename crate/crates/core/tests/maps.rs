use lab_core::maps::{
    bifurcation_diagram, critical_return, feigenbaum_delta, henon_fixed_points, henon_orbit, logistic_orbit,
    superstable_params, HenonParams, LogisticParams,
};
use lab_core::Execution;
use proptest::prelude::*;

// Superstable parameters from a 60-digit bisection.
const R_ORACLE: [f64; 12] = [
    2.0,
    3.2360679774997896964,
    3.49856169932770152,
    3.5546408627688248654,
    3.566667379856268514,
    3.5692435316371103378,
    3.5697952937499446205,
    3.5699134654223485148,
    3.5699387742333054878,
    3.5699441946080649332,
    3.5699453554864685809,
    3.5699456041110784381,
];

const DELTA_ORACLE: [f64; 8] = [
    4.7089430135405,
    4.6807709980107,
    4.6629596111141,
    4.6684039259184,
    4.66895374096762,
    4.66915718132884,
    4.6691910024851,
    4.66919947054773,
];

#[test]
fn superstable_parameters_match_oracle() {
    let r = superstable_params(10).unwrap();
    assert_eq!(r[0], 2.0);
    assert!((r[1] - (1.0 + 5f64.sqrt())).abs() < 1e-12);
    for (m, (got, want)) in r.iter().zip(R_ORACLE).enumerate() {
        assert!((got - want).abs() < 1e-11, "R_{} = {got}, oracle {want}", m + 1);
        assert!(critical_return(*got, m + 1).abs() < 1e-9);
    }
}

#[test]
fn delta_estimates_match_oracle() {
    let d = feigenbaum_delta(10).unwrap();
    assert_eq!(d.len(), 8);
    for (i, (got, want)) in d.iter().zip(DELTA_ORACLE).enumerate() {
        assert!((got - want).abs() < 1e-5, "delta_{} = {got}, oracle {want}", i + 2);
    }
}

#[test]
fn bifurcation_cloud_is_policy_independent() {
    let a = bifurcation_diagram(2.8, 4.0, 64, 200, 50, 0.3, Execution::Sequential).unwrap();
    let b = bifurcation_diagram(2.8, 4.0, 64, 200, 50, 0.3, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points.len(), 64 * 50);
    assert!(a.points.iter().all(|&(r, x)| (2.8..=4.0).contains(&r) && (0.0..=1.0).contains(&x)));
}

#[test]
fn period_two_window() {
    // Between R_1 = 2 and r = 1 + √6 the attractor is a 2-cycle.
    let orbit = logistic_orbit(&LogisticParams::new(3.2).unwrap(), 0.3, 2000, 4).unwrap();
    assert!((orbit[0] - orbit[2]).abs() < 1e-12);
    assert!((orbit[0] - orbit[1]).abs() > 0.1);
}

#[test]
fn henon_attractor_stays_in_box() {
    let orbit = henon_orbit(&HenonParams::default(), 0.0, 0.0, 1000, 10_000).unwrap();
    assert!(orbit
        .iter()
        .all(|&(x, y)| (-1.5..=1.5).contains(&x) && (-0.45..=0.45).contains(&y)));
}

#[test]
fn henon_fixed_points_are_fixed() {
    let p = HenonParams::default();
    for fp in henon_fixed_points(&p).unwrap() {
        let q = p.apply(fp);
        assert!((q.0 - fp.0).abs() < 1e-14 && (q.1 - fp.1).abs() < 1e-14);
    }
}

proptest! {
    #[test]
    fn logistic_orbit_stays_in_unit_interval(r in 0.01f64..=4.0, x0 in 0.0f64..=1.0) {
        let orbit = logistic_orbit(&LogisticParams::new(r).unwrap(), x0, 10, 200).unwrap();
        prop_assert!(orbit.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn logistic_fixed_point(r in 1.05f64..2.95) {
        let orbit = logistic_orbit(&LogisticParams::new(r).unwrap(), 0.4, 5000, 1).unwrap();
        prop_assert!((orbit[0] - (1.0 - 1.0 / r)).abs() < 1e-9);
    }

    #[test]
    fn henon_round_trip_on_attractor(start in 0usize..2000, n in 1usize..4) {
        let p = HenonParams::default();
        let orbit = henon_orbit(&p, 0.0, 0.0, 500, 2000).unwrap();
        let (x, y) = orbit[start];
        let mut q = (x, y);
        for _ in 0..n {
            q = p.apply(q);
        }
        for _ in 0..n {
            q = p.invert(q);
        }
        prop_assert!((q.0 - x).abs() < 1e-10 && (q.1 - y).abs() < 1e-10);
    }

    #[test]
    fn henon_single_step_inverts_exactly_enough(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let p = HenonParams::default();
        let (bx, by) = p.invert(p.apply((x, y)));
        prop_assert!((bx - x).abs() < 1e-12 && (by - y).abs() < 1e-10);
    }
}
