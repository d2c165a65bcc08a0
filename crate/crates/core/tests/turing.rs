use std::f64::consts::PI;

use lab_core::reaction_diffusion::{
    initial_state, linear_growth_rate, pattern_stats, turing_simulate, turing_step, turing_step_with, Coupling, Field2D,
    TuringParams, TuringSim, STEADY_STATE,
};
use lab_core::Execution;
use proptest::prelude::*;

fn params(a: f64, b: f64, n: usize) -> TuringParams {
    TuringParams {
        activator_diffusion: a,
        inhibitor_diffusion: b,
        dt: 0.01,
        dx: 1.0,
        nx: n,
        ny: n,
        coupling: Coupling::Inhibitor,
    }
}

fn cosine_amplitude(field: &Field2D, k: usize) -> f64 {
    let mut acc = 0.0;
    for iy in 0..field.ny {
        for ix in 0..field.nx {
            acc += (field.get(ix, iy) - STEADY_STATE.0) * (2.0 * PI * (k * ix) as f64 / field.nx as f64).cos();
        }
    }
    acc
}

#[test]
fn fourier_mode_follows_linear_rate() {
    for coupling in [Coupling::Inhibitor, Coupling::Verbatim] {
        let mut p = params(0.5, 1.0, 32);
        p.coupling = coupling;
        let k = 1;
        let u = Field2D::from_fn(32, 32, 1.0, |ix, _| {
            STEADY_STATE.0 + 1e-6 * (2.0 * PI * (k * ix) as f64 / 32.0).cos()
        });
        let v = Field2D::filled(32, 32, 1.0, STEADY_STATE.1);
        let mut sim = TuringSim::new(p, u, v).unwrap();
        let mut amps = Vec::new();
        for step in 0..=600 {
            if step == 200 || step == 600 {
                amps.push(cosine_amplitude(&sim.u, k));
            }
            if step < 600 {
                sim.step(Execution::Sequential).unwrap();
            }
        }
        let measured = (amps[1] / amps[0]).ln() / 4.0;
        let k2 = 2.0 - 2.0 * (2.0 * PI / 32.0).cos();
        let lambda = linear_growth_rate(0.5, 1.0, coupling, k2);
        // Forward Euler multiplies the mode by 1 + dt·λ per step.
        let expected = (1.0 + p.dt * lambda).ln() / p.dt;
        assert!((measured - expected).abs() < 1e-4, "{coupling:?}: {measured} vs {expected}");
    }
}

#[test]
fn zero_noise_stays_homogeneous() {
    let snaps = turing_simulate(&params(0.5, 2.0, 16), 3, 0.0, 50, 50, Execution::Sequential).unwrap();
    assert_eq!(snaps.len(), 2);
    for (u, v) in &snaps {
        assert!(u.values.iter().all(|&x| x == STEADY_STATE.0));
        assert!(v.values.iter().all(|&x| x == STEADY_STATE.1));
    }
}

#[test]
fn seeded_runs_repeat_and_ignore_policy() {
    let p = params(0.25, 4.0, 24);
    let a = turing_simulate(&p, 11, 0.05, 40, 10, Execution::Sequential).unwrap();
    let b = turing_simulate(&p, 11, 0.05, 40, 10, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let c = turing_simulate(&p, 12, 0.05, 40, 10, Execution::Sequential).unwrap();
    assert_ne!(a, c);
}

#[test]
fn noise_decays_for_printed_kinetics() {
    let p = params(0.25, 4.0, 32);
    let snaps = turing_simulate(&p, 5, 0.1, 1000, 1000, Execution::Parallel).unwrap();
    let s0 = pattern_stats(&snaps[0].0).std;
    let s1 = pattern_stats(&snaps[1].0).std;
    assert!(s1 < s0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn step_commutes_with_translation(seed in 0u64..1000, sx in 0usize..12, sy in 0usize..12) {
        let p = params(0.3, 1.5, 12);
        let (u, v) = initial_state(&p, seed, 0.5);
        let (u1, v1) = turing_step(&u, &v, &p).unwrap();
        let (us, vs) = turing_step(&u.shifted(sx, sy), &v.shifted(sx, sy), &p).unwrap();
        prop_assert_eq!(us, u1.shifted(sx, sy));
        prop_assert_eq!(vs, v1.shifted(sx, sy));
    }

    #[test]
    fn zero_diffusion_bump_stays_local(ix in 0usize..16, iy in 0usize..16, bump in -2.0f64..2.0) {
        let p = params(0.0, 0.0, 16);
        let mut u = Field2D::filled(16, 16, 1.0, STEADY_STATE.0);
        let v = Field2D::filled(16, 16, 1.0, STEADY_STATE.1);
        u.set(ix, iy, STEADY_STATE.0 + bump);
        let (mut uu, mut vv) = (u, v);
        for _ in 0..20 {
            (uu, vv) = turing_step_with(&uu, &vv, &p, Execution::Parallel).unwrap();
        }
        for y in 0..16 {
            for x in 0..16 {
                if (x, y) != (ix, iy) {
                    prop_assert_eq!(uu.get(x, y), STEADY_STATE.0);
                    prop_assert_eq!(vv.get(x, y), STEADY_STATE.1);
                }
            }
        }
    }
}
