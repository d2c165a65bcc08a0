//! Acceptance criteria. Pass criterion numbers as arguments to run a subset.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lab_cli::{run_manifest, ExperimentManifest};
use lab_core::arithmetic::{count_points_mod_p, primes_upto, product_series, rank_slope, CurveD, PointConvention};
use lab_core::complex::{
    self, cube_roots, escape_time, newton_point, Complex, EscapeOptions, Viewport,
};
use lab_core::flows::{
    hh_energy, hh_section, hh_trajectory, lorenz_attractor, lorenz_field, separation_growth, HHState, LorenzParams,
    SeedRule,
};
use lab_core::lattice::{detect_pulses, fput_simulate, kdv_simulate, kdv_soliton, mass, FputParams, KdvParams};
use lab_core::maps::{delta_ratios, henon_fixed_points, henon_orbit, superstable_params, HenonParams};
use lab_core::reaction_diffusion::{
    calibrate, pattern_stats, turing_simulate, turing_step, Coupling, Field2D, TuringParams, STEADY_STATE,
};
use lab_core::{Execution, StateVector};
use lab_validation::{check, run, Criterion, Outcome};

fn fput_recurrence() -> Outcome {
    let params = FputParams {
        n_masses: 32,
        alpha: 0.25,
        dt: 0.05,
    };
    let run = fput_simulate(&params, 1, 1.0, 20_000.0, 1.0).map_err(|e| e.to_string())?;
    let share = run.modes.share(1);
    let drop = share
        .iter()
        .position(|&s| s < 0.5)
        .ok_or_else(|| "mode-1 share never fell below 0.5".to_string())?;
    let back = share[drop..]
        .iter()
        .position(|&s| s > 0.9)
        .map(|i| drop + i)
        .ok_or_else(|| format!("share fell below 0.5 at t={} but never returned above 0.9", run.modes.times[drop]))?;
    let min_share = share[..back].iter().copied().fold(f64::INFINITY, f64::min);
    check(run.max_energy_drift < 1e-4, || format!("energy drift {:.3e} ≥ 1e-4", run.max_energy_drift))?;
    Ok(format!(
        "share < 0.5 at t={}, min {:.3}, back to {:.3} at t={}; drift {:.2e}",
        run.modes.times[drop], min_share, share[back], run.modes.times[back], run.max_energy_drift
    ))
}

fn feigenbaum() -> Outcome {
    let r = superstable_params(10).map_err(|e| e.to_string())?;
    check(r[0] == 2.0, || format!("R_1 = {} ≠ 2", r[0]))?;
    let r2 = 1.0 + 5f64.sqrt();
    check((r[1] - r2).abs() < 1e-9, || format!("R_2 = {} differs from 1+√5 by {:.2e}", r[1], r[1] - r2))?;
    let d = delta_ratios(&r);
    let (a, b) = (d[d.len() - 2], d[d.len() - 1]);
    check((a - b).abs() < 1e-3, || format!("last δ estimates {a:.6}, {b:.6} differ by more than 1e-3"))?;
    check((4.6..=4.75).contains(&a) && (4.6..=4.75).contains(&b), || {
        format!("δ estimates {a:.6}, {b:.6} outside [4.6, 4.75]")
    })?;
    Ok(format!("R_2 error {:.1e}; δ_8 = {a:.6}, δ_9 = {b:.6}", (r[1] - r2).abs()))
}

fn brute_force_count(d: u64, p: u64) -> u64 {
    let mut n = 0;
    for x in 0..p {
        let rhs = (x * x % p * x % p + p - d % p * x % p) % p;
        n += (0..p).filter(|y| y * y % p == rhs).count() as u64;
    }
    n
}

fn bsd_slopes() -> Outcome {
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for d in [1u64, 5, 34, 1254, 29274] {
        let curve = CurveD::new(d).map_err(|e| e.to_string())?;
        for p in primes_upto(199) {
            if curve.is_bad_prime(p) {
                continue;
            }
            let fast = count_points_mod_p(&curve, p).map_err(|e| e.to_string())?;
            let slow = brute_force_count(d, p);
            if fast != slow {
                failures.push(format!("d={d} p={p}: count {fast} vs brute force {slow}"));
            }
        }
    }
    let bounds: [(u64, Option<(f64, f64)>); 5] = [
        (1, Some((-0.3, 0.3))),
        (5, Some((0.65, 1.35))),
        (34, Some((1.6, 2.4))),
        (1254, None),
        (29274, None),
    ];
    for (d, range) in bounds {
        let curve = CurveD::new(d).map_err(|e| e.to_string())?;
        let series = product_series(&curve, 100_000, PointConvention::Projective, Execution::Parallel)
            .map_err(|e| e.to_string())?;
        let fit = rank_slope(&series, 100).map_err(|e| e.to_string())?;
        match range {
            Some((lo, hi)) => {
                let ok = (lo..=hi).contains(&fit.slope);
                notes.push(format!("d={d} {:.3}{}", fit.slope, if ok { "" } else { " (out of range)" }));
                if !ok {
                    failures.push(format!("d={d} slope {:.3} outside [{lo}, {hi}]", fit.slope));
                }
            }
            None => notes.push(format!("d={d} {:.3} (reported)", fit.slope)),
        }
    }
    let summary = format!("slopes: {}; counts for p < 200 checked by brute force", notes.join(", "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

fn lorenz() -> Outcome {
    let p = LorenzParams::default();
    let s = 72f64.sqrt();
    let expected = [[0.0, 0.0, 0.0], [s, s, 27.0], [-s, -s, 27.0]];
    let fixed = p.fixed_points();
    for e in expected {
        check(
            fixed.iter().any(|f| f.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-12)),
            || format!("fixed point {e:?} not found in {fixed:?}"),
        )?;
        let f = lorenz_field(&p, &e).map_err(|e| e.to_string())?;
        let norm = f.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        check(norm < 1e-12, || format!("|f({e:?})| = {norm:.2e}"))?;
    }
    let s0 = StateVector::new(vec![1.0, 1.0, 1.0]).unwrap();
    let traj = lorenz_attractor(&p, &s0, 0.01, 1000, 50_000).map_err(|e| e.to_string())?;
    let outside = traj
        .states()
        .iter()
        .filter(|s| !(s[0].abs() <= 25.0 && s[1].abs() <= 35.0 && (0.0..=55.0).contains(&s[2])))
        .count();
    check(outside == 0, || format!("{outside} of 50001 samples left |x|≤25, |y|≤35, 0≤z≤55"))?;
    let sep = separation_growth(&p, &s0, 1e-8, 0.01, 4000).map_err(|e| e.to_string())?;
    let t_one = sep
        .iter()
        .find(|(_, l)| *l >= 0.0)
        .map(|(t, _)| *t)
        .ok_or_else(|| "separation never reached 1 by t=40".to_string())?;
    let low = LorenzParams { r: 0.5, ..p };
    let decay = lorenz_attractor(&low, &s0, 0.01, 0, 5000).map_err(|e| e.to_string())?;
    let (_, last) = decay.last().unwrap();
    let radius = last.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    check(radius < 1e-6, || format!("r=0.5 orbit at |x|={radius:.2e} after t=50"))?;
    Ok(format!(
        "fixed points exact; 5e4 samples in box; separation ≥ 1 at t={t_one:.2}; r=0.5 radius {radius:.1e} at t=50"
    ))
}

fn henon() -> Outcome {
    let p = HenonParams { a: 1.4, b: 0.3 };
    let disc = ((1.0 - p.b) * (1.0 - p.b) + 4.0 * p.a).sqrt();
    let oracle = [(-(1.0 - p.b) - disc) / (2.0 * p.a), (-(1.0 - p.b) + disc) / (2.0 * p.a)];
    let fixed = henon_fixed_points(&p).map_err(|e| e.to_string())?;
    check(fixed.len() == 2, || format!("{} fixed points", fixed.len()))?;
    for (f, x) in fixed.iter().zip(oracle) {
        check((f.0 - x).abs() < 1e-10 && (f.1 - p.b * x).abs() < 1e-10, || {
            format!("fixed point {f:?} vs oracle ({x}, {})", p.b * x)
        })?;
    }
    let orbit = henon_orbit(&p, 0.0, 0.0, 100, 10_000).map_err(|e| e.to_string())?;
    let outside = orbit
        .iter()
        .filter(|&&(x, y)| !(x.abs() <= 1.5 && y.abs() <= 0.45))
        .count();
    check(outside == 0, || format!("{outside} iterates outside |x|≤1.5, |y|≤0.45"))?;
    let worst = orbit
        .iter()
        .map(|&q| {
            let back = p.invert(p.apply(q));
            (back.0 - q.0).abs().max((back.1 - q.1).abs())
        })
        .fold(0.0, f64::max);
    check(worst < 1e-10, || format!("forward-backward error {worst:.2e}"))?;
    Ok(format!("fixed points match oracle; 1e4 iterates in box; round-trip error {worst:.1e}"))
}

fn kdv() -> Outcome {
    let p = KdvParams::new(0.022, 2.0, 256, 1e-4).map_err(|e| e.to_string())?;
    let init: Vec<f64> = p.grid().iter().map(|x| (std::f64::consts::PI * x).cos()).collect();
    let hist = kdv_simulate(&p, &init, 3.6, 0.1).map_err(|e| e.to_string())?;
    let scale: f64 = init.iter().map(|v| v.abs()).sum::<f64>() * p.dx;
    let m0 = mass(&init);
    let drift = hist.fields.iter().map(|f| (mass(f) - m0).abs()).fold(0.0, f64::max) / scale;
    check(drift < 1e-10, || format!("mass drift {drift:.2e} relative"))?;
    let first_two = hist
        .times
        .iter()
        .zip(&hist.fields)
        .find(|(_, f)| detect_pulses(f, p.dx, 1.0).len() >= 2)
        .map(|(t, _)| *t)
        .ok_or_else(|| "fewer than 2 pulses above height 1 by t=3.6".to_string())?;
    let final_pulses = detect_pulses(hist.fields.last().unwrap(), p.dx, 1.0).len();

    let q = KdvParams::new(0.022, 2.0, 256, 5e-5).map_err(|e| e.to_string())?;
    let two: Vec<f64> = kdv_soliton(&q, 1.0, 0.4)
        .iter()
        .zip(kdv_soliton(&q, 0.4, 1.1))
        .map(|(a, b)| a + b)
        .collect();
    let after = kdv_simulate(&q, &two, 2.5, 2.5).map_err(|e| e.to_string())?;
    let before = detect_pulses(&two, q.dx, 0.5);
    let mut end = detect_pulses(after.fields.last().unwrap(), q.dx, 0.5);
    check(end.len() == 2, || format!("{} pulses after the collision", end.len()))?;
    end.sort_by(|a, b| b.height.total_cmp(&a.height));
    let mut start = before.clone();
    start.sort_by(|a, b| b.height.total_cmp(&a.height));
    let errs: Vec<f64> = start
        .iter()
        .zip(&end)
        .map(|(a, b)| ((b.height - a.height) / a.height).abs())
        .collect();
    check(errs.iter().all(|&e| e < 0.05), || {
        format!("peak heights {:.3}/{:.3} became {:.3}/{:.3}", start[0].height, start[1].height, end[0].height, end[1].height)
    })?;
    Ok(format!(
        "mass drift {drift:.1e}; 2 pulses by t={first_two:.1}, {final_pulses} at t=3.6; collision height errors {:.2}%, {:.2}%",
        100.0 * errs[0],
        100.0 * errs[1]
    ))
}

fn turing() -> Outcome {
    let base = TuringParams {
        activator_diffusion: 0.25,
        inhibitor_diffusion: 4.0,
        dt: 0.01,
        dx: 1.0,
        nx: 32,
        ny: 32,
        coupling: Coupling::Inhibitor,
    };
    let (u0, v0) = STEADY_STATE;
    let u = Field2D::filled(base.nx, base.ny, base.dx, u0);
    let v = Field2D::filled(base.nx, base.ny, base.dx, v0);
    let (u1, v1) = turing_step(&u, &v, &base).map_err(|e| e.to_string())?;
    check(u1 == u && v1 == v, || "homogeneous (16, 1) moved after one step".into())?;

    let zero = TuringParams {
        activator_diffusion: 0.0,
        inhibitor_diffusion: 0.0,
        ..base
    };
    let mut bumped = u.clone();
    bumped.set(5, 7, u0 + 0.5);
    let (mut a, mut b) = (bumped, v.clone());
    let (mut c, mut d) = (u.clone(), v.clone());
    for _ in 0..50 {
        (a, b) = turing_step(&a, &b, &zero).map_err(|e| e.to_string())?;
        (c, d) = turing_step(&c, &d, &zero).map_err(|e| e.to_string())?;
    }
    let leaked = (0..base.nx * base.ny)
        .filter(|&i| i != 7 * base.nx + 5 && (a.values[i] != c.values[i] || b.values[i] != d.values[i]))
        .count();
    check(leaked == 0, || format!("zero-diffusion bump reached {leaked} other cells"))?;

    let grid: Vec<f64> = (0..=24).map(|i| 10f64.powf(-4.0 + i as f64 / 4.0)).collect();
    let cal = calibrate(&grid, &grid, Coupling::Inhibitor, base.nx, base.dx).expect("non-empty scan");
    let params = TuringParams {
        activator_diffusion: cal.activator_diffusion,
        inhibitor_diffusion: cal.inhibitor_diffusion,
        dt: 0.01,
        ..base
    };
    let params = TuringParams {
        dt: params.dt.min(0.9 * params.max_stable_dt()),
        ..params
    };
    let snaps = turing_simulate(&params, 1, 0.01, 20_000, 500, Execution::Parallel).map_err(|e| e.to_string())?;
    let stds: Vec<f64> = snaps.iter().map(|(u, _)| pattern_stats(u).std).collect();
    let peak = stds.iter().copied().fold(0.0, f64::max);
    let growth = peak / stds[0];
    let tail = &stds[stds.len() - 5..];
    let saturated = tail.iter().all(|s| (s / tail[0] - 1.0).abs() < 0.05);
    let detail = format!(
        "fixed point exact, locality bit-exact; calibrated A={:.3e} B={:.3e} fastest rate {:.3e}; std growth {growth:.3e}×",
        cal.activator_diffusion, cal.inhibitor_diffusion, cal.growth_rate
    );
    check(growth >= 10.0 && saturated, || format!("no pattern growth: {detail}"))?;
    Ok(detail)
}

fn complex_dynamics() -> Outcome {
    let zero = Complex::new(0.0, 0.0);
    let cases = [(0.0, 50), (1.0, 4), (-2.0, 50)];
    for (c, want) in cases {
        let got = escape_time(Complex::new(c, 0.0), zero, 50, 2.0).count;
        check(got == want, || format!("escape_time(c={c}) = {got}, expected {want}"))?;
    }
    let mvp = Viewport::new(Complex::new(-0.5, 0.0), 3.0, 512, 384).map_err(|e| e.to_string())?;
    let jvp = Viewport::new(zero, 3.2, 512, 384).map_err(|e| e.to_string())?;
    let opts = EscapeOptions::new(500);
    let start = Instant::now();
    let m1 = complex::mandelbrot_grid_with(&mvp, &opts, 64, 1).map_err(|e| e.to_string())?;
    let m8 = complex::mandelbrot_grid_with(&mvp, &opts, 64, 8).map_err(|e| e.to_string())?;
    let jc = Complex::new(-0.8, 0.156);
    let j1 = complex::julia_grid_with(jc, &jvp, &opts, 64, 1).map_err(|e| e.to_string())?;
    let j8 = complex::julia_grid_with(jc, &jvp, &opts, 64, 8).map_err(|e| e.to_string())?;
    let render = start.elapsed();
    check(m1.counts == m8.counts && j1.counts == j8.counts, || "1 vs 8 workers differ".into())?;
    let (w, h) = (mvp.cols, mvp.rows);
    for row in 0..h {
        for col in 0..w {
            check(m1.count(col, row) == m1.count(col, h - 1 - row), || {
                format!("Mandelbrot conjugation broken at ({col}, {row})")
            })?;
            check(j1.count(col, row) == j1.count(w - 1 - col, h - 1 - row), || {
                format!("Julia half-turn symmetry broken at ({col}, {row})")
            })?;
        }
    }
    let tol = 1e-9;
    let w3 = Complex::from_polar(1.5, 2.0 * std::f64::consts::PI / 3.0);
    let roots = cube_roots();
    for (z0, label) in [(Complex::new(1.0, 0.0), 0i8), (Complex::new(2.0, 0.0), 0), (w3, 1)] {
        let s = newton_point(z0, 100, tol);
        check(s.label == label, || format!("Newton from {z0} labelled {}", s.label))?;
        let residual = (s.z * s.z * s.z - 1.0).norm();
        check((s.z - roots[label as usize]).norm() <= tol && residual <= 3.0 * tol * (1.0 + tol), || {
            format!("Newton from {z0}: residual {residual:.2e}")
        })?;
    }
    Ok(format!(
        "hand cases exact; symmetries hold; Newton starts classified; 2×2 frames 512×384@500 bit-identical in {:.2} s",
        render.as_secs_f64()
    ))
}

fn henon_heiles() -> Outcome {
    let mut notes = Vec::new();
    for energy in [1.0 / 24.0, 1.0 / 12.0, 1.0 / 8.0] {
        let y = 0.1;
        let v = 0.5 * y * y - y * y * y / 3.0;
        let start = HHState {
            x: 0.0,
            y,
            px: (2.0 * (energy - v)).sqrt(),
            py: 0.0,
        };
        let traj = hh_trajectory(&start, 0.01, 100_000, 100).map_err(|e| e.to_string())?;
        let h0 = hh_energy(&start);
        let worst = traj
            .states()
            .iter()
            .map(|s| ((hh_energy(&HHState::from_slice(s.as_slice())) - h0) / h0).abs())
            .fold(0.0, f64::max);
        check(worst < 1e-6, || format!("E={energy:.4}: |ΔH|/H = {worst:.2e}"))?;

        let section = hh_section(energy, 8, 100, 0.01, &SeedRule::Line, Execution::Parallel).map_err(|e| e.to_string())?;
        let radicand_min = section
            .points
            .iter()
            .map(|q| 2.0 * energy - q.py * q.py - q.y * q.y + 2.0 * q.y.powi(3) / 3.0)
            .fold(f64::INFINITY, f64::min);
        check(radicand_min > -1e-6, || format!("E={energy:.4}: section point off the energy surface ({radicand_min:.2e})"))?;
        notes.push(format!("E={energy:.4} drift {worst:.1e}, {} section points", section.points.len()));
    }
    Ok(notes.join("; "))
}

fn manifests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests")
}

fn cli_determinism() -> Outcome {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(manifests_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    check(!paths.is_empty(), || "no example manifests".into())?;
    let mut files = 0;
    for path in &paths {
        let manifest = ExperimentManifest::load(path).map_err(|e| e.to_string())?;
        let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
        for threads in [Some(1), Some(1), Some(4), None] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let report = run_manifest(&manifest, dir.path(), threads).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut bytes: Vec<(String, Vec<u8>)> = report
                .outputs
                .iter()
                .map(|o| (o.path.clone(), std::fs::read(dir.path().join(&o.path)).unwrap()))
                .collect();
            bytes.push(("report.json".into(), std::fs::read(dir.path().join("report.json")).unwrap()));
            match &reference {
                None => reference = Some(bytes),
                Some(r) => check(*r == bytes, || format!("{} differs with threads {threads:?}", path.display()))?,
            }
        }
        files += reference.map_or(0, |r| r.len());
    }
    Ok(format!("{} manifests, {files} files identical over 2 runs and 1/4/default threads", paths.len()))
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "FPUT recurrence", limit: Duration::from_secs(60), run: fput_recurrence },
    Criterion { id: 2, name: "Feigenbaum cascade", limit: Duration::from_secs(30), run: feigenbaum },
    Criterion { id: 3, name: "BSD slopes", limit: Duration::from_secs(120), run: bsd_slopes },
    Criterion { id: 4, name: "Lorenz", limit: Duration::from_secs(30), run: lorenz },
    Criterion { id: 5, name: "Henon map", limit: Duration::from_secs(5), run: henon },
    Criterion { id: 6, name: "KdV solitons", limit: Duration::from_secs(120), run: kdv },
    Criterion { id: 7, name: "Turing patterns", limit: Duration::from_secs(60), run: turing },
    Criterion { id: 8, name: "Complex dynamics", limit: Duration::from_secs(30), run: complex_dynamics },
    Criterion { id: 9, name: "Henon-Heiles", limit: Duration::from_secs(60), run: henon_heiles },
    Criterion { id: 10, name: "CLI determinism", limit: Duration::from_secs(600), run: cli_determinism },
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    run(&CRITERIA, &selected)
}
