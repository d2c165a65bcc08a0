//! Runs one experiment from validated parameters and encodes the requested
//! outputs.

use std::collections::BTreeMap;

use lab_core::arithmetic::{product_series, rank_slope, CurveD, PointConvention};
use lab_core::complex::{self, EscapeGrid, EscapeOptions, Viewport};
use lab_core::flows::{hh_section, lorenz_attractor, separation_growth, LorenzParams, SeedRule};
use lab_core::lattice::{
    detect_pulses, fput_simulate, kdv_initial, kdv_simulate, l2_energy, mass, recurrence_time, FputParams, KdvParams,
};
use lab_core::maps::{
    bifurcation_diagram, delta_ratios, henon_fixed_points, henon_orbit, logistic_orbit, superstable_params, HenonParams,
    LogisticParams,
};
use lab_core::reaction_diffusion::{pattern_stats, turing_simulate, Coupling, Field2D, TuringParams};
use lab_core::schema::Params;
use lab_core::{Execution, StateVector};
use serde_json::{json, Value};

use crate::encode::{encode_csv, encode_pgm, encode_ppm};
use crate::error::{CliError, Result};
use crate::palette;

/// Output kinds per experiment; the first is written when none is requested.
pub fn output_kinds(experiment: &str) -> &'static [&'static str] {
    match experiment {
        "lorenz" => &["trajectory.csv", "separation.csv"],
        "henon-heiles" => &["section.csv"],
        "fput" => &["modes.csv", "displacements.csv", "summary.json"],
        "kdv" => &["field.csv", "pulses.csv", "summary.json"],
        "turing" => &["u.pgm", "v.pgm", "stats.csv", "summary.json"],
        "logistic" => &["bifurcation.csv", "orbit.csv", "feigenbaum.json"],
        "henon" => &["orbit.csv", "summary.json"],
        "julia" | "mandelbrot" => &["image.ppm", "counts.pgm", "summary.json"],
        "newton" => &["basins.ppm", "labels.pgm", "summary.json"],
        "bsd" => &["series.csv", "fit.json"],
        _ => &[],
    }
}

/// Default file name for an output kind.
pub fn default_path(experiment: &str, kind: &str) -> String {
    format!("{experiment}-{kind}")
}

type Outputs = BTreeMap<String, Vec<u8>>;

fn fail(experiment: &str) -> impl Fn(String) -> CliError + '_ {
    move |m| CliError::experiment(experiment, m)
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("JSON values always serialize");
    bytes.push(b'\n');
    bytes
}

/// Computes the experiment and returns the bytes for each requested kind.
pub fn run(params: &Params, seed: u64, kinds: &[String]) -> Result<Outputs> {
    let available = output_kinds(&params.experiment);
    for k in kinds {
        if !available.contains(&k.as_str()) {
            return Err(CliError::UnsupportedOutput {
                experiment: params.experiment.clone(),
                kind: k.clone(),
                available: available.iter().map(|s| s.to_string()).collect(),
            });
        }
    }
    let wants = |k: &str| kinds.iter().any(|x| x == k);
    let exp = params.experiment.as_str();
    let err = fail(exp);
    let mut out = Outputs::new();
    match exp {
        "lorenz" => lorenz(params, &wants, &mut out),
        "henon-heiles" => henon_heiles(params, &mut out),
        "fput" => fput(params, &wants, &mut out),
        "kdv" => kdv(params, &wants, &mut out),
        "turing" => turing(params, seed, &wants, &mut out),
        "logistic" => logistic(params, &wants, &mut out),
        "henon" => henon(params, &wants, &mut out),
        "julia" | "mandelbrot" => escape(params, &wants, &mut out),
        "newton" => newton(params, &wants, &mut out),
        "bsd" => bsd(params, &wants, &mut out),
        other => Err(err(format!("no runner for `{other}`"))),
    }?;
    out.retain(|k, _| wants(k));
    Ok(out)
}

fn lorenz(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("lorenz");
    let lp = LorenzParams {
        sigma: p.real("sigma")?,
        r: p.real("r")?,
        b: p.real("b")?,
    };
    let s0 = StateVector::new(vec![p.real("x0")?, p.real("y0")?, p.real("z0")?]).map_err(|e| err(e.to_string()))?;
    let dt = p.real("dt")?;
    let samples = p.count("samples")?;
    if wants("trajectory.csv") {
        let traj = lorenz_attractor(&lp, &s0, dt, p.count("transient")?, samples).map_err(|e| err(e.to_string()))?;
        let cols: Vec<Vec<f64>> = (0..3).map(|i| traj.states().iter().map(|s| s[i]).collect()).collect();
        out.insert(
            "trajectory.csv".into(),
            encode_csv(&[("t", traj.times()), ("x", &cols[0]), ("y", &cols[1]), ("z", &cols[2])])?,
        );
    }
    if wants("separation.csv") {
        let sep = separation_growth(&lp, &s0, p.real("delta0")?, dt, samples).map_err(|e| err(e.to_string()))?;
        let (t, l): (Vec<f64>, Vec<f64>) = sep.into_iter().unzip();
        out.insert("separation.csv".into(), encode_csv(&[("t", &t), ("log10_separation", &l)])?);
    }
    Ok(())
}

fn henon_heiles(p: &Params, out: &mut Outputs) -> Result<()> {
    let err = fail("henon-heiles");
    let rule = SeedRule::from_name(p.text("seed_rule")?).ok_or_else(|| err("unknown seed rule".into()))?;
    let sec = hh_section(
        p.real("energy")?,
        p.count("n_seeds")?,
        p.count("n_crossings")?,
        p.real("dt")?,
        &rule,
        Execution::Parallel,
    )
    .map_err(|e| err(e.to_string()))?;
    let seed: Vec<f64> = sec.points.iter().map(|q| q.seed as f64).collect();
    let y: Vec<f64> = sec.points.iter().map(|q| q.y).collect();
    let py: Vec<f64> = sec.points.iter().map(|q| q.py).collect();
    out.insert("section.csv".into(), encode_csv(&[("seed", &seed), ("y", &y), ("py", &py)])?);
    Ok(())
}

fn fput(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("fput");
    let fp = FputParams {
        n_masses: p.count("n_masses")?,
        alpha: p.real("alpha")?,
        dt: p.real("dt")?,
    };
    let run = fput_simulate(
        &fp,
        p.count("init_mode")?,
        p.real("amplitude")?,
        p.real("t_end")?,
        p.real("record_dt")?,
    )
    .map_err(|e| err(e.to_string()))?;
    if wants("modes.csv") {
        let names: Vec<String> = (1..=run.modes.k_max).map(|k| format!("E{k}")).collect();
        let cols: Vec<Vec<f64>> = (0..run.modes.k_max)
            .map(|k| run.modes.energies.iter().map(|e| e[k]).collect())
            .collect();
        let mut table = vec![("t", run.modes.times.as_slice())];
        table.extend(names.iter().map(String::as_str).zip(cols.iter().map(Vec::as_slice)));
        out.insert("modes.csv".into(), encode_csv(&table)?);
    }
    if wants("displacements.csv") {
        let h = &run.displacements;
        let names: Vec<String> = (0..=fp.n_masses).map(|j| format!("u{j}")).collect();
        let cols: Vec<Vec<f64>> = (0..=fp.n_masses).map(|j| h.fields.iter().map(|f| f[j]).collect()).collect();
        let mut table = vec![("t", h.times.as_slice())];
        table.extend(names.iter().map(String::as_str).zip(cols.iter().map(Vec::as_slice)));
        out.insert("displacements.csv".into(), encode_csv(&table)?);
    }
    if wants("summary.json") {
        let recurrence = recurrence_time(&run.modes, p.count("init_mode")?, 0.95).map_err(|e| err(e.to_string()))?;
        let min_share = run
            .modes
            .share(p.count("init_mode")?)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        out.insert(
            "summary.json".into(),
            json_bytes(&json!({
                "initial_energy": run.initial_energy,
                "max_energy_drift": run.max_energy_drift,
                "min_mode_share": min_share,
                "recurrence_time": recurrence,
            })),
        );
    }
    Ok(())
}

fn kdv(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("kdv");
    let kp = KdvParams::new(p.real("delta")?, p.real("length")?, p.count("n_points")?, p.real("dt")?)
        .map_err(|e| err(e.to_string()))?;
    let x = kp.grid();
    let init = kdv_initial(&kp, p.text("init")?).ok_or_else(|| err("unknown initial field".into()))?;
    let hist = kdv_simulate(&kp, &init, p.real("t_end")?, p.real("record_dt")?).map_err(|e| err(e.to_string()))?;
    if wants("field.csv") {
        let (mut t, mut xs, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for (ti, f) in hist.times.iter().zip(&hist.fields) {
            for (xi, vi) in x.iter().zip(f) {
                t.push(*ti);
                xs.push(*xi);
                v.push(*vi);
            }
        }
        out.insert("field.csv".into(), encode_csv(&[("t", &t), ("x", &xs), ("v", &v)])?);
    }
    let min_height = p.real("pulse_min")?;
    if wants("pulses.csv") {
        let (mut t, mut pos, mut h) = (Vec::new(), Vec::new(), Vec::new());
        for (ti, f) in hist.times.iter().zip(&hist.fields) {
            for pulse in detect_pulses(f, kp.dx, min_height) {
                t.push(*ti);
                pos.push(pulse.position);
                h.push(pulse.height);
            }
        }
        out.insert("pulses.csv".into(), encode_csv(&[("t", &t), ("position", &pos), ("height", &h)])?);
    }
    if wants("summary.json") {
        let m0 = mass(&init);
        let mass_drift = hist
            .fields
            .iter()
            .map(|f| (mass(f) - m0).abs())
            .fold(0.0, f64::max);
        let e0 = l2_energy(&init);
        let l2_drift = hist
            .fields
            .iter()
            .map(|f| ((l2_energy(f) - e0) / e0).abs())
            .fold(0.0, f64::max);
        let last = hist.fields.last().expect("history holds the initial field");
        out.insert(
            "summary.json".into(),
            json_bytes(&json!({
                "dx": kp.dx,
                "max_mass_drift": mass_drift,
                "max_relative_l2_drift": l2_drift,
                "final_pulses": detect_pulses(last, kp.dx, min_height),
                "final_time": hist.times.last(),
            })),
        );
    }
    Ok(())
}

/// Scales a field linearly onto 0..=65535.
fn field_to_pgm(f: &Field2D) -> Result<Vec<u8>> {
    let s = pattern_stats(f);
    let span = s.max - s.min;
    let values: Vec<u32> = f
        .values
        .iter()
        .map(|&x| if span > 0.0 { ((x - s.min) / span * 65535.0).round() as u32 } else { 0 })
        .collect();
    encode_pgm(&values, f.nx, f.ny, 65535)
}

fn turing(p: &Params, seed: u64, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("turing");
    let coupling = match p.text("coupling")? {
        "verbatim" => Coupling::Verbatim,
        _ => Coupling::Inhibitor,
    };
    let tp = TuringParams {
        activator_diffusion: p.real("a")?,
        inhibitor_diffusion: p.real("b")?,
        dt: p.real("dt")?,
        dx: p.real("dx")?,
        nx: p.count("nx")?,
        ny: p.count("ny")?,
        coupling,
    };
    let record_every = p.count("record_every")?;
    let snaps = turing_simulate(
        &tp,
        seed,
        p.real("noise")?,
        p.count("n_steps")?,
        record_every,
        Execution::Parallel,
    )
    .map_err(|e| err(e.to_string()))?;
    let (u, v) = snaps.last().expect("initial snapshot is always recorded");
    if wants("u.pgm") {
        out.insert("u.pgm".into(), field_to_pgm(u)?);
    }
    if wants("v.pgm") {
        out.insert("v.pgm".into(), field_to_pgm(v)?);
    }
    let stats: Vec<_> = snaps.iter().map(|(u, _)| pattern_stats(u)).collect();
    if wants("stats.csv") {
        let step: Vec<f64> = (0..stats.len()).map(|i| (i * record_every) as f64).collect();
        let col = |f: fn(&lab_core::reaction_diffusion::PatternStats) -> f64| stats.iter().map(f).collect::<Vec<f64>>();
        let (mean, std, min, max) = (col(|s| s.mean), col(|s| s.std), col(|s| s.min), col(|s| s.max));
        out.insert(
            "stats.csv".into(),
            encode_csv(&[("step", &step), ("mean", &mean), ("std", &std), ("min", &min), ("max", &max)])?,
        );
    }
    if wants("summary.json") {
        let first = stats.first().expect("non-empty").std;
        let last = stats.last().expect("non-empty").std;
        out.insert(
            "summary.json".into(),
            json_bytes(&json!({
                "initial_std_u": first,
                "final_std_u": last,
                "std_growth": if first > 0.0 { Some(last / first) } else { None },
                "max_stable_dt": tp.max_stable_dt(),
            })),
        );
    }
    Ok(())
}

fn logistic(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("logistic");
    let x0 = p.real("x0")?;
    let transient = p.count("transient")?;
    if wants("orbit.csv") {
        let lp = LogisticParams::new(p.real("r")?).map_err(|e| err(e.to_string()))?;
        let xs = logistic_orbit(&lp, x0, transient, p.count("n")?).map_err(|e| err(e.to_string()))?;
        let n: Vec<f64> = (1..=xs.len()).map(|i| (transient + i) as f64).collect();
        out.insert("orbit.csv".into(), encode_csv(&[("n", &n), ("x", &xs)])?);
    }
    if wants("bifurcation.csv") {
        let cloud = bifurcation_diagram(
            p.real("r_min")?,
            p.real("r_max")?,
            p.count("n_r")?,
            transient,
            p.count("samples")?,
            x0,
            Execution::Parallel,
        )
        .map_err(|e| err(e.to_string()))?;
        let (r, x): (Vec<f64>, Vec<f64>) = cloud.points.into_iter().unzip();
        out.insert("bifurcation.csv".into(), encode_csv(&[("r", &r), ("x", &x)])?);
    }
    if wants("feigenbaum.json") {
        let roots = superstable_params(p.count("feigenbaum_count")?).map_err(|e| err(e.to_string()))?;
        out.insert(
            "feigenbaum.json".into(),
            json_bytes(&json!({ "superstable": roots, "delta": delta_ratios(&roots) })),
        );
    }
    Ok(())
}

fn henon(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("henon");
    let hp = HenonParams {
        a: p.real("a")?,
        b: p.real("b")?,
    };
    let orbit = henon_orbit(&hp, p.real("x0")?, p.real("y0")?, p.count("transient")?, p.count("n")?)
        .map_err(|e| err(e.to_string()))?;
    let (x, y): (Vec<f64>, Vec<f64>) = orbit.iter().copied().unzip();
    if wants("orbit.csv") {
        out.insert("orbit.csv".into(), encode_csv(&[("x", &x), ("y", &y)])?);
    }
    if wants("summary.json") {
        let fixed = henon_fixed_points(&hp).map_err(|e| err(e.to_string()))?;
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.insert(
            "summary.json".into(),
            json_bytes(&json!({
                "fixed_points": fixed,
                "bounding_box": { "x": [lo(&x), hi(&x)], "y": [lo(&y), hi(&y)] },
            })),
        );
    }
    Ok(())
}

fn viewport(p: &Params) -> Result<Viewport> {
    Viewport::new(p.complex("center")?, p.real("width")?, p.count("cols")?, p.count("rows")?)
        .map_err(|e| CliError::experiment(&p.experiment, e))
}

fn escape(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let exp = p.experiment.as_str();
    let err = fail(exp);
    let vp = viewport(p)?;
    let max_iter = p.count("max_iter")? as u32;
    let mut opts = if p.flag("smooth")? {
        EscapeOptions::smooth(max_iter)
    } else {
        EscapeOptions::new(max_iter)
    };
    let tile = p.count("tile_size")?;
    let grid: EscapeGrid = if exp == "julia" {
        complex::julia_grid_with(p.complex("c")?, &vp, &opts, tile, 0)
    } else {
        opts.interior_check = p.flag("interior_check")?;
        complex::mandelbrot_grid_with(&vp, &opts, tile, 0)
    }
    .map_err(|e| err(e.to_string()))?;
    if wants("image.ppm") {
        let pal = palette::lookup(p.text("palette")?).ok_or_else(|| err("unknown palette".into()))?;
        out.insert("image.ppm".into(), encode_ppm(&pal.apply(&grid), vp.cols, vp.rows)?);
    }
    if wants("counts.pgm") {
        out.insert("counts.pgm".into(), encode_pgm(&grid.counts, vp.cols, vp.rows, max_iter)?);
    }
    if wants("summary.json") {
        let interior = grid.counts.iter().filter(|&&n| n == max_iter).count();
        out.insert(
            "summary.json".into(),
            json_bytes(&json!({
                "pixels": vp.len(),
                "interior_pixels": interior,
                "max_escape_count": grid.counts.iter().filter(|&&n| n < max_iter).max(),
            })),
        );
    }
    Ok(())
}

fn newton(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("newton");
    let vp = viewport(p)?;
    let max_iter = p.count("max_iter")? as u32;
    let grid = complex::newton_basins_with(&vp, max_iter, p.real("tol")?, p.count("tile_size")?, 0)
        .map_err(|e| err(e.to_string()))?;
    if wants("basins.ppm") {
        let px: Vec<[u8; 3]> = grid
            .labels
            .iter()
            .zip(&grid.iterations)
            .map(|(&l, &n)| palette::basin_color(l, n, max_iter))
            .collect();
        out.insert("basins.ppm".into(), encode_ppm(&px, vp.cols, vp.rows)?);
    }
    if wants("labels.pgm") {
        let v: Vec<u32> = grid.labels.iter().map(|&l| (l + 1) as u32).collect();
        out.insert("labels.pgm".into(), encode_pgm(&v, vp.cols, vp.rows, 3)?);
    }
    if wants("summary.json") {
        let count = |k: i8| grid.labels.iter().filter(|&&l| l == k).count();
        out.insert(
            "summary.json".into(),
            json_bytes(&json!({
                "basin_sizes": [count(0), count(1), count(2)],
                "unconverged": count(-1),
                "perturbed_zero_starts": grid.perturbed_zero_starts,
            })),
        );
    }
    Ok(())
}

fn bsd(p: &Params, wants: &dyn Fn(&str) -> bool, out: &mut Outputs) -> Result<()> {
    let err = fail("bsd");
    let curve = CurveD::new(p.integer("d")? as u64).map_err(|e| err(e.to_string()))?;
    let convention =
        PointConvention::from_name(p.text("convention")?).ok_or_else(|| err("unknown convention".into()))?;
    let series = product_series(&curve, p.integer("x_max")? as u64, convention, Execution::Parallel)
        .map_err(|e| err(e.to_string()))?;
    if wants("series.csv") {
        let primes: Vec<f64> = series.primes.iter().map(|&q| q as f64).collect();
        let counts: Vec<f64> = series.counts.iter().map(|&n| n as f64).collect();
        out.insert(
            "series.csv".into(),
            encode_csv(&[("p", &primes), ("n_p", &counts), ("log_product", &series.log_products)])?,
        );
    }
    if wants("fit.json") {
        let fit = rank_slope(&series, p.integer("p_min")? as u64).map_err(|e| err(e.to_string()))?;
        out.insert(
            "fit.json".into(),
            json_bytes(&json!({
                "d": series.d,
                "x_max": series.x_max,
                "convention": convention.name(),
                "skipped_bad_primes": series.skipped_bad_primes,
                "fit": fit,
            })),
        );
    }
    Ok(())
}
