//! Steppable forms of the experiments for live sessions.
//!
//! A session calls [`Simulation::step`] repeatedly and, at cadence
//! boundaries, [`Simulation::drain`] to package what happened since the
//! previous drain. Hot parameter changes arrive through
//! [`Simulation::apply`], which must leave the state untouched on error.

use std::collections::VecDeque;

use lab_core::arithmetic::{count_points_mod_p, primes_upto, rank_slope, CurveD, PointConvention, ProductSeries};
use lab_core::complex::{
    render_tile, render_tiles, tiles, Complex, EscapeOptions, EscapeSample, JuliaKernel, MandelbrotKernel,
    NewtonKernel, NewtonSample, PixelKernel, Tile, Viewport,
};
use lab_core::flows::{section_seeds, HenonHeiles, LorenzParams, SeedRule, HH_ESCAPE_ENERGY};
use lab_core::lattice::{
    detect_pulses, fput_accel_into, fput_energy, kdv_euler_start, kdv_initial, kdv_step, mode_energies, mode_shape,
    KdvParams,
};
use lab_core::maps::{HenonParams, LogisticParams, HENON_ESCAPE};
use lab_core::numerics::{verlet_in_place, Direction, Rk4, SectionSpec};
use lab_core::par;
use lab_core::reaction_diffusion::{initial_state, pattern_stats, Coupling, TuringParams, TuringSim};
use lab_core::schema::Params;
use lab_core::Execution;
use serde_json::{json, Value};

use crate::protocol::{FrameKind, Payload};

pub type SimResult<T> = Result<T, String>;

pub trait Simulation: Send {
    /// Kind of the frames produced by [`Simulation::drain`].
    fn kind(&self) -> FrameKind;

    fn step(&mut self) -> SimResult<()>;

    /// Data produced since the previous drain. Called only after at least
    /// one step.
    fn drain(&mut self) -> Payload;

    /// Full current state, used as a keyframe.
    fn snapshot(&self) -> (FrameKind, Payload);

    /// Switches to new hot parameter values.
    fn apply(&mut self, params: &Params) -> SimResult<()>;

    /// Nothing left to compute until parameters change.
    fn idle(&self) -> bool {
        false
    }

    /// Each step is a self-contained frame (escape tiles).
    fn frame_per_step(&self) -> bool {
        false
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Builds the session engine for validated parameters.
pub fn build(params: &Params, seed: u64, tile_batch: usize) -> SimResult<Box<dyn Simulation>> {
    Ok(match params.experiment.as_str() {
        "lorenz" => Box::new(Lorenz::new(params)?),
        "henon-heiles" => Box::new(HenonHeilesSim::new(params)?),
        "fput" => Box::new(Fput::new(params)?),
        "kdv" => Box::new(Kdv::new(params)?),
        "turing" => Box::new(Turing::new(params, seed)?),
        "logistic" => Box::new(Logistic::new(params)?),
        "henon" => Box::new(Henon::new(params)?),
        "bsd" => Box::new(Bsd::new(params)?),
        "julia" | "mandelbrot" | "newton" => Box::new(EscapeSim::new(params, tile_batch)?),
        other => return Err(format!("no session engine for `{other}`")),
    })
}

struct Lorenz {
    p: LorenzParams,
    dt: f64,
    state: [f64; 3],
    rk: Rk4,
    t: f64,
    buf: Vec<f64>,
}

impl Lorenz {
    fn read(params: &Params) -> SimResult<(LorenzParams, f64)> {
        let p = LorenzParams {
            sigma: params.real("sigma").map_err(s)?,
            r: params.real("r").map_err(s)?,
            b: params.real("b").map_err(s)?,
        };
        p.validate().map_err(s)?;
        Ok((p, params.real("dt").map_err(s)?))
    }

    fn new(params: &Params) -> SimResult<Self> {
        let (p, dt) = Self::read(params)?;
        Ok(Lorenz {
            p,
            dt,
            state: [
                params.real("x0").map_err(s)?,
                params.real("y0").map_err(s)?,
                params.real("z0").map_err(s)?,
            ],
            rk: Rk4::new(3),
            t: 0.0,
            buf: Vec::new(),
        })
    }
}

impl Simulation for Lorenz {
    fn kind(&self) -> FrameKind {
        FrameKind::TrajectoryBatch
    }

    fn step(&mut self) -> SimResult<()> {
        self.rk.step(&self.p, &mut self.state, self.dt).map_err(s)?;
        self.t += self.dt;
        self.buf.extend_from_slice(&self.state);
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        let n = self.buf.len() / 3;
        Payload::pack(
            vec![n, 3],
            self.buf.drain(..),
            json!({"t": self.t, "columns": ["x", "y", "z"]}),
        )
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (
            FrameKind::TrajectoryBatch,
            Payload::pack(vec![1, 3], self.state, json!({"t": self.t, "columns": ["x", "y", "z"]})),
        )
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        (self.p, self.dt) = Self::read(params)?;
        Ok(())
    }
}

struct HenonHeilesSim {
    energy: f64,
    dt: f64,
    n_seeds: usize,
    rule: SeedRule,
    orbits: Vec<[f64; 4]>,
    alive: Vec<bool>,
    rk: Rk4,
    t: f64,
    buf: Vec<f64>,
}

impl HenonHeilesSim {
    fn seeds(energy: f64, n_seeds: usize, rule: &SeedRule) -> SimResult<Vec<[f64; 4]>> {
        if !(energy > 0.0 && energy <= HH_ESCAPE_ENERGY) {
            return Err(format!("energy must lie in (0, 1/6], got {energy}"));
        }
        let seeds: Vec<[f64; 4]> = section_seeds(energy, n_seeds, rule)
            .into_iter()
            .map(|h| h.to_array())
            .collect();
        if seeds.is_empty() {
            return Err("no seed lies on the energy surface".into());
        }
        Ok(seeds)
    }

    fn new(params: &Params) -> SimResult<Self> {
        let energy = params.real("energy").map_err(s)?;
        let n_seeds = params.count("n_seeds").map_err(s)?;
        let rule = SeedRule::from_name(params.text("seed_rule").map_err(s)?).ok_or("unknown seed rule")?;
        let orbits = Self::seeds(energy, n_seeds, &rule)?;
        Ok(HenonHeilesSim {
            energy,
            dt: params.real("dt").map_err(s)?,
            n_seeds,
            rule,
            alive: vec![true; orbits.len()],
            orbits,
            rk: Rk4::new(4),
            t: 0.0,
            buf: Vec::new(),
        })
    }
}

impl Simulation for HenonHeilesSim {
    fn kind(&self) -> FrameKind {
        FrameKind::SeriesAppend
    }

    fn step(&mut self) -> SimResult<()> {
        let section = SectionSpec::new(0, 0.0, Direction::Rising);
        for (i, orbit) in self.orbits.iter_mut().enumerate() {
            if !self.alive[i] {
                continue;
            }
            let prev = *orbit;
            if self.rk.step(&HenonHeiles, orbit, self.dt).is_err() || orbit[0].abs() > 10.0 || orbit[1].abs() > 10.0 {
                self.alive[i] = false;
                continue;
            }
            if let Some((_, p)) = section.segment_crossing((self.t, &prev), (self.t + self.dt, &orbit[..])) {
                if p[2] > 0.0 {
                    self.buf.extend([i as f64, p[1], p[3]]);
                }
            }
        }
        self.t += self.dt;
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        let n = self.buf.len() / 3;
        Payload::pack(
            vec![n, 3],
            self.buf.drain(..),
            json!({"t": self.t, "energy": self.energy, "columns": ["seed", "y", "py"]}),
        )
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (
            FrameKind::TrajectoryBatch,
            Payload::pack(
                vec![self.orbits.len(), 4],
                self.orbits.iter().flatten().copied(),
                json!({"t": self.t, "energy": self.energy, "columns": ["x", "y", "px", "py"]}),
            ),
        )
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        let energy = params.real("energy").map_err(s)?;
        if energy != self.energy {
            let orbits = Self::seeds(energy, self.n_seeds, &self.rule)?;
            self.alive = vec![true; orbits.len()];
            self.orbits = orbits;
            self.energy = energy;
            self.t = 0.0;
        }
        Ok(())
    }
}

struct Fput {
    n: usize,
    alpha: f64,
    dt: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
    t: f64,
}

impl Fput {
    fn new(params: &Params) -> SimResult<Self> {
        let n = params.count("n_masses").map_err(s)?;
        let alpha = params.real("alpha").map_err(s)?;
        let u = mode_shape(n, params.count("init_mode").map_err(s)?, params.real("amplitude").map_err(s)?);
        let mut a = vec![0.0; n + 1];
        fput_accel_into(&u, alpha, &mut a);
        Ok(Fput {
            n,
            alpha,
            dt: params.real("dt").map_err(s)?,
            v: vec![0.0; n + 1],
            u,
            a,
            t: 0.0,
        })
    }

    fn columns(&self) -> Vec<String> {
        std::iter::once("t".to_string())
            .chain((1..self.n).map(|k| format!("E{k}")))
            .collect()
    }
}

impl Simulation for Fput {
    fn kind(&self) -> FrameKind {
        FrameKind::SeriesAppend
    }

    fn step(&mut self) -> SimResult<()> {
        let alpha = self.alpha;
        let accel = |x: &[f64], out: &mut [f64]| fput_accel_into(x, alpha, out);
        verlet_in_place(&accel, &mut self.u, &mut self.v, &mut self.a, self.dt);
        self.t += self.dt;
        if self.u.iter().any(|x| !x.is_finite()) {
            return Err(format!("chain blew up at t = {}", self.t));
        }
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        let modes = mode_energies(&self.u, &self.v, self.n).unwrap_or_default();
        Payload::pack(
            vec![1, self.n],
            std::iter::once(self.t).chain(modes),
            json!({
                "columns": self.columns(),
                "energy": fput_energy(&self.u, &self.v, self.alpha),
            }),
        )
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (
            FrameKind::FieldSnapshot,
            Payload::pack(
                vec![2, self.n + 1],
                self.u.iter().chain(&self.v).copied(),
                json!({"t": self.t, "rows": ["u", "v"]}),
            ),
        )
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        let alpha = params.real("alpha").map_err(s)?;
        if alpha != self.alpha {
            self.alpha = alpha;
            fput_accel_into(&self.u, alpha, &mut self.a);
        }
        Ok(())
    }
}

struct Kdv {
    p: KdvParams,
    prev: Vec<f64>,
    cur: Vec<f64>,
    started: bool,
    t: f64,
    pulse_min: f64,
}

impl Kdv {
    fn new(params: &Params) -> SimResult<Self> {
        let p = KdvParams::new(
            params.real("delta").map_err(s)?,
            params.real("length").map_err(s)?,
            params.count("n_points").map_err(s)?,
            params.real("dt").map_err(s)?,
        )
        .map_err(s)?;
        let init = kdv_initial(&p, params.text("init").map_err(s)?).ok_or("unknown initial field")?;
        p.check_stability(init.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .map_err(s)?;
        Ok(Kdv {
            p,
            prev: init.clone(),
            cur: init,
            started: false,
            t: 0.0,
            pulse_min: params.real("pulse_min").map_err(s)?,
        })
    }

    fn field(&self) -> Payload {
        let pulses = detect_pulses(&self.cur, self.p.dx, self.pulse_min);
        Payload::pack(
            vec![self.cur.len()],
            self.cur.iter().copied(),
            json!({"t": self.t, "dx": self.p.dx, "pulses": pulses}),
        )
    }
}

impl Simulation for Kdv {
    fn kind(&self) -> FrameKind {
        FrameKind::FieldSnapshot
    }

    fn step(&mut self) -> SimResult<()> {
        let next = if self.started {
            kdv_step(&self.cur, &self.prev, &self.p).map_err(s)?
        } else {
            kdv_euler_start(&self.cur, &self.p).map_err(s)?
        };
        self.started = true;
        self.prev = std::mem::replace(&mut self.cur, next);
        self.t += self.p.dt;
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        self.field()
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (FrameKind::FieldSnapshot, self.field())
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        let delta = params.real("delta").map_err(s)?;
        let p = KdvParams::new(delta, self.p.length, self.p.n_points(), self.p.dt).map_err(s)?;
        p.check_stability(self.cur.iter().fold(0.0f64, |m, x| m.max(x.abs())))
            .map_err(s)?;
        self.p = p;
        self.pulse_min = params.real("pulse_min").map_err(s)?;
        Ok(())
    }
}

struct Turing {
    sim: TuringSim,
}

impl Turing {
    fn new(params: &Params, seed: u64) -> SimResult<Self> {
        let coupling = match params.text("coupling").map_err(s)? {
            "verbatim" => Coupling::Verbatim,
            _ => Coupling::Inhibitor,
        };
        let tp = TuringParams {
            activator_diffusion: params.real("a").map_err(s)?,
            inhibitor_diffusion: params.real("b").map_err(s)?,
            dt: params.real("dt").map_err(s)?,
            dx: params.real("dx").map_err(s)?,
            nx: params.count("nx").map_err(s)?,
            ny: params.count("ny").map_err(s)?,
            coupling,
        };
        let (u, v) = initial_state(&tp, seed, params.real("noise").map_err(s)?);
        Ok(Turing {
            sim: TuringSim::new(tp, u, v).map_err(s)?,
        })
    }

    fn fields(&self) -> Payload {
        let p = &self.sim.params;
        Payload::pack(
            vec![2, p.ny, p.nx],
            self.sim.u.values.iter().chain(&self.sim.v.values).copied(),
            json!({"steps": self.sim.steps, "rows": ["u", "v"], "u_stats": pattern_stats(&self.sim.u)}),
        )
    }
}

impl Simulation for Turing {
    fn kind(&self) -> FrameKind {
        FrameKind::FieldSnapshot
    }

    fn step(&mut self) -> SimResult<()> {
        self.sim.step(Execution::Parallel).map_err(s)
    }

    fn drain(&mut self) -> Payload {
        self.fields()
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (FrameKind::FieldSnapshot, self.fields())
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        let next = TuringParams {
            activator_diffusion: params.real("a").map_err(s)?,
            inhibitor_diffusion: params.real("b").map_err(s)?,
            ..self.sim.params
        };
        next.validate().map_err(s)?;
        self.sim.params = next;
        Ok(())
    }
}

struct Logistic {
    lp: LogisticParams,
    x0: f64,
    x: f64,
    buf: Vec<f64>,
}

impl Logistic {
    fn new(params: &Params) -> SimResult<Self> {
        let x0 = params.real("x0").map_err(s)?;
        Ok(Logistic {
            lp: LogisticParams::new(params.real("r").map_err(s)?).map_err(s)?,
            x0,
            x: x0,
            buf: Vec::new(),
        })
    }
}

impl Simulation for Logistic {
    fn kind(&self) -> FrameKind {
        FrameKind::SeriesAppend
    }

    fn step(&mut self) -> SimResult<()> {
        self.x = self.lp.apply(self.x);
        self.buf.push(self.x);
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        let n = self.buf.len();
        Payload::pack(vec![n, 1], self.buf.drain(..), json!({"r": self.lp.r(), "columns": ["x"]}))
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (
            FrameKind::SeriesAppend,
            Payload::pack(vec![1, 1], [self.x], json!({"r": self.lp.r(), "columns": ["x"]})),
        )
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        let lp = LogisticParams::new(params.real("r").map_err(s)?).map_err(s)?;
        let x0 = params.real("x0").map_err(s)?;
        self.lp = lp;
        if x0 != self.x0 {
            self.x0 = x0;
            self.x = x0;
        }
        Ok(())
    }
}

struct Henon {
    hp: HenonParams,
    point: (f64, f64),
    buf: Vec<f64>,
}

impl Henon {
    fn read(params: &Params) -> SimResult<HenonParams> {
        Ok(HenonParams {
            a: params.real("a").map_err(s)?,
            b: params.real("b").map_err(s)?,
        })
    }

    fn new(params: &Params) -> SimResult<Self> {
        Ok(Henon {
            hp: Self::read(params)?,
            point: (params.real("x0").map_err(s)?, params.real("y0").map_err(s)?),
            buf: Vec::new(),
        })
    }
}

impl Simulation for Henon {
    fn kind(&self) -> FrameKind {
        FrameKind::TrajectoryBatch
    }

    fn step(&mut self) -> SimResult<()> {
        let next = self.hp.apply(self.point);
        if !(next.0.abs() <= HENON_ESCAPE) {
            return Err(format!("orbit escaped |x| > {HENON_ESCAPE}"));
        }
        self.point = next;
        self.buf.extend([next.0, next.1]);
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        let n = self.buf.len() / 2;
        Payload::pack(vec![n, 2], self.buf.drain(..), json!({"columns": ["x", "y"]}))
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (
            FrameKind::TrajectoryBatch,
            Payload::pack(vec![1, 2], [self.point.0, self.point.1], json!({"columns": ["x", "y"]})),
        )
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        self.hp = Self::read(params)?;
        Ok(())
    }
}

struct Bsd {
    curve: CurveD,
    convention: PointConvention,
    x_max: u64,
    pending_primes: Vec<u64>,
    next: usize,
    series: ProductSeries,
    p_min: u64,
    sent: usize,
}

impl Bsd {
    fn new(params: &Params) -> SimResult<Self> {
        let curve = CurveD::new(params.integer("d").map_err(s)? as u64).map_err(s)?;
        let convention =
            PointConvention::from_name(params.text("convention").map_err(s)?).ok_or("unknown convention")?;
        let x_max = params.integer("x_max").map_err(s)? as u64;
        let (bad, good): (Vec<u64>, Vec<u64>) = primes_upto(x_max).into_iter().partition(|&p| curve.is_bad_prime(p));
        Ok(Bsd {
            series: ProductSeries {
                d: curve.d(),
                x_max,
                convention,
                primes: Vec::new(),
                counts: Vec::new(),
                log_products: Vec::new(),
                skipped_bad_primes: bad,
            },
            curve,
            convention,
            x_max,
            pending_primes: good,
            next: 0,
            p_min: params.integer("p_min").map_err(s)? as u64,
            sent: 0,
        })
    }

    fn rows(&self, from: usize) -> Payload {
        let s = &self.series;
        let n = s.primes.len() - from;
        let fit = rank_slope(s, self.p_min).ok();
        Payload::pack(
            vec![n, 3],
            (from..s.primes.len()).flat_map(|i| [s.primes[i] as f64, s.counts[i] as f64, s.log_products[i]]),
            json!({"columns": ["p", "n_p", "log_product"], "fit": fit, "x_max": self.x_max}),
        )
    }
}

impl Simulation for Bsd {
    fn kind(&self) -> FrameKind {
        FrameKind::SeriesAppend
    }

    fn step(&mut self) -> SimResult<()> {
        let Some(&p) = self.pending_primes.get(self.next) else {
            return Err("all primes up to x_max already counted".into());
        };
        let affine = count_points_mod_p(&self.curve, p).map_err(s)?;
        let n = match self.convention {
            PointConvention::Affine => affine,
            PointConvention::Projective => affine + 1,
        };
        let acc = self.series.log_products.last().copied().unwrap_or(0.0) + (n as f64 / p as f64).ln();
        self.series.primes.push(p);
        self.series.counts.push(n);
        self.series.log_products.push(acc);
        self.next += 1;
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        let from = self.sent;
        self.sent = self.series.primes.len();
        self.rows(from)
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        (FrameKind::SeriesAppend, self.rows(0))
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        self.p_min = params.integer("p_min").map_err(s)? as u64;
        Ok(())
    }

    fn idle(&self) -> bool {
        self.next >= self.pending_primes.len()
    }
}

#[derive(Debug, Clone, Copy)]
enum Plane {
    Julia(Complex),
    Mandelbrot,
    Newton { tol: f64 },
}

#[derive(Debug, Clone, Copy)]
struct EscapeSettings {
    plane: Plane,
    viewport: Viewport,
    options: EscapeOptions,
}

impl EscapeSettings {
    fn read(params: &Params) -> SimResult<Self> {
        let viewport = Viewport::new(
            params.complex("center").map_err(s)?,
            params.real("width").map_err(s)?,
            params.count("cols").map_err(s)?,
            params.count("rows").map_err(s)?,
        )
        .map_err(s)?;
        let max_iter = params.count("max_iter").map_err(s)? as u32;
        let (plane, mut options) = match params.experiment.as_str() {
            "julia" => (Plane::Julia(params.complex("c").map_err(s)?), EscapeOptions::new(max_iter)),
            "mandelbrot" => (Plane::Mandelbrot, EscapeOptions::new(max_iter)),
            _ => (
                Plane::Newton {
                    tol: params.real("tol").map_err(s)?,
                },
                EscapeOptions::new(max_iter),
            ),
        };
        if !matches!(plane, Plane::Newton { .. }) {
            if params.flag("smooth").map_err(s)? {
                options = EscapeOptions::smooth(max_iter);
            }
            if let Plane::Mandelbrot = plane {
                options.interior_check = params.flag("interior_check").map_err(s)?;
            }
        }
        Ok(EscapeSettings {
            plane,
            viewport,
            options,
        })
    }

    fn escape_value(&self, e: &EscapeSample) -> f64 {
        if self.options.smooth && e.count < self.options.max_iter {
            e.smooth
        } else {
            e.count as f64
        }
    }

    /// Values of one tile: escape counts (fractional when smooth) or Newton
    /// root labels with −1 for no convergence.
    fn render(&self, tile: &Tile) -> SimResult<Vec<f64>> {
        let EscapeSettings {
            viewport, options, ..
        } = *self;
        match self.plane {
            Plane::Julia(c) => {
                let k = JuliaKernel { c, viewport, options };
                Ok(render_tile(&k, tile).map_err(s)?.iter().map(|e| self.escape_value(e)).collect())
            }
            Plane::Mandelbrot => {
                let k = MandelbrotKernel { viewport, options };
                Ok(render_tile(&k, tile).map_err(s)?.iter().map(|e| self.escape_value(e)).collect())
            }
            Plane::Newton { tol } => {
                let k = NewtonKernel {
                    viewport,
                    max_iter: options.max_iter,
                    tol,
                };
                Ok(render_tile(&k, tile).map_err(s)?.iter().map(|n: &NewtonSample| n.label as f64).collect())
            }
        }
    }

    fn render_all(&self, tile_size: usize) -> SimResult<Vec<f64>> {
        fn flat<K: PixelKernel>(k: &K, tile: usize, f: impl Fn(&K::Pixel) -> f64) -> SimResult<Vec<f64>> {
            Ok(render_tiles(k, tile, 0).map_err(s)?.pixels.iter().map(f).collect())
        }
        let EscapeSettings {
            viewport, options, ..
        } = *self;
        match self.plane {
            Plane::Julia(c) => flat(&JuliaKernel { c, viewport, options }, tile_size, |e| self.escape_value(e)),
            Plane::Mandelbrot => flat(&MandelbrotKernel { viewport, options }, tile_size, |e| self.escape_value(e)),
            Plane::Newton { tol } => flat(
                &NewtonKernel {
                    viewport,
                    max_iter: options.max_iter,
                    tol,
                },
                tile_size,
                |n| n.label as f64,
            ),
        }
    }
}

/// Escape-grid session: a step renders one tile of the current frame.
/// Tiles are computed in parallel batches; a parameter change discards
/// every tile not yet emitted and restarts the frame.
struct EscapeSim {
    settings: EscapeSettings,
    tile_size: usize,
    batch: usize,
    layout: Vec<Tile>,
    cursor: usize,
    ready: VecDeque<(usize, Vec<f64>)>,
    current: Option<(usize, Vec<f64>)>,
}

impl EscapeSim {
    fn new(params: &Params, batch: usize) -> SimResult<Self> {
        let settings = EscapeSettings::read(params)?;
        let tile_size = params.count("tile_size").map_err(s)?;
        Ok(EscapeSim {
            layout: tiles(&settings.viewport, tile_size),
            settings,
            tile_size,
            batch: batch.max(1),
            cursor: 0,
            ready: VecDeque::new(),
            current: None,
        })
    }

    fn meta(&self, tile: Option<&Tile>, index: usize) -> Value {
        let vp = &self.settings.viewport;
        let (col0, row0, cols, rows) = tile.map_or((0, 0, vp.cols, vp.rows), |t| (t.col0, t.row0, t.cols, t.rows));
        json!({
            "col0": col0,
            "row0": row0,
            "cols": cols,
            "rows": rows,
            "frame_cols": vp.cols,
            "frame_rows": vp.rows,
            "tile_index": index,
            "tiles_total": self.layout.len(),
            "max_iter": self.settings.options.max_iter,
        })
    }
}

impl Simulation for EscapeSim {
    fn kind(&self) -> FrameKind {
        FrameKind::EscapeTile
    }

    fn step(&mut self) -> SimResult<()> {
        if self.ready.is_empty() {
            let end = (self.cursor + self.batch).min(self.layout.len());
            if self.cursor == end {
                return Err("frame already complete".into());
            }
            let settings = self.settings;
            let rendered = par::map_slice(Execution::Parallel, &self.layout[self.cursor..end], |t| settings.render(t));
            for (i, r) in rendered.into_iter().enumerate() {
                self.ready.push_back((self.cursor + i, r?));
            }
            self.cursor = end;
        }
        self.current = self.ready.pop_front();
        Ok(())
    }

    fn drain(&mut self) -> Payload {
        let (index, values) = self.current.take().expect("drain follows a step");
        let tile = self.layout[index];
        Payload::pack(vec![tile.rows, tile.cols], values, self.meta(Some(&tile), index))
    }

    fn snapshot(&self) -> (FrameKind, Payload) {
        let vp = self.settings.viewport;
        let values = self
            .settings
            .render_all(self.tile_size)
            .unwrap_or_else(|_| vec![f64::NAN; vp.len()]);
        let mut meta = self.meta(None, 0);
        meta["tiles_done"] = json!(self.cursor - self.ready.len());
        (FrameKind::EscapeTile, Payload::pack(vec![vp.rows, vp.cols], values, meta))
    }

    fn apply(&mut self, params: &Params) -> SimResult<()> {
        let settings = EscapeSettings::read(params)?;
        self.settings = settings;
        self.cursor = 0;
        self.ready.clear();
        self.current = None;
        Ok(())
    }

    fn idle(&self) -> bool {
        self.cursor >= self.layout.len() && self.ready.is_empty()
    }

    fn frame_per_step(&self) -> bool {
        true
    }
}
