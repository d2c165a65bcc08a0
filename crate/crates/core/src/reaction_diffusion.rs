//! Two-morphogen reaction-diffusion on a periodic grid.
//!
//! The activator u and inhibitor v obey
//!
//! ```text
//! ∂u/∂t = u(v − 1) + A ∇²u
//! ∂v/∂t = 16 − uv  + B ∇²v
//! ```
//!
//! with a five-point Laplacian and forward-Euler time stepping. The homogeneous
//! state (u, v) = (16, 1) is an exact fixed point of the discrete update.
//!
//! [`Coupling::Verbatim`] replaces ∇²v by ∇²u in the inhibitor equation,
//! reproducing a commonly printed variant of these equations for comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::first_non_finite;
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuringError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("grid shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("non-finite concentration at cell {index} (step {step})")]
    Instability { step: usize, index: usize },
}

pub type Result<T> = std::result::Result<T, TuringError>;

fn invalid(name: &'static str, reason: impl Into<String>) -> TuringError {
    TuringError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Homogeneous steady state (u, v).
pub const STEADY_STATE: (f64, f64) = (16.0, 1.0);

/// Largest dt accepted for the reaction terms: the stiffest eigenvalue of the
/// reaction Jacobian at (16, 1) is −8 − √48 ≈ −14.93, so Euler needs dt < 0.134.
pub const MAX_REACTION_DT: f64 = 0.1;

/// Which field the inhibitor's diffusion term acts on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// B ∇²v: the inhibitor diffuses.
    #[default]
    Inhibitor,
    /// B ∇²u in the inhibitor equation.
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuringParams {
    /// A, diffusion coefficient of the activator.
    pub activator_diffusion: f64,
    /// B, diffusion coefficient of the inhibitor.
    pub inhibitor_diffusion: f64,
    pub dt: f64,
    pub dx: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub coupling: Coupling,
}

impl TuringParams {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.activator_diffusion, self.inhibitor_diffusion);
        if !(a >= 0.0 && a.is_finite()) {
            return Err(invalid("A", "must be non-negative"));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(invalid("B", "must be non-negative"));
        }
        if self.nx < 8 || self.ny < 8 {
            return Err(invalid("nx", "grid must be at least 8x8"));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(invalid("dx", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        let limit = self.max_stable_dt();
        if self.dt > limit {
            return Err(invalid("dt", format!("{} exceeds stability limit {limit}", self.dt)));
        }
        Ok(())
    }

    /// min(dx²/(4·max(A, B)), reaction limit).
    pub fn max_stable_dt(&self) -> f64 {
        let d = self
            .activator_diffusion
            .max(self.inhibitor_diffusion)
            .max(f64::EPSILON);
        (self.dx * self.dx / (4.0 * d)).min(MAX_REACTION_DT)
    }
}

/// Scalar grid, row-major with `ny` rows of `nx` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    pub values: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
}

impl Field2D {
    pub fn filled(nx: usize, ny: usize, dx: f64, value: f64) -> Self {
        Field2D {
            values: vec![value; nx * ny],
            nx,
            ny,
            dx,
        }
    }

    pub fn from_fn(nx: usize, ny: usize, dx: f64, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..ny)
            .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| f(ix, iy))
            .collect();
        Field2D { values, nx, ny, dx }
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, value: f64) {
        self.values[iy * self.nx + ix] = value;
    }

    /// Periodic shift: the result at (ix, iy) is self at (ix − sx, iy − sy).
    pub fn shifted(&self, sx: usize, sy: usize) -> Field2D {
        Field2D::from_fn(self.nx, self.ny, self.dx, |ix, iy| {
            self.get((ix + self.nx - sx % self.nx) % self.nx, (iy + self.ny - sy % self.ny) % self.ny)
        })
    }
}

/// Five-point periodic Laplacian of `f` at (ix, iy).
#[inline]
fn laplacian(f: &[f64], nx: usize, ny: usize, ix: usize, iy: usize, inv_dx2: f64) -> f64 {
    let row = iy * nx;
    let left = f[row + (ix + nx - 1) % nx];
    let right = f[row + (ix + 1) % nx];
    let up = f[((iy + ny - 1) % ny) * nx + ix];
    let down = f[((iy + 1) % ny) * nx + ix];
    ((left + right) + (up + down) - 4.0 * f[row + ix]) * inv_dx2
}

fn check_shapes(u: &Field2D, v: &Field2D, params: &TuringParams) -> Result<()> {
    for f in [u, v] {
        if f.nx != params.nx || f.ny != params.ny || f.values.len() != f.nx * f.ny {
            return Err(TuringError::ShapeMismatch(f.nx, f.ny, params.nx, params.ny));
        }
    }
    Ok(())
}

/// Writes one Euler step of (u, v) into (u_out, v_out), rows in parallel.
fn step_into(
    u: &[f64],
    v: &[f64],
    u_out: &mut [f64],
    v_out: &mut [f64],
    p: &TuringParams,
    exec: Execution,
) {
    let (nx, ny) = (p.nx, p.ny);
    let inv_dx2 = 1.0 / (p.dx * p.dx);
    let (a, b, dt) = (p.activator_diffusion, p.inhibitor_diffusion, p.dt);
    let coupling = p.coupling;
    let mut rows: Vec<(&mut [f64], &mut [f64])> =
        u_out.chunks_mut(nx).zip(v_out.chunks_mut(nx)).collect();
    let update = |iy: usize, (urow, vrow): &mut (&mut [f64], &mut [f64])| {
        for ix in 0..nx {
            let k = iy * nx + ix;
            let (uc, vc) = (u[k], v[k]);
            let lap_u = laplacian(u, nx, ny, ix, iy, inv_dx2);
            let lap_inhib = match coupling {
                Coupling::Inhibitor => laplacian(v, nx, ny, ix, iy, inv_dx2),
                Coupling::Verbatim => lap_u,
            };
            urow[ix] = uc + dt * (uc * (vc - 1.0) + a * lap_u);
            vrow[ix] = vc + dt * (16.0 - uc * vc + b * lap_inhib);
        }
    };
    par::for_each_row(exec, &mut rows, 1, |iy, row| update(iy, &mut row[0]));
}

/// One forward-Euler step.
pub fn turing_step(u: &Field2D, v: &Field2D, params: &TuringParams) -> Result<(Field2D, Field2D)> {
    turing_step_with(u, v, params, Execution::Sequential)
}

pub fn turing_step_with(
    u: &Field2D,
    v: &Field2D,
    params: &TuringParams,
    exec: Execution,
) -> Result<(Field2D, Field2D)> {
    params.validate()?;
    check_shapes(u, v, params)?;
    let mut u_next = u.clone();
    let mut v_next = v.clone();
    step_into(&u.values, &v.values, &mut u_next.values, &mut v_next.values, params, exec);
    if let Some(index) = first_non_finite(&u_next.values).or_else(|| first_non_finite(&v_next.values)) {
        return Err(TuringError::Instability { step: 1, index });
    }
    Ok((u_next, v_next))
}

/// Homogeneous steady state plus uniform noise in [−amp, amp] on u, drawn
/// row-major from ChaCha8 seeded with `seed`.
pub fn initial_state(params: &TuringParams, seed: u64, noise_amp: f64) -> (Field2D, Field2D) {
    let mut u = Field2D::filled(params.nx, params.ny, params.dx, STEADY_STATE.0);
    let v = Field2D::filled(params.nx, params.ny, params.dx, STEADY_STATE.1);
    if noise_amp > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in u.values.iter_mut() {
            *x += rng.gen_range(-noise_amp..=noise_amp);
        }
    }
    (u, v)
}

/// Double-buffered simulation state.
#[derive(Debug, Clone)]
pub struct TuringSim {
    pub params: TuringParams,
    pub u: Field2D,
    pub v: Field2D,
    scratch_u: Vec<f64>,
    scratch_v: Vec<f64>,
    pub steps: usize,
}

impl TuringSim {
    pub fn new(params: TuringParams, u: Field2D, v: Field2D) -> Result<Self> {
        params.validate()?;
        check_shapes(&u, &v, &params)?;
        let n = u.values.len();
        Ok(TuringSim {
            params,
            u,
            v,
            scratch_u: vec![0.0; n],
            scratch_v: vec![0.0; n],
            steps: 0,
        })
    }

    pub fn step(&mut self, exec: Execution) -> Result<()> {
        step_into(
            &self.u.values,
            &self.v.values,
            &mut self.scratch_u,
            &mut self.scratch_v,
            &self.params,
            exec,
        );
        std::mem::swap(&mut self.u.values, &mut self.scratch_u);
        std::mem::swap(&mut self.v.values, &mut self.scratch_v);
        self.steps += 1;
        if let Some(index) = first_non_finite(&self.u.values).or_else(|| first_non_finite(&self.v.values)) {
            return Err(TuringError::Instability {
                step: self.steps,
                index,
            });
        }
        Ok(())
    }
}

/// Runs from the noisy steady state, keeping step 0 and every
/// `record_every`-th step.
pub fn turing_simulate(
    params: &TuringParams,
    seed: u64,
    noise_amp: f64,
    n_steps: usize,
    record_every: usize,
    exec: Execution,
) -> Result<Vec<(Field2D, Field2D)>> {
    if record_every == 0 {
        return Err(invalid("record_every", "must be at least 1"));
    }
    if !(noise_amp >= 0.0 && noise_amp.is_finite()) {
        return Err(invalid("noise_amp", "must be non-negative"));
    }
    let (u, v) = initial_state(params, seed, noise_amp);
    let mut sim = TuringSim::new(*params, u, v)?;
    let mut snapshots = vec![(sim.u.clone(), sim.v.clone())];
    for step in 1..=n_steps {
        sim.step(exec)?;
        if step % record_every == 0 {
            snapshots.push((sim.u.clone(), sim.v.clone()));
        }
    }
    Ok(snapshots)
}

/// Population statistics of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn pattern_stats(field: &Field2D) -> PatternStats {
    let n = field.values.len() as f64;
    let mean = field.values.iter().sum::<f64>() / n;
    let var = field.values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let (min, max) = field
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    PatternStats {
        mean,
        std: var.sqrt(),
        min,
        max,
    }
}

/// Largest real part of the linearized growth rate about (16, 1) for a
/// perturbation whose discrete Laplacian eigenvalue is `-k2`.
pub fn linear_growth_rate(a: f64, b: f64, coupling: Coupling, k2: f64) -> f64 {
    let (u0, v0) = STEADY_STATE;
    // Jacobian of the reaction at the steady state
    let (fu, fv, gu, gv) = (v0 - 1.0, u0, -v0, -u0);
    let (m11, m12, m21, m22) = match coupling {
        Coupling::Inhibitor => (fu - a * k2, fv, gu, gv - b * k2),
        Coupling::Verbatim => (fu - a * k2, fv, gu - b * k2, gv),
    };
    let tr = m11 + m22;
    let det = m11 * m22 - m12 * m21;
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        0.5 * (tr + disc.sqrt())
    } else {
        0.5 * tr
    }
}

/// Result of scanning (A, B) for Turing instability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub activator_diffusion: f64,
    pub inhibitor_diffusion: f64,
    /// Fastest growth rate over all grid wavenumbers, excluding k = 0.
    pub growth_rate: f64,
}

/// Scans every (A, B) pair over all discrete wavenumbers of an n×n grid and
/// returns the pair with the fastest-growing spatial mode.
///
/// A positive `growth_rate` means the homogeneous state is Turing-unstable
/// for those coefficients.
pub fn calibrate(a_values: &[f64], b_values: &[f64], coupling: Coupling, n: usize, dx: f64) -> Option<Calibration> {
    let symbol = |k: usize| (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / (dx * dx);
    let mut best: Option<Calibration> = None;
    for &a in a_values {
        for &b in b_values {
            for kx in 0..=n / 2 {
                for ky in 0..=n / 2 {
                    if kx == 0 && ky == 0 {
                        continue;
                    }
                    let rate = linear_growth_rate(a, b, coupling, symbol(kx) + symbol(ky));
                    if best.is_none_or(|c| rate > c.growth_rate) {
                        best = Some(Calibration {
                            activator_diffusion: a,
                            inhibitor_diffusion: b,
                            growth_rate: rate,
                        });
                    }
                }
            }
        }
    }
    best
}
