//! Continuous-time chaotic systems: the Lorenz convection model and the
//! Hénon–Heiles galactic potential.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    self, with_step, Direction, NumericsError, Rk4, SectionSpec, StateVector, Trajectory,
    VectorField,
};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, FlowError>;

fn invalid(name: &'static str, reason: impl Into<String>) -> FlowError {
    FlowError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Lorenz system parameters. Defaults are σ = 10, r = 28, b = 8/3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    /// Prandtl number.
    pub sigma: f64,
    /// Reduced Rayleigh number (driving temperature difference).
    pub r: f64,
    /// Geometric factor of the convection cell.
    pub b: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            r: 28.0,
            b: 8.0 / 3.0,
        }
    }
}

impl LorenzParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("r", self.r), ("b", self.b)] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// The non-trivial equilibria (±√(b(r−1)), ±√(b(r−1)), r−1), present for r > 1.
    pub fn fixed_points(&self) -> Vec<[f64; 3]> {
        let mut points = vec![[0.0; 3]];
        if self.r > 1.0 {
            let q = (self.b * (self.r - 1.0)).sqrt();
            points.push([q, q, self.r - 1.0]);
            points.push([-q, -q, self.r - 1.0]);
        }
        points
    }

    /// Divergence of the field; constant in phase space.
    pub fn divergence(&self) -> f64 {
        -(self.sigma + 1.0 + self.b)
    }
}

impl VectorField for LorenzParams {
    fn eval(&self, s: &[f64], out: &mut [f64]) {
        let (x, y, z) = (s[0], s[1], s[2]);
        out[0] = self.sigma * (y - x);
        out[1] = self.r * x - y - x * z;
        out[2] = x * y - self.b * z;
    }
}

/// Evaluates (σ(y−x), rx−y−xz, xy−bz).
pub fn lorenz_field(params: &LorenzParams, state: &[f64]) -> Result<StateVector> {
    if state.len() != 3 {
        return Err(NumericsError::DimensionMismatch {
            expected: 3,
            found: state.len(),
        }
        .into());
    }
    let mut out = vec![0.0; 3];
    params.eval(state, &mut out);
    Ok(StateVector::new(out)?)
}

fn check_lorenz_run(params: &LorenzParams, state0: &StateVector, dt: f64) -> Result<()> {
    params.validate()?;
    if state0.dim() != 3 {
        return Err(NumericsError::DimensionMismatch {
            expected: 3,
            found: state0.dim(),
        }
        .into());
    }
    if !(dt > 0.0 && dt <= 0.05) {
        return Err(invalid("dt", format!("must lie in (0, 0.05], got {dt}")));
    }
    Ok(())
}

/// Integrates away `transient_steps`, then records `sample_steps + 1` states.
///
/// Sample times are absolute, so the first sample sits at `transient_steps·dt`.
pub fn lorenz_attractor(
    params: &LorenzParams,
    state0: &StateVector,
    dt: f64,
    transient_steps: usize,
    sample_steps: usize,
) -> Result<Trajectory> {
    check_lorenz_run(params, state0, dt)?;
    let mut state = state0.to_vec();
    let mut rk = Rk4::new(3);
    for step in 1..=transient_steps {
        rk.step(params, &mut state, dt)
            .map_err(|e| with_step(e, step))?;
    }
    let mut traj = Trajectory::with_capacity(sample_steps + 1);
    traj.push_unchecked(transient_steps as f64 * dt, state.clone());
    for k in 1..=sample_steps {
        let step = transient_steps + k;
        rk.step(params, &mut state, dt)
            .map_err(|e| with_step(e, step))?;
        traj.push_unchecked(step as f64 * dt, state.clone());
    }
    Ok(traj)
}

/// Separation between two orbits started `delta0` apart along x.
///
/// Returns `n_steps + 1` pairs `(t, log10 |Δ|)`, without renormalization.
/// Identical orbits report `f64::NEG_INFINITY`.
pub fn separation_growth(
    params: &LorenzParams,
    state0: &StateVector,
    delta0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<(f64, f64)>> {
    check_lorenz_run(params, state0, dt)?;
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(invalid("delta0", format!("must be non-negative, got {delta0}")));
    }
    let mut a = state0.to_vec();
    let mut b = a.clone();
    b[0] += delta0;
    let mut rk = Rk4::new(3);
    let distance = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
            .log10()
    };
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push((0.0, distance(&a, &b)));
    for step in 1..=n_steps {
        rk.step(params, &mut a, dt).map_err(|e| with_step(e, step))?;
        rk.step(params, &mut b, dt).map_err(|e| with_step(e, step))?;
        out.push((step as f64 * dt, distance(&a, &b)));
    }
    Ok(out)
}

/// Phase point of the Hénon–Heiles system.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HHState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl HHState {
    /// Layout used by the integrator: (x, y, px, py).
    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        HHState {
            x: s[0],
            y: s[1],
            px: s[2],
            py: s[3],
        }
    }
}

/// Energy at which the potential's saddles open and orbits can escape.
pub const HH_ESCAPE_ENERGY: f64 = 1.0 / 6.0;

/// H = ½(px² + py²) + ½(x² + y²) + x²y − y³/3.
pub fn hh_energy(s: &HHState) -> f64 {
    0.5 * (s.px * s.px + s.py * s.py) + 0.5 * (s.x * s.x + s.y * s.y) + s.x * s.x * s.y
        - s.y * s.y * s.y / 3.0
}

/// Hamilton's equations for [`hh_energy`], state layout (x, y, px, py).
#[derive(Debug, Clone, Copy, Default)]
pub struct HenonHeiles;

impl VectorField for HenonHeiles {
    fn eval(&self, s: &[f64], out: &mut [f64]) {
        let (x, y) = (s[0], s[1]);
        out[0] = s[2];
        out[1] = s[3];
        out[2] = -x - 2.0 * x * y;
        out[3] = -y - x * x + y * y;
    }
}

/// How initial conditions on the x = 0 plane are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedRule {
    /// The given (y, py) pairs; `n_seeds` is ignored.
    Explicit(Vec<(f64, f64)>),
    /// Evenly spaced y on the py = 0 line across the energetically allowed range.
    Line,
    /// A square lattice over the allowed (y, py) box, first `n_seeds` cells
    /// in row-major order. Cells outside the energy surface are skipped.
    Grid,
}

impl SeedRule {
    pub fn from_name(name: &str) -> Option<SeedRule> {
        match name {
            "line" => Some(SeedRule::Line),
            "grid" => Some(SeedRule::Grid),
            "origin" => Some(SeedRule::Explicit(vec![(0.0, 0.0)])),
            _ => None,
        }
    }
}

/// Points collected on the section x = 0, px > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub points: Vec<SectionPoint>,
    pub energy: f64,
    pub seed_count: usize,
    /// Seeds whose (y, py) lay outside the energy surface.
    pub skipped_seeds: usize,
    /// Seeds that left the bounded region or ran out of step budget.
    pub escaped_seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub seed: usize,
    pub y: f64,
    pub py: f64,
}

/// 2E − py² − y² + ⅔y³, the px² available at x = 0.
fn px_squared(energy: f64, y: f64, py: f64) -> f64 {
    2.0 * energy - py * py - y * y + 2.0 / 3.0 * y * y * y
}

/// Ends of the allowed y interval on the line x = 0, py = 0.
fn allowed_y_range(energy: f64) -> (f64, f64) {
    let h = |y: f64| px_squared(energy, y, 0.0);
    let bisect = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if h(mid) >= 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    (bisect(0.0, -2.0), bisect(0.0, 1.0))
}

fn seeds_for(energy: f64, n_seeds: usize, rule: &SeedRule) -> Vec<(f64, f64)> {
    match rule {
        SeedRule::Explicit(list) => list.clone(),
        SeedRule::Line => {
            let (lo, hi) = allowed_y_range(energy);
            (0..n_seeds)
                .map(|i| (lo + (i + 1) as f64 * (hi - lo) / (n_seeds + 1) as f64, 0.0))
                .collect()
        }
        SeedRule::Grid => {
            let side = (n_seeds as f64).sqrt().ceil() as usize;
            let (lo, hi) = allowed_y_range(energy);
            let pmax = (2.0 * energy).sqrt();
            let mut seeds = Vec::with_capacity(n_seeds);
            'rows: for j in 0..side {
                let py = -pmax + (j as f64 + 0.5) * 2.0 * pmax / side as f64;
                for i in 0..side {
                    if seeds.len() == n_seeds {
                        break 'rows;
                    }
                    let y = lo + (i as f64 + 0.5) * (hi - lo) / side as f64;
                    seeds.push((y, py));
                }
            }
            seeds
        }
    }
}

/// Starting states on x = 0 for a section at `energy`, skipping seeds
/// outside the energy surface.
pub fn section_seeds(energy: f64, n_seeds: usize, rule: &SeedRule) -> Vec<HHState> {
    seeds_for(energy, n_seeds, rule)
        .into_iter()
        .filter_map(|(y, py)| {
            let r = px_squared(energy, y, py);
            (r >= 0.0).then(|| HHState {
                x: 0.0,
                y,
                px: r.sqrt(),
                py,
            })
        })
        .collect()
}

enum SeedOutcome {
    Infeasible,
    Escaped(Vec<(f64, f64)>),
    Complete(Vec<(f64, f64)>),
}

const ESCAPE_RADIUS: f64 = 10.0;

fn trace_seed(energy: f64, (y, py): (f64, f64), n_crossings: usize, dt: f64) -> SeedOutcome {
    let radicand = px_squared(energy, y, py);
    if radicand < 0.0 {
        return SeedOutcome::Infeasible;
    }
    let section = SectionSpec::new(0, 0.0, Direction::Rising);
    let mut state = [0.0, y, radicand.sqrt(), py];
    let mut prev = state;
    let mut rk = Rk4::new(4);
    let mut hits = Vec::with_capacity(n_crossings);
    // A section return takes about one period 2π; allow generous slack.
    let budget = ((n_crossings as f64 + 1.0) * 200.0 / dt).ceil() as usize;
    let mut t = 0.0;
    for step in 1..=budget {
        if hits.len() >= n_crossings {
            return SeedOutcome::Complete(hits);
        }
        if rk.step(&HenonHeiles, &mut state, dt).is_err()
            || state[0].abs() > ESCAPE_RADIUS
            || state[1].abs() > ESCAPE_RADIUS
        {
            return SeedOutcome::Escaped(hits);
        }
        let t_next = step as f64 * dt;
        if let Some((_, p)) = section.segment_crossing((t, &prev), (t_next, &state)) {
            if p[2] > 0.0 {
                hits.push((p[1], p[3]));
            }
        }
        prev = state;
        t = t_next;
    }
    if hits.len() >= n_crossings {
        SeedOutcome::Complete(hits)
    } else {
        SeedOutcome::Escaped(hits)
    }
}

/// Collects the section x = 0, px > 0 for orbits of the given energy.
///
/// Each seed starts at (0, y, px, py) with px ≥ 0 solved from the energy.
/// Seeds are integrated independently (in parallel under
/// [`Execution::Parallel`]) and merged in seed order.
pub fn hh_section(
    energy: f64,
    n_seeds: usize,
    n_crossings: usize,
    dt: f64,
    rule: &SeedRule,
    exec: Execution,
) -> Result<PoincareSection> {
    if !(energy > 0.0 && energy <= HH_ESCAPE_ENERGY) {
        return Err(invalid("energy", format!("must lie in (0, 1/6], got {energy}")));
    }
    if n_seeds == 0 && !matches!(rule, SeedRule::Explicit(_)) {
        return Err(invalid("n_seeds", "must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NumericsError::InvalidStep(dt).into());
    }
    let seeds = seeds_for(energy, n_seeds, rule);
    let outcomes = par::map_slice(exec, &seeds, |&seed| {
        if n_crossings == 0 {
            return match px_squared(energy, seed.0, seed.1) < 0.0 {
                true => SeedOutcome::Infeasible,
                false => SeedOutcome::Complete(Vec::new()),
            };
        }
        trace_seed(energy, seed, n_crossings, dt)
    });

    let mut section = PoincareSection {
        points: Vec::new(),
        energy,
        seed_count: seeds.len(),
        skipped_seeds: 0,
        escaped_seeds: 0,
    };
    for (seed, outcome) in outcomes.into_iter().enumerate() {
        let hits = match outcome {
            SeedOutcome::Infeasible => {
                section.skipped_seeds += 1;
                continue;
            }
            SeedOutcome::Escaped(hits) => {
                section.escaped_seeds += 1;
                hits
            }
            SeedOutcome::Complete(hits) => hits,
        };
        section
            .points
            .extend(hits.into_iter().map(|(y, py)| SectionPoint { seed, y, py }));
    }
    Ok(section)
}

/// Energy of the section point, with px recovered from its sign convention.
pub fn section_point_state(energy: f64, p: &SectionPoint) -> HHState {
    HHState {
        x: 0.0,
        y: p.y,
        px: px_squared(energy, p.y, p.py).max(0.0).sqrt(),
        py: p.py,
    }
}

/// Convenience wrapper: RK4 trajectory of the Hénon–Heiles flow.
pub fn hh_trajectory(
    start: &HHState,
    dt: f64,
    n_steps: usize,
    record_every: usize,
) -> Result<Trajectory> {
    let s0 = StateVector::new(start.to_array().to_vec())?;
    Ok(numerics::integrate(&HenonHeiles, &s0, dt, n_steps, record_every)?)
}
