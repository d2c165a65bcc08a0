//! Fixed-step integrators and hyperplane section crossings shared by the
//! continuous-time experiments.
//!
//! Everything here is a pure function of its inputs. Integration uses
//! classical fourth-order Runge–Kutta with a constant step so that runs are
//! bit-reproducible; Hamiltonian systems that need long-time energy fidelity
//! use the velocity-Verlet [`leapfrog_step`].

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("state vector must have at least one component")]
    EmptyState,
    #[error("non-finite value in component {component}")]
    NonFinite { component: usize },
    #[error("step {step} failed: non-finite value in component {component}")]
    StepFailed { step: usize, component: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("record interval must be at least 1")]
    InvalidRecordInterval,
    #[error("section coordinate {coordinate} out of range for dimension {dim}")]
    SectionOutOfRange { coordinate: usize, dim: usize },
    #[error("trajectory times must be strictly increasing (violated at sample {0})")]
    NonMonotoneTimes(usize),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Point in phase space. Never empty; every component is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(NumericsError::EmptyState);
        }
        if let Some(component) = first_non_finite(&components) {
            return Err(NumericsError::NonFinite { component });
        }
        Ok(StateVector(components))
    }

    pub fn from_slice(components: &[f64]) -> Result<Self> {
        Self::new(components.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = NumericsError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVector::new(v)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Vec<f64> {
        s.0
    }
}

/// Time-ordered samples of a single orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(NumericsError::DimensionMismatch {
                expected: times.len(),
                found: states.len(),
            });
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(NumericsError::NonMonotoneTimes(i + 1));
        }
        if let Some(first) = states.first() {
            if let Some(bad) = states.iter().find(|s| s.dim() != first.dim()) {
                return Err(NumericsError::DimensionMismatch {
                    expected: first.dim(),
                    found: bad.dim(),
                });
            }
        }
        Ok(Trajectory { times, states })
    }

    pub(crate) fn with_capacity(n: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
        }
    }

    /// Appends a sample; callers guarantee increasing time and a fixed dimension.
    pub(crate) fn push_unchecked(&mut self, t: f64, state: Vec<f64>) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.states.push(StateVector(state));
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &StateVector)> {
        self.times.last().copied().zip(self.states.last())
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &StateVector)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

/// Right-hand side of an autonomous ODE, written into `out`.
pub trait VectorField {
    fn eval(&self, state: &[f64], out: &mut [f64]);
}

impl<F> VectorField for F
where
    F: Fn(&[f64], &mut [f64]),
{
    fn eval(&self, state: &[f64], out: &mut [f64]) {
        self(state, out)
    }
}

/// Reusable RK4 scratch space; avoids allocating per step in long runs.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `state` by one step. On failure `state` holds the non-finite
    /// result and the offending component is reported.
    pub fn step<F: VectorField + ?Sized>(
        &mut self,
        field: &F,
        state: &mut [f64],
        dt: f64,
    ) -> Result<()> {
        let n = state.len();
        if self.k1.len() != n {
            *self = Rk4::new(n);
        }
        let half = 0.5 * dt;

        field.eval(state, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = state[i] + half * self.k1[i];
        }
        field.eval(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = state[i] + half * self.k2[i];
        }
        field.eval(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = state[i] + dt * self.k3[i];
        }
        field.eval(&self.tmp, &mut self.k4);

        let sixth = dt / 6.0;
        for i in 0..n {
            state[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        match first_non_finite(state) {
            Some(component) => Err(NumericsError::NonFinite { component }),
            None => Ok(()),
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(NumericsError::InvalidStep(dt))
    }
}

pub(crate) fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

/// One classical Runge–Kutta step of size `dt`.
pub fn rk4_step<F: VectorField + ?Sized>(
    field: &F,
    state: &StateVector,
    dt: f64,
) -> Result<StateVector> {
    check_dt(dt)?;
    let mut next = state.0.clone();
    Rk4::new(state.dim()).step(field, &mut next, dt)?;
    Ok(StateVector(next))
}

/// One velocity-Verlet step. `accel` maps positions to accelerations.
///
/// Any nonzero finite `dt` is accepted; stepping with `-dt` undoes a step of
/// `dt` up to round-off.
pub fn leapfrog_step<A>(
    accel: &A,
    positions: &StateVector,
    velocities: &StateVector,
    dt: f64,
) -> Result<(StateVector, StateVector)>
where
    A: Fn(&[f64], &mut [f64]) + ?Sized,
{
    if !(dt.is_finite() && dt != 0.0) {
        return Err(NumericsError::InvalidStep(dt));
    }
    if positions.dim() != velocities.dim() {
        return Err(NumericsError::DimensionMismatch {
            expected: positions.dim(),
            found: velocities.dim(),
        });
    }
    let mut x = positions.0.clone();
    let mut v = velocities.0.clone();
    let mut a = vec![0.0; x.len()];
    accel(&x, &mut a);
    verlet_in_place(accel, &mut x, &mut v, &mut a, dt);
    if let Some(component) = first_non_finite(&x).or_else(|| first_non_finite(&v)) {
        return Err(NumericsError::NonFinite { component });
    }
    Ok((StateVector(x), StateVector(v)))
}

/// In-place velocity-Verlet update. `a` must hold `accel(x)` on entry and
/// holds `accel(x')` on exit, so consecutive calls cost one force evaluation.
pub fn verlet_in_place<A>(accel: &A, x: &mut [f64], v: &mut [f64], a: &mut [f64], dt: f64)
where
    A: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let half = 0.5 * dt;
    for i in 0..x.len() {
        v[i] += half * a[i];
        x[i] += dt * v[i];
    }
    accel(x, a);
    for i in 0..x.len() {
        v[i] += half * a[i];
    }
}

/// Fixed-step RK4 from `state0`, keeping every `record_every`-th state.
///
/// Returns ⌊n_steps / record_every⌋ + 1 samples, the first being `(0, state0)`.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    state0: &StateVector,
    dt: f64,
    n_steps: usize,
    record_every: usize,
) -> Result<Trajectory> {
    check_dt(dt)?;
    if record_every == 0 {
        return Err(NumericsError::InvalidRecordInterval);
    }
    let mut traj = Trajectory::with_capacity(n_steps / record_every + 1);
    let mut state = state0.0.clone();
    let mut rk = Rk4::new(state.len());
    traj.push_unchecked(0.0, state.clone());
    for step in 1..=n_steps {
        rk.step(field, &mut state, dt)
            .map_err(|e| with_step(e, step))?;
        if step % record_every == 0 {
            traj.push_unchecked(step as f64 * dt, state.clone());
        }
    }
    Ok(traj)
}

pub(crate) fn with_step(err: NumericsError, step: usize) -> NumericsError {
    match err {
        NumericsError::NonFinite { component } => NumericsError::StepFailed { step, component },
        other => other,
    }
}

/// Which sign changes of `state[coordinate] - level` count as crossings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// From below the level to at-or-above it.
    Rising,
    /// From above the level to at-or-below it.
    Falling,
    Both,
}

/// Hyperplane `state[coordinate] == level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub coordinate: usize,
    pub level: f64,
    pub direction: Direction,
}

impl SectionSpec {
    pub fn new(coordinate: usize, level: f64, direction: Direction) -> Self {
        SectionSpec {
            coordinate,
            level,
            direction,
        }
    }

    /// Crossing inside one segment, located by linear interpolation.
    ///
    /// A sample lying exactly on the level belongs to the segment that ends on
    /// it, so a crossing is never reported twice.
    pub fn segment_crossing(
        &self,
        (t0, s0): (f64, &[f64]),
        (t1, s1): (f64, &[f64]),
    ) -> Option<(f64, Vec<f64>)> {
        let g0 = s0[self.coordinate] - self.level;
        let g1 = s1[self.coordinate] - self.level;
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        let hit = match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Both => rising || falling,
        };
        if !hit {
            return None;
        }
        let frac = g0 / (g0 - g1);
        let mut point: Vec<f64> = s0
            .iter()
            .zip(s1)
            .map(|(a, b)| a + frac * (b - a))
            .collect();
        point[self.coordinate] = self.level;
        Some((t0 + frac * (t1 - t0), point))
    }
}

/// All crossings of `section` along `traj`, in time order.
pub fn poincare_crossings(
    traj: &Trajectory,
    section: &SectionSpec,
) -> Result<Vec<(f64, StateVector)>> {
    let Some(first) = traj.states.first() else {
        return Ok(Vec::new());
    };
    if section.coordinate >= first.dim() {
        return Err(NumericsError::SectionOutOfRange {
            coordinate: section.coordinate,
            dim: first.dim(),
        });
    }
    let samples: Vec<(f64, &[f64])> = traj.iter().map(|(t, s)| (t, s.as_slice())).collect();
    Ok(samples
        .windows(2)
        .filter_map(|w| section.segment_crossing(w[0], w[1]))
        .map(|(t, p)| (t, StateVector(p)))
        .collect())
}
