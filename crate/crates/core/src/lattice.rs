//! Nonlinear lattices and dispersive waves.
//!
//! The first half is the Fermi–Pasta–Ulam–Tsingou chain: N springs with fixed
//! ends and a quadratic force correction of strength α, integrated with
//! velocity Verlet and analyzed in terms of the linear chain's sine modes.
//! The second half is the Korteweg–de Vries equation
//! v_t + v v_x + δ² v_xxx = 0 on a periodic domain, discretized with the
//! three-level Zabusky–Kruskal leapfrog scheme.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{first_non_finite, verlet_in_place};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("fixed ends violated: u[0] = {first}, u[N] = {last}")]
    BoundaryViolation { first: f64, last: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("energy drift {drift:.3e} exceeds {limit:.0e} at step {step}")]
    EnergyDrift { step: usize, drift: f64, limit: f64 },
    #[error("non-finite field value at index {index} (step {step})")]
    Instability { step: usize, index: usize },
    #[error("time step {dt} violates the stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },
    #[error("energy series is empty")]
    EmptySeries,
}

pub type Result<T> = std::result::Result<T, LatticeError>;

fn invalid(name: &'static str, reason: impl Into<String>) -> LatticeError {
    LatticeError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Relative total-energy drift at which an FPUT run is aborted.
pub const FPUT_DRIFT_LIMIT: f64 = 1e-4;

/// Chain with `n_masses` springs: displacements u_0..u_N with u_0 = u_N = 0,
/// so N − 1 masses move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FputParams {
    pub n_masses: usize,
    pub alpha: f64,
    pub dt: f64,
}

impl Default for FputParams {
    fn default() -> Self {
        FputParams {
            n_masses: 32,
            alpha: 0.25,
            dt: 0.05,
        }
    }
}

impl FputParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_masses < 2 {
            return Err(invalid("n_masses", "need at least 2"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        Ok(())
    }
}

/// Sampled fields on a fixed grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldHistory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
}

impl FieldHistory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, field: &[f64]) {
        self.times.push(t);
        self.fields.push(field.to_vec());
    }
}

/// Energy in modes 1..=k_max at each recorded time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeEnergySeries {
    pub times: Vec<f64>,
    /// `energies[i][k - 1]` is the energy of mode k at `times[i]`.
    pub energies: Vec<Vec<f64>>,
    pub k_max: usize,
}

impl ModeEnergySeries {
    /// Fraction of the summed mode energy carried by `mode` (1-based) at each
    /// time; zero where the chain is at rest.
    pub fn share(&self, mode: usize) -> Vec<f64> {
        self.energies
            .iter()
            .map(|e| {
                let total: f64 = e.iter().sum();
                if total > 0.0 {
                    e[mode - 1] / total
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Result of [`fput_simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FputRun {
    pub displacements: FieldHistory,
    pub modes: ModeEnergySeries,
    pub initial_energy: f64,
    /// Largest |E(t) − E(0)| / E(0) seen at any step.
    pub max_energy_drift: f64,
}

fn check_chain(u: &[f64]) -> Result<()> {
    if u.len() < 3 {
        return Err(invalid("u", "chain needs at least one moving mass"));
    }
    let (first, last) = (u[0], u[u.len() - 1]);
    if first != 0.0 || last != 0.0 {
        return Err(LatticeError::BoundaryViolation { first, last });
    }
    Ok(())
}

/// Accelerations of the chain; endpoints stay zero.
pub fn fput_accel(u: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_chain(u)?;
    let mut out = vec![0.0; u.len()];
    fput_accel_into(u, alpha, &mut out);
    Ok(out)
}

/// [`fput_accel`] into a caller-owned buffer of the same length; skips the
/// boundary checks.
pub fn fput_accel_into(u: &[f64], alpha: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    out[0] = 0.0;
    out[n] = 0.0;
    for j in 1..n {
        let right = u[j + 1] - u[j];
        let left = u[j] - u[j - 1];
        out[j] = right - left + alpha * (right * right - left * left);
    }
}

/// Kinetic + harmonic + cubic spring energy, ½Σv² + Σ[½d² + ⅓αd³].
pub fn fput_energy(u: &[f64], v: &[f64], alpha: f64) -> f64 {
    let kinetic: f64 = v.iter().map(|x| 0.5 * x * x).sum();
    let potential: f64 = u
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            0.5 * d * d + alpha / 3.0 * d * d * d
        })
        .sum();
    kinetic + potential
}

/// Angular frequency of sine mode k in a chain of n springs.
pub fn mode_frequency(k: usize, n: usize) -> f64 {
    2.0 * (k as f64 * PI / (2.0 * n as f64)).sin()
}

/// Sine-transform table `table[k-1][j]` = √(2/N)·sin(jkπ/N) for j in 0..=N.
fn mode_table(n: usize) -> Vec<Vec<f64>> {
    let norm = (2.0 / n as f64).sqrt();
    (1..n)
        .map(|k| {
            (0..=n)
                .map(|j| norm * ((j * k) as f64 * PI / n as f64).sin())
                .collect()
        })
        .collect()
}

fn mode_energies_with(table: &[Vec<f64>], u: &[f64], udot: &[f64], n: usize) -> Vec<f64> {
    table
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let (mut a, mut adot) = (0.0, 0.0);
            for j in 1..n {
                a += u[j] * row[j];
                adot += udot[j] * row[j];
            }
            let w = mode_frequency(i + 1, n);
            0.5 * (adot * adot + w * w * a * a)
        })
        .collect()
}

/// Energies E_1..E_{N−1} of the linear chain's sine modes.
pub fn mode_energies(u: &[f64], udot: &[f64], n: usize) -> Result<Vec<f64>> {
    for arr in [u, udot] {
        if arr.len() != n + 1 {
            return Err(LatticeError::LengthMismatch {
                expected: n + 1,
                found: arr.len(),
            });
        }
    }
    check_chain(u)?;
    check_chain(udot)?;
    Ok(mode_energies_with(&mode_table(n), u, udot, n))
}

/// Shape of sine mode k: u_j = amplitude·sin(jkπ/N).
pub fn mode_shape(n: usize, k: usize, amplitude: f64) -> Vec<f64> {
    let mut u: Vec<f64> = (0..=n)
        .map(|j| amplitude * ((j * k) as f64 * PI / n as f64).sin())
        .collect();
    u[0] = 0.0;
    u[n] = 0.0;
    u
}

/// Runs the chain from a single excited mode at rest.
///
/// Displacements and mode energies are recorded at t = 0 and then every
/// `record_dt` (rounded to a whole number of steps).
pub fn fput_simulate(
    params: &FputParams,
    init_mode: usize,
    amplitude: f64,
    t_end: f64,
    record_dt: f64,
) -> Result<FputRun> {
    params.validate()?;
    let n = params.n_masses;
    if init_mode == 0 || init_mode >= n {
        return Err(invalid("init_mode", format!("must lie in 1..={}", n - 1)));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", "must be non-negative"));
    }
    if !(record_dt > 0.0 && record_dt.is_finite()) {
        return Err(invalid("record_dt", "must be positive"));
    }
    let dt = params.dt;
    let n_steps = (t_end / dt).round() as usize;
    let record_every = ((record_dt / dt).round() as usize).max(1);

    let table = mode_table(n);
    let mut u = mode_shape(n, init_mode, amplitude);
    let mut v = vec![0.0; n + 1];
    let mut a = vec![0.0; n + 1];
    let accel = |x: &[f64], out: &mut [f64]| fput_accel_into(x, params.alpha, out);
    accel(&u, &mut a);

    let e0 = fput_energy(&u, &v, params.alpha);
    let mut run = FputRun {
        displacements: FieldHistory::default(),
        modes: ModeEnergySeries {
            k_max: n - 1,
            ..Default::default()
        },
        initial_energy: e0,
        max_energy_drift: 0.0,
    };
    let record = |run: &mut FputRun, t: f64, u: &[f64], v: &[f64]| {
        run.displacements.push(t, u);
        run.modes.times.push(t);
        run.modes.energies.push(mode_energies_with(&table, u, v, n));
    };
    record(&mut run, 0.0, &u, &v);

    for step in 1..=n_steps {
        verlet_in_place(&accel, &mut u, &mut v, &mut a, dt);
        if let Some(index) = first_non_finite(&u).or_else(|| first_non_finite(&v)) {
            return Err(LatticeError::Instability { step, index });
        }
        if e0 > 0.0 {
            let drift = (fput_energy(&u, &v, params.alpha) - e0).abs() / e0;
            run.max_energy_drift = run.max_energy_drift.max(drift);
            if drift > FPUT_DRIFT_LIMIT {
                return Err(LatticeError::EnergyDrift {
                    step,
                    drift,
                    limit: FPUT_DRIFT_LIMIT,
                });
            }
        }
        if step % record_every == 0 {
            record(&mut run, step as f64 * dt, &u, &v);
        }
    }
    Ok(run)
}

/// First time after a drop at which `mode` regains `share` of the energy.
///
/// The drop is the first sample where the mode's share falls below
/// `share / 2`; `None` if there is no drop or no return afterwards.
pub fn recurrence_time(series: &ModeEnergySeries, mode: usize, share: f64) -> Result<Option<f64>> {
    if series.times.is_empty() {
        return Err(LatticeError::EmptySeries);
    }
    if !(share > 0.0 && share < 1.0) {
        return Err(invalid("share", format!("must lie in (0, 1), got {share}")));
    }
    if mode == 0 || mode > series.k_max {
        return Err(invalid("mode", format!("must lie in 1..={}", series.k_max)));
    }
    let shares = series.share(mode);
    let Some(drop) = shares.iter().position(|&s| s < share / 2.0) else {
        return Ok(None);
    };
    Ok(shares[drop..]
        .iter()
        .position(|&s| s >= share)
        .map(|i| series.times[drop + i]))
}

/// Periodic KdV discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdvParams {
    pub delta: f64,
    pub dx: f64,
    pub dt: f64,
    pub length: f64,
}

impl KdvParams {
    /// Grid of `n_points` cells over a periodic domain of the given length.
    /// Rejects time steps beyond the linear (dispersive) stability limit.
    pub fn new(delta: f64, length: f64, n_points: usize, dt: f64) -> Result<Self> {
        if n_points < 5 {
            return Err(invalid("n_points", "need at least 5 grid points"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid("length", "must be positive"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(invalid("delta", "must be non-negative"));
        }
        let params = KdvParams {
            delta,
            dx: length / n_points as f64,
            dt,
            length,
        };
        params.check_stability(0.0)?;
        Ok(params)
    }

    pub fn n_points(&self) -> usize {
        (self.length / self.dx).round() as usize
    }

    /// Largest stable dt for fields bounded by `v_max`, from the von Neumann
    /// analysis of the leapfrog scheme: dt·(2·v_max/dx + 3√3·δ²/dx³) ≤ 1.
    pub fn max_stable_dt(&self, v_max: f64) -> f64 {
        let rate = 2.0 * v_max.abs() / self.dx
            + 3.0 * 3f64.sqrt() * self.delta * self.delta / self.dx.powi(3);
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn check_stability(&self, v_max: f64) -> Result<()> {
        let bound = self.max_stable_dt(v_max);
        if self.dt > bound {
            return Err(LatticeError::Unstable { dt: self.dt, bound });
        }
        Ok(())
    }

    /// Grid coordinates x_i = i·dx.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| i as f64 * self.dx).collect()
    }
}

/// Right-hand-side increment of the scheme scaled by `scale` (1 for the
/// leapfrog's 2Δt span, ½ for the Euler start), added onto `base`.
fn kdv_update(base: &[f64], v: &[f64], params: &KdvParams, scale: f64, out: &mut [f64]) {
    let n = v.len();
    let adv = scale * params.dt / (3.0 * params.dx);
    let disp = scale * params.delta * params.delta * params.dt / params.dx.powi(3);
    let at = |i: isize| v[i.rem_euclid(n as isize) as usize];
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let (m2, m1, c, p1, p2) = (at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
        *o = base[i as usize] - adv * (p1 + c + m1) * (p1 - m1) - disp * (p2 - 2.0 * p1 + 2.0 * m1 - m2);
    }
}

fn check_fields(v: &[f64], prev: &[f64]) -> Result<()> {
    if v.len() < 5 {
        return Err(invalid("v", "need at least 5 grid points"));
    }
    if prev.len() != v.len() {
        return Err(LatticeError::LengthMismatch {
            expected: v.len(),
            found: prev.len(),
        });
    }
    Ok(())
}

/// One leapfrog step: returns v at level n+1 from levels n (`v`) and n−1 (`prev`).
pub fn kdv_step(v: &[f64], prev: &[f64], params: &KdvParams) -> Result<Vec<f64>> {
    check_fields(v, prev)?;
    let mut out = vec![0.0; v.len()];
    kdv_update(prev, v, params, 1.0, &mut out);
    if let Some(index) = first_non_finite(&out) {
        return Err(LatticeError::Instability { step: 1, index });
    }
    Ok(out)
}

/// Forward-Euler start producing the second time level.
pub fn kdv_euler_start(v0: &[f64], params: &KdvParams) -> Result<Vec<f64>> {
    check_fields(v0, v0)?;
    let mut out = vec![0.0; v0.len()];
    kdv_update(v0, v0, params, 0.5, &mut out);
    Ok(out)
}

/// Integrates from `init` to `t_end`, recording every `record_dt`.
pub fn kdv_simulate(
    params: &KdvParams,
    init: &[f64],
    t_end: f64,
    record_dt: f64,
) -> Result<FieldHistory> {
    let n = params.n_points();
    if init.len() != n {
        return Err(LatticeError::LengthMismatch {
            expected: n,
            found: init.len(),
        });
    }
    if let Some(index) = first_non_finite(init) {
        return Err(LatticeError::Instability { step: 0, index });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", "must be non-negative"));
    }
    if !(record_dt > 0.0 && record_dt.is_finite()) {
        return Err(invalid("record_dt", "must be positive"));
    }
    let v_max = init.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    params.check_stability(v_max)?;

    let n_steps = (t_end / params.dt).round() as usize;
    let record_every = ((record_dt / params.dt).round() as usize).max(1);
    let mut history = FieldHistory::default();
    history.push(0.0, init);
    if n_steps == 0 {
        return Ok(history);
    }

    let mut prev = init.to_vec();
    let mut cur = kdv_euler_start(init, params)?;
    let mut next = vec![0.0; n];
    for step in 1..=n_steps {
        if step > 1 {
            kdv_update(&prev, &cur, params, 1.0, &mut next);
            if let Some(index) = first_non_finite(&next) {
                return Err(LatticeError::Instability { step, index });
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        } else if let Some(index) = first_non_finite(&cur) {
            return Err(LatticeError::Instability { step, index });
        }
        if step % record_every == 0 {
            history.push(step as f64 * params.dt, &cur);
        }
    }
    Ok(history)
}

/// Solitary wave 3c·sech²(√c/(2δ)·(x − x0)) of speed c, using the nearest
/// periodic image of x − x0.
pub fn kdv_soliton(params: &KdvParams, speed: f64, center: f64) -> Vec<f64> {
    let width = speed.sqrt() / (2.0 * params.delta);
    params
        .grid()
        .into_iter()
        .map(|x| {
            let mut s = (x - center).rem_euclid(params.length);
            if s > 0.5 * params.length {
                s -= params.length;
            }
            let sech = 1.0 / (width * s).cosh();
            3.0 * speed * sech * sech
        })
        .collect()
}

/// Named initial fields: `cosine` is cos(2πx/L); `two-soliton` places
/// solitons of speed 1 and 0.4 at 0.2L and 0.55L.
pub fn kdv_initial(params: &KdvParams, name: &str) -> Option<Vec<f64>> {
    match name {
        "cosine" => Some(
            params
                .grid()
                .iter()
                .map(|&x| (2.0 * PI * x / params.length).cos())
                .collect(),
        ),
        "two-soliton" => {
            let a = kdv_soliton(params, 1.0, 0.2 * params.length);
            let b = kdv_soliton(params, 0.4, 0.55 * params.length);
            Some(a.iter().zip(&b).map(|(u, v)| u + v).collect())
        }
        _ => None,
    }
}

/// Local maximum of a field, refined to sub-grid accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub position: f64,
    pub height: f64,
}

/// Local maxima above `min_height` on a periodic grid, sorted by position.
///
/// Position and height come from the parabola through the maximum and its two
/// neighbours.
pub fn detect_pulses(field: &[f64], dx: f64, min_height: f64) -> Vec<Pulse> {
    let n = field.len();
    if n < 3 {
        return Vec::new();
    }
    let length = n as f64 * dx;
    let mut pulses: Vec<Pulse> = (0..n)
        .filter_map(|i| {
            let left = field[(i + n - 1) % n];
            let mid = field[i];
            let right = field[(i + 1) % n];
            if !(mid > left && mid >= right) {
                return None;
            }
            let curvature = left - 2.0 * mid + right;
            let offset = if curvature < 0.0 {
                0.5 * (left - right) / curvature
            } else {
                0.0
            };
            let height = mid - 0.25 * (left - right) * offset;
            (height > min_height).then(|| Pulse {
                position: ((i as f64 + offset) * dx).rem_euclid(length),
                height,
            })
        })
        .collect();
    pulses.sort_by(|a, b| a.position.total_cmp(&b.position));
    pulses
}

/// Σv over the grid.
pub fn mass(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// Σv² over the grid.
pub fn l2_energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equilibrium_has_no_force() {
        assert_eq!(fput_accel(&[0.0; 5], 0.25).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn lone_mass_force() {
        let lin = fput_accel(&[0.0, 0.1, 0.0], 0.0).unwrap();
        assert_abs_diff_eq!(lin[1], -0.2, epsilon = 1e-15);
        let nonlin = fput_accel(&[0.0, 0.1, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(nonlin[1], -0.2, epsilon = 1e-15);
        assert_eq!((nonlin[0], nonlin[2]), (0.0, 0.0));
    }

    #[test]
    fn nonzero_ends_rejected() {
        assert!(matches!(
            fput_accel(&[0.1, 0.0, 0.0], 0.0),
            Err(LatticeError::BoundaryViolation { .. })
        ));
    }

    #[test]
    fn pure_mode_is_orthogonal() {
        let n = 16;
        let u = mode_shape(n, 3, 0.5);
        let e = mode_energies(&u, &vec![0.0; n + 1], n).unwrap();
        for (k, ek) in e.iter().enumerate() {
            if k != 2 {
                assert!(*ek < 1e-12 * e[2], "mode {} leaked {ek}", k + 1);
            }
        }
    }

    #[test]
    fn velocity_mode_energy() {
        let n = 16;
        let udot = mode_shape(n, 1, 0.3);
        let e = mode_energies(&vec![0.0; n + 1], &udot, n).unwrap();
        // ȧ_1 = √(2/N)·Σ 0.3·sin²(jπ/N) = 0.3·√(N/2)
        let adot = 0.3 * (n as f64 / 2.0).sqrt();
        assert_abs_diff_eq!(e[0], 0.5 * adot * adot, epsilon = 1e-12);
        assert!(e[1..].iter().all(|&x| x < 1e-20));
    }

    #[test]
    fn zero_chain_zero_energies() {
        let e = mode_energies(&[0.0; 9], &[0.0; 9], 8).unwrap();
        assert_eq!(e, vec![0.0; 7]);
    }

    #[test]
    fn mode_sum_matches_harmonic_energy() {
        let n = 12;
        let u: Vec<f64> = (0..=n)
            .map(|j| if j == 0 || j == n { 0.0 } else { (j as f64 * 0.7).sin() * 0.2 })
            .collect();
        let v: Vec<f64> = (0..=n)
            .map(|j| if j == 0 || j == n { 0.0 } else { (j as f64 * 1.3).cos() * 0.1 })
            .collect();
        let total: f64 = mode_energies(&u, &v, n).unwrap().iter().sum();
        assert_abs_diff_eq!(total, fput_energy(&u, &v, 0.0), epsilon = 1e-10);
    }

    #[test]
    fn mode_energies_length_checked() {
        assert!(matches!(
            mode_energies(&[0.0; 5], &[0.0; 6], 4),
            Err(LatticeError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn zero_amplitude_run_is_silent() {
        let run = fput_simulate(&FputParams::default(), 1, 0.0, 10.0, 1.0).unwrap();
        assert!(run.modes.energies.iter().flatten().all(|&e| e == 0.0));
    }

    #[test]
    fn init_mode_validated() {
        assert!(fput_simulate(&FputParams::default(), 0, 1.0, 1.0, 1.0).is_err());
        assert!(fput_simulate(&FputParams::default(), 32, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn recording_cadence() {
        let run = fput_simulate(&FputParams::default(), 1, 1.0, 10.0, 1.0).unwrap();
        assert_eq!(run.modes.times.len(), 11);
        assert_eq!(run.displacements.fields[0].len(), 33);
        assert_eq!(run.modes.energies[0].len(), 31);
    }

    fn synthetic(shares: &[(f64, f64)]) -> ModeEnergySeries {
        ModeEnergySeries {
            times: shares.iter().map(|s| s.0).collect(),
            energies: shares.iter().map(|s| vec![s.1, 1.0 - s.1]).collect(),
            k_max: 2,
        }
    }

    #[test]
    fn recurrence_scan() {
        let series = synthetic(&[(0.0, 1.0), (1.0, 0.2), (3.0, 0.6), (5.0, 0.97), (6.0, 0.99)]);
        assert_eq!(recurrence_time(&series, 1, 0.95).unwrap(), Some(5.0));
    }

    #[test]
    fn no_drop_no_recurrence() {
        let series = synthetic(&[(0.0, 1.0), (1.0, 0.9), (2.0, 0.8)]);
        assert_eq!(recurrence_time(&series, 1, 0.95).unwrap(), None);
    }

    #[test]
    fn recurrence_errors() {
        assert_eq!(
            recurrence_time(&ModeEnergySeries::default(), 1, 0.9),
            Err(LatticeError::EmptySeries)
        );
        let series = synthetic(&[(0.0, 1.0)]);
        assert!(recurrence_time(&series, 1, 1.5).is_err());
        assert!(recurrence_time(&series, 3, 0.5).is_err());
    }

    fn kdv() -> KdvParams {
        KdvParams::new(0.022, 2.0, 128, 1e-4).unwrap()
    }

    #[test]
    fn constant_field_unchanged() {
        let v = vec![0.7; 128];
        assert_eq!(kdv_step(&v, &v, &kdv()).unwrap(), v);
    }

    #[test]
    fn step_conserves_mass() {
        let p = kdv();
        let v: Vec<f64> = p.grid().iter().map(|x| (PI * x).cos() + 0.3 * (3.0 * PI * x).sin()).collect();
        let prev: Vec<f64> = v.iter().map(|x| x * 0.999).collect();
        let next = kdv_step(&v, &prev, &p).unwrap();
        let norm = l2_energy(&v).sqrt();
        assert!((mass(&next) - mass(&prev)).abs() < 1e-12 * norm);
    }

    #[test]
    fn unstable_dt_rejected() {
        assert!(matches!(
            KdvParams::new(0.022, 2.0, 256, 1e-2),
            Err(LatticeError::Unstable { .. })
        ));
    }

    #[test]
    fn step_rejects_short_or_ragged_arrays() {
        let p = kdv();
        assert!(kdv_step(&[0.0; 4], &[0.0; 4], &p).is_err());
        assert!(kdv_step(&[0.0; 6], &[0.0; 7], &p).is_err());
    }

    #[test]
    fn zero_init_stays_zero() {
        let p = kdv();
        let h = kdv_simulate(&p, &vec![0.0; 128], 0.1, 0.05).unwrap();
        assert_eq!(h.len(), 3);
        assert!(h.fields.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn flat_field_has_no_pulses() {
        assert!(detect_pulses(&[1.0; 50], 0.1, 0.5).is_empty());
    }

    #[test]
    fn gaussian_bump_located() {
        let dx = 0.01;
        let field: Vec<f64> = (0..100)
            .map(|i| {
                let x = i as f64 * dx;
                (-(x - 0.5).powi(2) / (2.0 * 0.05f64.powi(2))).exp()
            })
            .collect();
        let pulses = detect_pulses(&field, dx, 0.5);
        assert_eq!(pulses.len(), 1);
        assert!((pulses[0].position - 0.5).abs() <= dx);
        assert!((pulses[0].height - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn threshold_filters_small_bump() {
        let dx = 0.01;
        let bump = |x: f64, c: f64, h: f64| h * (-(x - c).powi(2) / 0.005).exp();
        let field: Vec<f64> = (0..100)
            .map(|i| {
                let x = i as f64 * dx;
                bump(x, 0.3, 1.0) + bump(x, 0.7, 0.4)
            })
            .collect();
        let pulses = detect_pulses(&field, dx, 0.5);
        assert_eq!(pulses.len(), 1);
        assert!((pulses[0].position - 0.3).abs() <= dx);
    }
}
