//! Discrete-time dynamics: the logistic map x ↦ rx(1 − x) and the Hénon map
//! (x, y) ↦ (y + 1 − ax², bx).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no sign change bracketing superstable parameter R_{m}")]
    BracketFailure { m: usize },
    #[error("double precision exhausted locating R_{m}")]
    PrecisionExhausted { m: usize },
    #[error("orbit escaped (|x| > {threshold:e}) at iteration {iteration}")]
    Escape { iteration: usize, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, MapError>;

fn invalid(name: &'static str, reason: impl Into<String>) -> MapError {
    MapError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Control parameter of the logistic map, 0 < r ≤ 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    r: f64,
}

impl LogisticParams {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 4.0) {
            return Err(invalid("r", format!("must lie in (0, 4], got {r}")));
        }
        Ok(LogisticParams { r })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.r * x * (1.0 - x)
    }
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in [0, 1], got {x}")))
    }
}

/// Discards `transient` iterates and returns the next `n`.
pub fn logistic_orbit(params: &LogisticParams, x0: f64, transient: usize, n: usize) -> Result<Vec<f64>> {
    check_unit("x0", x0)?;
    let mut x = x0;
    for _ in 0..transient {
        x = params.apply(x);
    }
    Ok((0..n)
        .map(|_| {
            x = params.apply(x);
            x
        })
        .collect())
}

/// Post-transient iterates for a range of r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCloud {
    pub points: Vec<(f64, f64)>,
    pub r_min: f64,
    pub r_max: f64,
    pub samples_per_r: usize,
    pub transient: usize,
}

/// Evenly spaced r columns over [r_min, r_max], `samples` iterates each.
///
/// Columns are independent and computed under `exec`; the output is ordered
/// by column then iterate regardless of policy.
pub fn bifurcation_diagram(
    r_min: f64,
    r_max: f64,
    n_r: usize,
    transient: usize,
    samples: usize,
    x0: f64,
    exec: Execution,
) -> Result<BifurcationCloud> {
    if !(r_min > 0.0 && r_min < r_max && r_max <= 4.0) {
        return Err(invalid(
            "r_min",
            format!("need 0 < r_min < r_max <= 4, got [{r_min}, {r_max}]"),
        ));
    }
    if n_r < 2 {
        return Err(invalid("n_r", "need at least 2 columns"));
    }
    check_unit("x0", x0)?;
    let columns = par::map_indexed(exec, n_r, |i| {
        let r = if i + 1 == n_r {
            r_max
        } else {
            r_min + (r_max - r_min) * i as f64 / (n_r - 1) as f64
        };
        let params = LogisticParams { r };
        let orbit = logistic_orbit(&params, x0, transient, samples).expect("x0 validated");
        orbit.into_iter().map(move |x| (r, x)).collect::<Vec<_>>()
    });
    Ok(BifurcationCloud {
        points: columns.into_iter().flatten().collect(),
        r_min,
        r_max,
        samples_per_r: samples,
        transient,
    })
}

/// Upper guard for superstable searches, just above the period-doubling
/// accumulation point r∞ ≈ 3.5699456.
pub const ACCUMULATION_GUARD: f64 = 3.5699457;

/// f_r^(2^(m−1))(½) − ½; zero at the superstable parameter R_m.
pub fn critical_return(r: f64, m: usize) -> f64 {
    let mut x = 0.5;
    for _ in 0..(1usize << (m - 1)) {
        x = r * x * (1.0 - x);
    }
    x - 0.5
}

/// Superstable parameters R_1 < … < R_count of the period-doubling cascade.
///
/// R_1 = 2 exactly. Each later R_m is found by bisection between
/// R_{m−1} + gap/20 and min(R_{m−1} + gap, guard), where gap = R_{m−1} − R_{m−2},
/// until the bracket collapses to adjacent floating-point numbers.
pub fn superstable_params(count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(invalid("count", "need at least 2"));
    }
    let mut roots: Vec<f64> = vec![2.0];
    for m in 2..=count {
        let prev = roots[m - 2];
        let gap = if m == 2 { 1.5 } else { prev - roots[m - 3] };
        let mut lo = prev + 0.05 * gap;
        let mut hi = (prev + gap).min(ACCUMULATION_GUARD);
        if !(lo < hi) {
            return Err(MapError::PrecisionExhausted { m });
        }
        let mut g_lo = critical_return(lo, m);
        let g_hi = critical_return(hi, m);
        if g_lo == 0.0 {
            roots.push(lo);
            continue;
        }
        if g_lo.signum() == g_hi.signum() {
            return Err(MapError::BracketFailure { m });
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g_mid = critical_return(mid, m);
            if g_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if g_mid.signum() == g_lo.signum() {
                lo = mid;
                g_lo = g_mid;
            } else {
                hi = mid;
            }
        }
        let root = if critical_return(lo, m).abs() <= critical_return(hi, m).abs() {
            lo
        } else {
            hi
        };
        // Adjacent roots closer than a few ulps cannot give meaningful ratios.
        if root - prev < 1e-12 || critical_return(root, m).abs() > 1e-9 {
            return Err(MapError::PrecisionExhausted { m });
        }
        roots.push(root);
    }
    Ok(roots)
}

/// Ratios δ_m = (R_m − R_{m−1}) / (R_{m+1} − R_m) for m = 2..count−1.
pub fn feigenbaum_delta(count: usize) -> Result<Vec<f64>> {
    if count < 4 {
        return Err(invalid("count", "need at least 4"));
    }
    Ok(delta_ratios(&superstable_params(count)?))
}

/// The ratios of successive gaps of an increasing sequence.
pub fn delta_ratios(roots: &[f64]) -> Vec<f64> {
    roots
        .windows(3)
        .map(|w| (w[1] - w[0]) / (w[2] - w[1]))
        .collect()
}

/// Hénon map parameters; defaults a = 1.4, b = 0.3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HenonParams {
    pub a: f64,
    pub b: f64,
}

impl Default for HenonParams {
    fn default() -> Self {
        HenonParams { a: 1.4, b: 0.3 }
    }
}

/// Orbits with |x| beyond this are reported as escaped.
pub const HENON_ESCAPE: f64 = 1e6;

impl HenonParams {
    #[inline]
    pub fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (y + 1.0 - self.a * x * x, self.b * x)
    }

    /// Inverse map; requires b ≠ 0.
    #[inline]
    pub fn invert(&self, (x1, y1): (f64, f64)) -> (f64, f64) {
        let x = y1 / self.b;
        (x, x1 - 1.0 + self.a * x * x)
    }
}

/// Discards `transient` iterates and returns the next `n` points.
pub fn henon_orbit(
    params: &HenonParams,
    x0: f64,
    y0: f64,
    transient: usize,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(params.a.is_finite() && params.b.is_finite() && x0.is_finite() && y0.is_finite()) {
        return Err(invalid("a", "parameters and start must be finite"));
    }
    let mut p = (x0, y0);
    let mut out = Vec::with_capacity(n);
    for iteration in 1..=transient + n {
        p = params.apply(p);
        if !(p.0.abs() <= HENON_ESCAPE) {
            return Err(MapError::Escape {
                iteration,
                threshold: HENON_ESCAPE,
            });
        }
        if iteration > transient {
            out.push(p);
        }
    }
    Ok(out)
}

/// Real fixed points, the roots of ax² + (1 − b)x − 1 = 0 with y = bx,
/// sorted by x.
pub fn henon_fixed_points(params: &HenonParams) -> Result<Vec<(f64, f64)>> {
    let HenonParams { a, b } = *params;
    if a == 0.0 {
        return Err(invalid("a", "a = 0 makes the fixed-point equation degenerate"));
    }
    let p = 1.0 - b;
    let disc = p * p + 4.0 * a;
    if disc < 0.0 {
        return Ok(Vec::new());
    }
    let sq = disc.sqrt();
    // Numerically stable quadratic roots.
    let q = -0.5 * (p + p.signum_or_one() * sq);
    let mut xs = vec![q / a, -1.0 / q];
    if disc == 0.0 {
        xs.truncate(1);
    }
    xs.sort_by(f64::total_cmp);
    Ok(xs.into_iter().map(|x| (x, b * x)).collect())
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn logistic_fixed_point_regime() {
        let orbit = logistic_orbit(&LogisticParams::new(2.0).unwrap(), 0.1, 1000, 1).unwrap();
        assert_abs_diff_eq!(orbit[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_is_fixed_at_r4() {
        let orbit = logistic_orbit(&LogisticParams::new(4.0).unwrap(), 0.0, 10, 5).unwrap();
        assert_eq!(orbit, vec![0.0; 5]);
    }

    #[test]
    fn period_two_at_3_2() {
        let orbit = logistic_orbit(&LogisticParams::new(3.2).unwrap(), 0.5, 1000, 4).unwrap();
        // independent closed form: x± = (r + 1 ± √((r−3)(r+1))) / 2r
        let r: f64 = 3.2;
        let s = ((r - 3.0) * (r + 1.0)).sqrt();
        let (lo, hi) = ((r + 1.0 - s) / (2.0 * r), (r + 1.0 + s) / (2.0 * r));
        assert_abs_diff_eq!(lo, 0.5130, epsilon = 1e-4);
        assert_abs_diff_eq!(hi, 0.7995, epsilon = 1e-4);
        let (a, b) = if orbit[0] < orbit[1] { (lo, hi) } else { (hi, lo) };
        for (i, x) in orbit.iter().enumerate() {
            assert_abs_diff_eq!(*x, if i % 2 == 0 { a } else { b }, epsilon = 1e-10);
        }
    }

    #[test]
    fn logistic_param_bounds() {
        assert!(LogisticParams::new(0.0).is_err());
        assert!(LogisticParams::new(4.01).is_err());
        assert!(LogisticParams::new(4.0).is_ok());
        assert!(logistic_orbit(&LogisticParams::new(3.0).unwrap(), 1.5, 0, 1).is_err());
    }

    #[test]
    fn two_column_cloud() {
        let cloud = bifurcation_diagram(2.5, 3.5, 2, 100, 7, 0.5, Execution::Sequential).unwrap();
        assert_eq!(cloud.points.len(), 14);
        assert_eq!(cloud.points[0].0, 2.5);
        assert_eq!(cloud.points[13].0, 3.5);
    }

    #[test]
    fn cloud_window_validated() {
        assert!(bifurcation_diagram(3.0, 2.0, 10, 0, 1, 0.5, Execution::Sequential).is_err());
        assert!(bifurcation_diagram(3.0, 4.5, 10, 0, 1, 0.5, Execution::Sequential).is_err());
        assert!(bifurcation_diagram(2.0, 3.0, 1, 0, 1, 0.5, Execution::Sequential).is_err());
    }

    #[test]
    fn first_superstable_parameters() {
        let r = superstable_params(3).unwrap();
        assert_eq!(r[0], 2.0);
        assert_abs_diff_eq!(r[1], 1.0 + 5f64.sqrt(), epsilon = 1e-12);
        // 60-digit bisection oracle
        assert_abs_diff_eq!(r[2], 3.498_561_699_327_701_5, epsilon = 1e-12);
    }

    #[test]
    fn r2_is_root_of_cubic() {
        let r = superstable_params(2).unwrap()[1];
        assert!((r * r * r - 4.0 * r * r + 8.0).abs() < 1e-12);
    }

    #[test]
    fn delta_counting_and_first_ratio() {
        let d = feigenbaum_delta(4).unwrap();
        assert_eq!(d.len(), 2);
        assert_abs_diff_eq!(d[0], 4.708_943_013_540_5, epsilon = 1e-9);
        assert!(feigenbaum_delta(3).is_err());
    }

    #[test]
    fn precision_is_exhausted_eventually() {
        let err = superstable_params(40).unwrap_err();
        assert!(matches!(
            err,
            MapError::PrecisionExhausted { .. } | MapError::BracketFailure { .. }
        ));
    }

    #[test]
    fn degenerate_henon_map() {
        // (0.3, −2) ↦ (−1, 0) ↦ (1, 0), then fixed.
        let orbit = henon_orbit(&HenonParams { a: 0.0, b: 0.0 }, 0.3, -2.0, 1, 5).unwrap();
        assert!(orbit.iter().all(|&p| p == (1.0, 0.0)));
    }

    #[test]
    fn henon_escape_reported() {
        let err = henon_orbit(&HenonParams::default(), 10.0, 10.0, 0, 100).unwrap_err();
        assert!(matches!(err, MapError::Escape { .. }));
    }

    #[test]
    fn henon_default_fixed_points() {
        let pts = henon_fixed_points(&HenonParams::default()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_abs_diff_eq!(pts[0].0, -1.1313545, epsilon = 1e-7);
        assert_abs_diff_eq!(pts[0].1, -0.3394064, epsilon = 1e-7);
        assert_abs_diff_eq!(pts[1].0, 0.6313545, epsilon = 1e-7);
        assert_abs_diff_eq!(pts[1].1, 0.1894064, epsilon = 1e-7);
        // textbook quadratic formula
        let (a, b) = (1.4f64, 0.3f64);
        let disc = ((1.0 - b).powi(2) + 4.0 * a).sqrt();
        assert_abs_diff_eq!(pts[0].0, (-(1.0 - b) - disc) / (2.0 * a), epsilon = 1e-10);
        assert_abs_diff_eq!(pts[1].0, (-(1.0 - b) + disc) / (2.0 * a), epsilon = 1e-10);
        for p in pts {
            let q = HenonParams::default().apply(p);
            assert_abs_diff_eq!(q.0, p.0, epsilon = 1e-12);
            assert_abs_diff_eq!(q.1, p.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_henon_fixed_points() {
        let pts = henon_fixed_points(&HenonParams { a: 1.0, b: 1.0 }).unwrap();
        assert_eq!(pts, vec![(-1.0, -1.0), (1.0, 1.0)]);
    }

    #[test]
    fn zero_a_rejected() {
        assert!(henon_fixed_points(&HenonParams { a: 0.0, b: 0.3 }).is_err());
    }
}
