//! Point counts on y² = x³ − dx over prime fields and the cumulative product
//! ∏_{p≤X} N_p/p whose log–log slope estimates the rank.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArithmeticError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("{p} is not prime")]
    NotPrime { p: u64 },
    #[error("bad prime {p}: divides 2d = {two_d}")]
    BadPrime { p: u64, two_d: u64 },
    #[error("count {count} at p = {p} violates |N_p - p| <= 2 sqrt(p)")]
    HasseViolation { p: u64, count: u64 },
    #[error("need at least {needed} points for the fit, have {found}")]
    InsufficientPoints { needed: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, ArithmeticError>;

/// Above this bound the quadratic character is evaluated by Euler's
/// criterion instead of a residue table.
pub const TABLE_LIMIT: u64 = 1_000_000;

/// Minimum number of primes in a slope fit.
pub const MIN_FIT_POINTS: usize = 10;

/// Primes ≤ `x`, ascending.
pub fn primes_upto(x: u64) -> Vec<u64> {
    if x < 2 {
        return Vec::new();
    }
    let n = x as usize;
    let mut composite = vec![false; n + 1];
    let mut i = 2;
    while i * i <= n {
        if !composite[i] {
            for j in (i * i..=n).step_by(i) {
                composite[j] = true;
            }
        }
        i += 1;
    }
    (2..=n).filter(|&k| !composite[k]).map(|k| k as u64).collect()
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut q = 3;
    while q * q <= p {
        if p % q == 0 {
            return false;
        }
        q += 2;
    }
    true
}

/// The curve y² = x³ − dx.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveD {
    d: u64,
}

impl CurveD {
    pub fn new(d: u64) -> Result<Self> {
        if d == 0 {
            return Err(ArithmeticError::InvalidParameter {
                name: "d",
                reason: "must be at least 1".into(),
            });
        }
        Ok(CurveD { d })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn is_bad_prime(&self, p: u64) -> bool {
        (2 * self.d) % p == 0
    }
}

fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    let m128 = m as u128;
    let mut acc: u128 = 1;
    let mut b = (base % m) as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    acc as u64
}

#[inline]
fn rhs(x: u64, d_mod: u64, p: u64) -> u64 {
    if p < 1 << 32 {
        let x2 = x * x % p;
        return x * ((x2 + p - d_mod) % p) % p;
    }
    let x = x as u128;
    let p128 = p as u128;
    let x2 = x * x % p128;
    (x * ((x2 + p128 - d_mod as u128) % p128) % p128) as u64
}

/// Affine solution count of y² ≡ x³ − dx (mod p).
///
/// Uses a table of squares mod p up to [`TABLE_LIMIT`], Euler's criterion
/// above it.
pub fn count_points_mod_p(curve: &CurveD, p: u64) -> Result<u64> {
    if !is_prime(p) {
        return Err(ArithmeticError::NotPrime { p });
    }
    if curve.is_bad_prime(p) {
        return Err(ArithmeticError::BadPrime { p, two_d: 2 * curve.d });
    }
    let d_mod = curve.d % p;
    let mut count = 0u64;
    if p <= TABLE_LIMIT {
        let n = p as usize;
        let add = |a: u64, b: u64| if a + b >= p { a + b - p } else { a + b };
        let mut square = vec![false; n];
        let (mut sq, mut step) = (0u64, 1u64);
        for _ in 0..=p / 2 {
            square[sq as usize] = true;
            sq = add(sq, step);
            step = add(step, 2 % p);
        }
        // f(x) = x³ − dx by finite differences: Δf = 3x² + 3x + 1 − d, Δ²f = 6x + 6.
        let (mut f, mut d1, mut d2) = (0u64, add(1 % p, p - d_mod), 6 % p);
        for _ in 0..p {
            count += if f == 0 {
                1
            } else if square[f as usize] {
                2
            } else {
                0
            };
            f = add(f, d1);
            d1 = add(d1, d2);
            d2 = add(d2, 6 % p);
        }
    } else {
        let half = (p - 1) / 2;
        for x in 0..p {
            let f = rhs(x, d_mod, p);
            count += if f == 0 {
                1
            } else if pow_mod(f, half, p) == 1 {
                2
            } else {
                0
            };
        }
    }
    Ok(count)
}

/// Whether N_p includes the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointConvention {
    #[default]
    Affine,
    Projective,
}

impl PointConvention {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "affine" => Some(PointConvention::Affine),
            "projective" => Some(PointConvention::Projective),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PointConvention::Affine => "affine",
            PointConvention::Projective => "projective",
        }
    }

    fn adjust(&self, affine: u64) -> u64 {
        match self {
            PointConvention::Affine => affine,
            PointConvention::Projective => affine + 1,
        }
    }
}

/// Running ln ∏_{q≤p} N_q/q over good primes q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSeries {
    pub d: u64,
    pub x_max: u64,
    pub convention: PointConvention,
    pub primes: Vec<u64>,
    pub counts: Vec<u64>,
    pub log_products: Vec<f64>,
    pub skipped_bad_primes: Vec<u64>,
}

impl ProductSeries {
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }
}

/// Counts points at every good prime ≤ `x_max` (in parallel under
/// [`Execution::Parallel`]) and accumulates the log product in prime order.
pub fn product_series(curve: &CurveD, x_max: u64, convention: PointConvention, exec: Execution) -> Result<ProductSeries> {
    if x_max < 3 {
        return Err(ArithmeticError::InvalidParameter {
            name: "x_max",
            reason: "must be at least 3".into(),
        });
    }
    let (bad, good): (Vec<u64>, Vec<u64>) = primes_upto(x_max).into_iter().partition(|&p| curve.is_bad_prime(p));
    let affine = par::map_slice(exec, &good, |&p| count_points_mod_p(curve, p));

    let mut counts = Vec::with_capacity(good.len());
    let mut log_products = Vec::with_capacity(good.len());
    let mut acc = 0.0;
    for (&p, n) in good.iter().zip(affine) {
        let n = n?;
        if (n as f64 - p as f64).abs() > 2.0 * (p as f64).sqrt() || n == 0 {
            return Err(ArithmeticError::HasseViolation { p, count: n });
        }
        let n = convention.adjust(n);
        acc += (n as f64 / p as f64).ln();
        counts.push(n);
        log_products.push(acc);
    }
    Ok(ProductSeries {
        d: curve.d,
        x_max,
        convention,
        primes: good,
        counts,
        log_products,
        skipped_bad_primes: bad,
    })
}

/// Least-squares line through (ln ln p, ln π(p)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub p_min_used: u64,
    pub n_points: usize,
}

/// Fits ln π against ln ln p over primes ≥ `p_min`.
pub fn rank_slope(series: &ProductSeries, p_min: u64) -> Result<SlopeFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .primes
        .iter()
        .zip(&series.log_products)
        .filter(|(&p, _)| p >= p_min.max(2))
        .map(|(&p, &y)| ((p as f64).ln().ln(), y))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(ArithmeticError::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        p_min_used: p_min,
        n_points: xs.len(),
    })
}
