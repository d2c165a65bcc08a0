use lab_core::arithmetic::{
    count_points_mod_p, primes_upto, product_series, rank_slope, CurveD, PointConvention,
};
use lab_core::Execution;
use proptest::prelude::*;

fn brute_force(d: u64, p: u64) -> u64 {
    let rhs = |x: u64| (x * x % p * x + p * p - d % p * x % p) % p;
    let mut n = 0;
    for x in 0..p {
        let f = rhs(x);
        for y in 0..p {
            if y * y % p == f {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn counts_match_exhaustive_search_below_200() {
    for d in [1, 5, 34] {
        let curve = CurveD::new(d).unwrap();
        for p in primes_upto(199) {
            if curve.is_bad_prime(p) {
                assert!(count_points_mod_p(&curve, p).is_err());
                continue;
            }
            assert_eq!(count_points_mod_p(&curve, p).unwrap(), brute_force(d, p), "d={d}, p={p}");
        }
    }
}

#[test]
fn counts_respect_hasse_bound() {
    for d in [1, 5, 34, 1254, 29274] {
        let curve = CurveD::new(d).unwrap();
        for p in primes_upto(5000).into_iter().filter(|&p| !curve.is_bad_prime(p)) {
            let n = count_points_mod_p(&curve, p).unwrap() as f64;
            assert!((n - p as f64).abs() <= 2.0 * (p as f64).sqrt(), "d={d}, p={p}");
        }
    }
}

#[test]
fn series_is_policy_independent() {
    let curve = CurveD::new(34).unwrap();
    let a = product_series(&curve, 3000, PointConvention::Projective, Execution::Sequential).unwrap();
    let b = product_series(&curve, 3000, PointConvention::Projective, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.skipped_bad_primes, vec![2, 17]);
    assert_eq!(a.len(), primes_upto(3000).len() - 2);
}

#[test]
fn slope_fit_runs_on_real_series() {
    let curve = CurveD::new(1).unwrap();
    let s = product_series(&curve, 5000, PointConvention::Projective, Execution::Parallel).unwrap();
    let fit = rank_slope(&s, 100).unwrap();
    assert!(fit.slope.is_finite() && fit.residual.is_finite());
    assert_eq!(fit.n_points, s.primes.iter().filter(|&&p| p >= 100).count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn count_parity_matches_roots_of_rhs(d in 1u64..500, idx in 1usize..150) {
        let primes = primes_upto(1000);
        let p = primes[idx];
        let curve = CurveD::new(d).unwrap();
        prop_assume!(!curve.is_bad_prime(p));
        let n = count_points_mod_p(&curve, p).unwrap();
        let roots = (0..p).filter(|&x| (x * x % p * x + p * p - d % p * x % p) % p == 0).count() as u64;
        prop_assert_eq!(n % 2, roots % 2);
    }

    #[test]
    fn extending_the_range_keeps_the_prefix(d in 1u64..100, x in 10u64..800, extra in 1u64..800) {
        let curve = CurveD::new(d).unwrap();
        let short = product_series(&curve, x, PointConvention::Affine, Execution::Sequential).unwrap();
        let long = product_series(&curve, x + extra, PointConvention::Affine, Execution::Sequential).unwrap();
        prop_assert_eq!(&long.primes[..short.len()], &short.primes[..]);
        prop_assert_eq!(&long.log_products[..short.len()], &short.log_products[..]);
    }
}
