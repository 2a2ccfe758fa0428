//! Self-checks of the closed forms against independent brute-force computations:
//! grid scans for the curve operators and exhaustive enumeration for shared pools.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curves::grid::GridOracle;
use crate::curves::{RateLatency, TokenBucket};
use crate::cyclic::{shared_pool_failure, ArrivalModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    /// Largest relative error seen, or the number of mismatches for exact checks.
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn rel_err(closed: f64, scanned: f64) -> f64 {
    let diff = (closed - scanned).abs();
    if scanned.abs() > 1e-12 {
        diff / scanned.abs()
    } else {
        diff
    }
}

/// A random stable pair: arrival rate strictly below the service rate.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (TokenBucket<f64>, RateLatency<f64>) {
    let service_rate = rng.random_range(1.0..20_000.0);
    let latency = rng.random_range(0.0..10.0);
    let rate = service_rate * rng.random_range(0.0..0.95);
    let burst = rng.random_range(0.0..5_000.0);
    (
        TokenBucket::new(rate, burst).expect("valid token bucket"),
        RateLatency::new(service_rate, latency).expect("valid rate-latency"),
    )
}

/// Compares delay, backlog, output, concatenation and leftover closed forms
/// with grid scans on `pairs` random stable pairs.
pub fn dnc_checks(seed: u64, pairs: usize) -> Vec<Check> {
    let grid = GridOracle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0_f64; 5];
    for _ in 0..pairs {
        let (a, s) = random_pair(&mut rng);
        let (ac, sc) = (a.curve(), s.curve());
        let probes: Vec<f64> = (0..8).map(|i| (s.latency + a.burst / s.rate) * i as f64 / 3.0).collect();

        let d = a.delay_bound(&s).expect("stable");
        let d_scan = grid.horizontal_deviation(&ac, &sc).expect("stable");
        worst[0] = worst[0].max(rel_err(d, d_scan));

        let b = a.backlog_bound(&s).expect("stable");
        worst[1] = worst[1].max(rel_err(b, grid.vertical_deviation(&ac, &sc)));

        let out = a.output_bound(&s).expect("stable").curve();
        for &t in &probes {
            worst[2] = worst[2].max(rel_err(out.value_clamped(&t), grid.deconvolution_at(&ac, &sc, t)));
        }

        let (_, other) = random_pair(&mut rng);
        let chained = s.concatenate(&other).curve();
        let oc = other.curve();
        for &t in &probes {
            worst[3] = worst[3].max(rel_err(chained.value_clamped(&t), grid.convolution_at(&sc, &oc, t)));
        }

        let left = s.leftover(&a).expect("stable").curve();
        for &t in &probes {
            worst[4] = worst[4].max(rel_err(left.value_clamped(&t), grid.leftover_at(&sc, &ac, t)));
        }
    }
    let names = ["delay bound", "backlog bound", "output bound", "concatenation", "leftover service"];
    names
        .into_iter()
        .zip(worst)
        .map(|(name, w)| Check { name, cases: pairs, worst: w, tolerance: 1e-9 })
        .collect()
}

/// `Pr(Σ n_k size_k > pool)` by walking every joint outcome of the count pmfs.
pub fn enumerate_pool_failure(apps: &[ArrivalModel<BigRational>], pool: u64) -> BigRational {
    let pmfs: Vec<Vec<BigRational>> = apps.iter().map(|a| a.count_pmf()).collect();
    let mut idx = vec![0_usize; apps.len()];
    let mut failure = BigRational::zero();
    loop {
        let bytes: u64 = idx.iter().zip(apps).map(|(&n, a)| n as u64 * a.frame_size as u64).sum();
        if bytes > pool {
            let p = idx.iter().zip(&pmfs).fold(BigRational::one(), |acc, (&n, pmf)| acc * &pmf[n]);
            failure += p;
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return failure;
            }
            idx[k] += 1;
            if idx[k] < pmfs[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn random_pmf(rng: &mut ChaCha8Rng, n_max: usize) -> Vec<BigRational> {
    let weights: Vec<i64> = (0..=n_max).map(|_| rng.random_range(0..20)).collect();
    let total: i64 = weights.iter().sum::<i64>().max(1);
    let mut pmf: Vec<BigRational> =
        weights.iter().map(|&w| BigRational::new(BigInt::from(w), BigInt::from(total))).collect();
    if weights.iter().all(|&w| w == 0) {
        pmf[0] = BigRational::one();
    }
    pmf
}

/// Exact comparison of the shared-pool convolution with enumeration for every
/// `K <= 4` and `n_max <= 5`, several random instances each.
pub fn enumeration_check(seed: u64, per_shape: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = 0;
    let mut mismatches = 0;
    for k in 1..=4 {
        for n_max in 0..=5 {
            for _ in 0..per_shape {
                let apps: Vec<ArrivalModel<BigRational>> = (0..k)
                    .map(|_| {
                        let size = 8 * rng.random_range(1..=4);
                        ArrivalModel::pmf(random_pmf(&mut rng, n_max), size).expect("valid pmf")
                    })
                    .collect();
                let most: u64 = apps.iter().map(|a| n_max as u64 * a.frame_size as u64).sum();
                let pool = rng.random_range(0..=most + 8);
                cases += 1;
                if shared_pool_failure(&apps, pool) != enumerate_pool_failure(&apps, pool) {
                    mismatches += 1;
                }
            }
        }
    }
    Check { name: "shared pool enumeration", cases, worst: mismatches as f64, tolerance: 0.0 }
}

/// The full suite with its default sizes.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut checks = dnc_checks(seed, 100);
    checks.push(enumeration_check(seed, 5));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_handles_known_case() {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let app = ArrivalModel::pmf(vec![half.clone(), half.clone()], 10).unwrap();
        let apps = vec![app.clone(), app];
        assert_eq!(enumerate_pool_failure(&apps, 10), BigRational::new(BigInt::from(1), BigInt::from(4)));
        assert_eq!(enumerate_pool_failure(&apps, 20), BigRational::zero());
    }

    #[test]
    fn suite_passes() {
        for c in run_all(11) {
            assert!(c.passed(), "{c:?}");
        }
    }
}
