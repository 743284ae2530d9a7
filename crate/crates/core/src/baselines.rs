//! Distance-correlation baseline, a seeded permutation-test engine and the
//! exhaustive-permutation oracle for the conditional moments of `√n Q̂ₙ`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::NNGraph;
use crate::model::DistanceMatrix;
use crate::rng::stream_rng;

/// Largest `n` accepted by [`exhaustive_permutation_moments`].
pub const ORACLE_MAX_N: usize = 8;

/// Row means and grand mean of a symmetric distance matrix given entrywise.
fn centering(n: usize, dist: impl Fn(usize, usize) -> f64) -> (Vec<f64>, f64) {
    let rows: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| dist(i, j)).sum::<f64>() / n as f64)
        .collect();
    let grand = rows.iter().sum::<f64>() / n as f64;
    (rows, grand)
}

/// Empirical distance correlation `R̂ₙ` between `X` (given by its distance
/// matrix) and a scalar `y` (absolute differences), from double-centered
/// distance matrices:
///
/// `R̂ₙ² = V̂²(X,Y) / √(V̂²(X) V̂²(Y))`.
///
/// Returns 0 when either marginal distance variance vanishes.
pub fn distance_correlation(dx: &DistanceMatrix, y: &[f64]) -> Result<f64> {
    let n = dx.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length vs covariate sample size",
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let (ra, ga) = centering(n, |i, j| dx.get(i, j));
    let (rb, gb) = centering(n, |i, j| (y[i] - y[j]).abs());
    let (mut sab, mut saa, mut sbb) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let row = dx.row(i);
        let (mut pab, mut paa, mut pbb) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..n {
            let a = row[j] - ra[i] - ra[j] + ga;
            let b = (y[i] - y[j]).abs() - rb[i] - rb[j] + gb;
            pab += a * b;
            paa += a * a;
            pbb += b * b;
        }
        sab += pab;
        saa += paa;
        sbb += pbb;
    }
    let denom = (saa * sbb).sqrt();
    if !(denom > 0.0) {
        return Ok(0.0);
    }
    Ok((sab / denom).max(0.0).sqrt().min(1.0))
}

/// Resampling plan for [`permutation_test`]: `replications` uniform
/// permutations of the response, drawn from seeded per-replicate streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationPlan {
    pub replications: usize,
    pub seed: u64,
}

impl PermutationPlan {
    pub fn new(replications: usize, seed: u64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidParameter(
                "permutation plan needs at least one replication".into(),
            ));
        }
        Ok(Self { replications, seed })
    }
}

/// Permutation p-value `(1 + #{b : stat(dx, y_b) ≥ stat(dx, y)}) / (B + 1)`.
///
/// Replicate `b` shuffles `y` with the stream `(seed, b)`, so the p-value is
/// a function of the plan alone.
pub fn permutation_test<F>(stat: F, dx: &DistanceMatrix, y: &[f64], plan: PermutationPlan) -> f64
where
    F: Fn(&DistanceMatrix, &[f64]) -> f64 + Sync,
{
    let observed = stat(dx, y);
    let exceed: usize = (0..plan.replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(plan.seed, b as u64);
            let mut yb = y.to_vec();
            yb.shuffle(&mut rng);
            usize::from(stat(dx, &yb) >= observed)
        })
        .sum();
    (1 + exceed) as f64 / (plan.replications + 1) as f64
}

/// Exact moments of `√n Q̂ₙ` over all `n!` equally likely rank assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// `E[Q̂ₙ]` exactly.
    pub exact_mean_q: BigRational,
    /// `Var(√n Q̂ₙ)` exactly.
    pub exact_variance: BigRational,
}

/// Enumerates every permutation of the ranks `1..n` (Heap's algorithm) and
/// accumulates `Σ S` and `Σ S²` for the integer `S = n² Q̂ₙ`. Both sums are
/// exact integers, so the moments are exact rationals for every `n` allowed.
pub fn exhaustive_permutation_moments(g: &NNGraph) -> Result<OracleMoments> {
    let n = g.n();
    if n > ORACLE_MAX_N {
        return Err(Error::TooLargeForOracle {
            n,
            max: ORACLE_MAX_N,
        });
    }
    let nn = g.neighbors();
    let score = |r: &[u64]| -> u64 { (0..n).map(|i| r[i].min(r[nn[i]])).sum() };

    let mut ranks: Vec<u64> = (1..=n as u64).collect();
    let mut counters = vec![0usize; n];
    let mut count: u64 = 1;
    let s = score(&ranks);
    let (mut sum, mut sum_sq) = (s, s * s);
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                ranks.swap(0, i);
            } else {
                ranks.swap(counters[i], i);
            }
            let s = score(&ranks);
            sum += s;
            sum_sq += s * s;
            count += 1;
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }

    let big = |v: u64| BigInt::from(v);
    let mean_s = BigRational::new(big(sum), big(count));
    let mean_s2 = BigRational::new(big(sum_sq), big(count));
    let var_s = mean_s2 - &mean_s * &mean_s;
    let n2 = big((n * n) as u64);
    let n3 = big((n * n * n) as u64);
    let exact_mean_q = mean_s / BigRational::from_integer(n2);
    let exact_variance = var_s / BigRational::from_integer(n3);
    let to_f64 = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
    Ok(OracleMoments {
        n,
        mean: (n as f64).sqrt() * to_f64(&exact_mean_q),
        variance: to_f64(&exact_variance),
        exact_mean_q,
        exact_variance,
    })
}
