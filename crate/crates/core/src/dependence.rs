//! The dependence coefficient `T̂ₙ = 6 Q̂ₙ − 2` and the self-normalized test
//! statistic `Iₙ = √(n / (36 Wₙ)) · T̂ₙ`.
//!
//! With ranks `r[i] = #{j : Yⱼ ≤ Yᵢ}` and nearest neighbors `N(i)`,
//!
//! ```text
//! Q̂ₙ = (1/n²) Σᵢ min(r[i], r[N(i)])
//! ```
//!
//! Under independence the ranks are a uniform random permutation given the
//! graph, which makes the conditional mean `(n+1)/(3n)` and the conditional
//! variance `Wₙ` of `√n Q̂ₙ` exact functions of `n`, `Σ L²ᵢ` and `fₙ`.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{degree_stats, nearest_neighbor_graph, DegreeStats, NNGraph};
use crate::model::{distance_matrix, DistanceMatrix, FunctionalSample};
use crate::stats::normal_sf;

/// Smallest sample accepted by [`independence_test`].
pub const MIN_TEST_N: usize = 4;

/// Lower bound on `W̃ₙ`; the derivation actually yields `1/10`.
pub const W_TILDE_LOWER: f64 = 4.0 / 45.0;

/// Ranks under the empirical distribution function: `r[i] = n·Fₙ(Yᵢ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector {
    pub ranks: Vec<usize>,
    /// True if any two responses coincide.
    pub tie_flag: bool,
}

impl RankVector {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// `r[i] = #{j : Yⱼ ≤ Yᵢ}`. Tied values all receive the maximal rank of
/// their group, which is `n·Fₙ` taken literally.
pub fn rank_vector(y: &[f64]) -> Result<RankVector> {
    let n = y.len();
    if n == 0 {
        return Err(Error::SampleTooSmall { n, min: 1 });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row: i, col: 0 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0usize; n];
    let mut tie_flag = false;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && y[order[end]] == y[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            tie_flag = true;
        }
        for &i in &order[start..end] {
            ranks[i] = end;
        }
        start = end;
    }
    Ok(RankVector { ranks, tie_flag })
}

/// Integer numerator `n² Q̂ₙ = Σᵢ min(r[i], r[N(i)])`.
pub fn q_hat_numerator(r: &RankVector, g: &NNGraph) -> Result<u64> {
    if r.len() != g.n() {
        return Err(Error::DimensionMismatch {
            what: "response length vs covariate sample size",
            expected: g.n(),
            found: r.len(),
        });
    }
    Ok(g.neighbors()
        .iter()
        .enumerate()
        .map(|(i, &j)| r.ranks[i].min(r.ranks[j]) as u64)
        .sum())
}

pub fn q_hat(r: &RankVector, g: &NNGraph) -> Result<f64> {
    let n = g.n() as f64;
    Ok(q_hat_numerator(r, g)? as f64 / (n * n))
}

pub fn t_hat(q: f64) -> f64 {
    6.0 * q - 2.0
}

/// `W̃ₙ = (1/n)(W_{n,1}/45 + W_{n,2}/18)`: conditional variance of the
/// oracle statistic built from `F` instead of `Fₙ`.
pub fn w_tilde(s: &DegreeStats, n: usize) -> f64 {
    let w = (s.w1() as f64 / 45.0 + s.w2() as f64 / 18.0) / n as f64;
    debug_assert!(w > W_TILDE_LOWER, "w_tilde = {w} violates the 4/45 bound");
    if w < 0.1 {
        log::warn!("w_tilde = {w} is below 1/10");
    }
    w
}

/// The three pair-covariance constants `(v₀, v₁, v₂)` for sample size `n`.
fn pair_covariances(n: f64) -> (f64, f64, f64) {
    let n2 = n * n;
    let v0 = -4.0 * (n + 1.0) / (45.0 * n2);
    let poly = (((4.0 * n - 25.0) * n + 30.0) * n + 25.0) * n - 34.0;
    let v1 = poly / (180.0 * n2 * (n - 1.0) * (n - 2.0));
    let v2 = (n2 - n - 2.0) / (18.0 * n2);
    (v0, v1, v2)
}

/// Exact conditional variance of `√n Q̂ₙ` given the graph, under independence:
///
/// `Wₙ = (W_{n,1} v₁ + W_{n,2} v₂ + (n² − W_{n,1} − W_{n,2}) v₀) / n`.
pub fn w_n(s: &DegreeStats, n: usize) -> Result<f64> {
    if n < MIN_TEST_N {
        return Err(Error::SampleTooSmall { n, min: MIN_TEST_N });
    }
    let nf = n as f64;
    let (v0, v1, v2) = pair_covariances(nf);
    let w1 = s.w1() as f64;
    let w2 = s.w2() as f64;
    let rest = nf * nf - w1 - w2;
    let w = (w1 * v1 + w2 * v2 + rest * v0) / nf;
    if !(w > 0.0) {
        return Err(Error::NonpositiveVariance(w));
    }
    Ok(w)
}

/// [`w_n`] in exact rational arithmetic.
pub fn w_n_exact(s: &DegreeStats, n: usize) -> Result<BigRational> {
    if n < MIN_TEST_N {
        return Err(Error::SampleTooSmall { n, min: MIN_TEST_N });
    }
    let int = |v: i128| BigInt::from(v);
    let ratio = |a: i128, b: i128| BigRational::new(int(a), int(b));
    let m = n as i128;
    let v0 = ratio(-4 * (m + 1), 45 * m * m);
    let v1 = BigRational::new(
        int(4 * m.pow(4) - 25 * m.pow(3) + 30 * m * m + 25 * m - 34),
        int(180 * m * m) * int((m - 1) * (m - 2)),
    );
    let v2 = ratio(m * m - m - 2, 18 * m * m);
    let w1 = s.w1() as i128;
    let w2 = s.w2() as i128;
    let total = BigRational::from_integer(int(w1)) * v1
        + BigRational::from_integer(int(w2)) * v2
        + BigRational::from_integer(int(m * m - w1 - w2)) * v0;
    Ok(total / BigRational::from_integer(int(m)))
}

/// `Iₙ = √(n / (36 w)) · t`.
pub fn i_n(t: f64, w: f64, n: usize) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::NonpositiveVariance(w));
    }
    Ok((n as f64 / (36.0 * w)).sqrt() * t)
}

/// Outcome of [`independence_test`]. Serializes to a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub n: usize,
    pub t_hat: f64,
    pub q_hat: f64,
    pub w_tilde: f64,
    pub w_n: f64,
    pub i_n: f64,
    /// One-sided: `P(Z > Iₙ)`.
    pub p_value: f64,
    pub l_max: usize,
    pub f_n: usize,
    pub tie_count_x: usize,
    pub tie_flag_y: bool,
}

impl TestReport {
    /// Rejects independence when `Iₙ > z_{1−α}`, i.e. `p < α`.
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Coefficient only; valid from `n = 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientReport {
    pub n: usize,
    pub t_hat: f64,
    pub q_hat: f64,
    pub l_max: usize,
    pub f_n: usize,
    pub tie_count_x: usize,
    pub tie_flag_y: bool,
}

fn check_lengths(n: usize, y: &[f64]) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response length vs covariate sample size",
            expected: n,
            found: y.len(),
        });
    }
    Ok(())
}

pub fn coefficient(d: &DistanceMatrix, y: &[f64]) -> Result<CoefficientReport> {
    check_lengths(d.n(), y)?;
    let g = nearest_neighbor_graph(d)?;
    let s = degree_stats(&g);
    let r = rank_vector(y)?;
    let q = q_hat(&r, &g)?;
    Ok(CoefficientReport {
        n: d.n(),
        t_hat: t_hat(q),
        q_hat: q,
        l_max: s.l_max,
        f_n: s.f_n,
        tie_count_x: g.tie_count(),
        tie_flag_y: r.tie_flag,
    })
}

/// Runs the test from a prebuilt graph; used by the simulation studies, where
/// the graph of a covariate sample is reused across responses.
pub fn test_from_graph(g: &NNGraph, s: &DegreeStats, y: &[f64]) -> Result<TestReport> {
    let n = g.n();
    if n < MIN_TEST_N {
        return Err(Error::SampleTooSmall { n, min: MIN_TEST_N });
    }
    check_lengths(n, y)?;
    let r = rank_vector(y)?;
    let q = q_hat(&r, g)?;
    let t = t_hat(q);
    let wt = w_tilde(s, n);
    let w = w_n(s, n)?;
    let stat = i_n(t, w, n)?;
    Ok(TestReport {
        n,
        t_hat: t,
        q_hat: q,
        w_tilde: wt,
        w_n: w,
        i_n: stat,
        p_value: normal_sf(stat),
        l_max: s.l_max,
        f_n: s.f_n,
        tie_count_x: g.tie_count(),
        tie_flag_y: r.tie_flag,
    })
}

/// Full test from a distance matrix of any metric.
pub fn independence_test(d: &DistanceMatrix, y: &[f64]) -> Result<TestReport> {
    if d.n() < MIN_TEST_N {
        return Err(Error::SampleTooSmall {
            n: d.n(),
            min: MIN_TEST_N,
        });
    }
    check_lengths(d.n(), y)?;
    let g = nearest_neighbor_graph(d)?;
    let s = degree_stats(&g);
    test_from_graph(&g, &s, y)
}

/// Full test from curves, using the trapezoidal L² metric.
pub fn independence_test_sample(x: &FunctionalSample, y: &[f64]) -> Result<TestReport> {
    if x.n() < MIN_TEST_N {
        return Err(Error::SampleTooSmall {
            n: x.n(),
            min: MIN_TEST_N,
        });
    }
    check_lengths(x.n(), y)?;
    independence_test(&distance_matrix(x)?, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(points: &[f64]) -> NNGraph {
        let d = DistanceMatrix::from_fn(points.len(), |i, j| (points[i] - points[j]).abs());
        nearest_neighbor_graph(&d).unwrap()
    }

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn ranks() {
        let r = rank_vector(&[10.0, -1.0, 5.0]).unwrap();
        assert_eq!(r.ranks, vec![3, 1, 2]);
        assert!(!r.tie_flag);
        let r = rank_vector(&[2.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.ranks, vec![3, 3, 1]);
        assert!(r.tie_flag);
        let y: Vec<f64> = (0..9).map(|k| k as f64 * 0.5).collect();
        assert_eq!(rank_vector(&y).unwrap().ranks, (1..=9).collect::<Vec<_>>());
        assert!(matches!(
            rank_vector(&[1.0, f64::INFINITY]),
            Err(Error::NonFiniteValue { row: 1, col: 0 })
        ));
    }

    #[test]
    fn q_hat_three_points() {
        let g = line_graph(&[0.0, 1.0, 3.0]);
        let r = rank_vector(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(q_hat_numerator(&r, &g).unwrap(), 4);
        assert!((q_hat(&r, &g).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        assert!((t_hat(4.0 / 9.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn q_hat_chain_closed_form() {
        // nn[i] = i − 1 for i ≥ 1, nn[0] = 1, ranks 1..n.
        for n in 2..40usize {
            let mut nn: Vec<usize> = (0..n).map(|i| i.saturating_sub(1)).collect();
            nn[0] = 1;
            let g = NNGraph::from_neighbors(nn).unwrap();
            let r = RankVector {
                ranks: (1..=n).collect(),
                tie_flag: false,
            };
            let want = 1 + n * (n - 1) / 2;
            assert_eq!(q_hat_numerator(&r, &g).unwrap(), want as u64);
        }
    }

    #[test]
    fn q_hat_length_mismatch() {
        let g = line_graph(&[0.0, 1.0, 3.0]);
        let r = rank_vector(&[1.0, 2.0]).unwrap();
        assert!(matches!(q_hat(&r, &g), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn t_hat_centers() {
        assert!(t_hat(1.0 / 3.0).abs() < 1e-15);
        let n = 17.0;
        assert!((t_hat((n + 1.0) / (3.0 * n)) - 2.0 / n).abs() < 1e-15);
    }

    #[test]
    fn w_tilde_hand_values() {
        let s = degree_stats(&line_graph(&[0.0, 1.0, 3.0, 7.0]));
        assert!((w_tilde(&s, 4) - 7.0 / 60.0).abs() < 1e-16);
        // Perfect matching on 6 points.
        let g = NNGraph::from_neighbors(vec![1, 0, 3, 2, 5, 4]).unwrap();
        let s = degree_stats(&g);
        assert_eq!(s.w1(), 0);
        assert!((w_tilde(&s, 6) - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn w_n_hand_values() {
        let s = degree_stats(&line_graph(&[0.0, 1.0, 3.0, 7.0]));
        assert!((w_n(&s, 4).unwrap() - 25.0 / 1152.0).abs() < 1e-17);
        assert_eq!(w_n_exact(&s, 4).unwrap(), ratio(25, 1152));
        let (v0, v1, v2) = pair_covariances(4.0);
        assert!((v0 + 1.0 / 36.0).abs() < 1e-17);
        assert!((v1 + 1.0 / 576.0).abs() < 1e-17);
        assert!((v2 - 5.0 / 144.0).abs() < 1e-17);

        let g = NNGraph::from_neighbors(vec![1, 0, 3, 2]).unwrap();
        let s = degree_stats(&g);
        assert_eq!((s.w1(), s.w2()), (0, 8));
        let want = ratio(8, 1) * ratio(5, 144) + ratio(8, 1) * ratio(-1, 36);
        assert_eq!(w_n_exact(&s, 4).unwrap(), want / ratio(4, 1));
    }

    #[test]
    fn w_n_needs_four_points() {
        let s = degree_stats(&line_graph(&[0.0, 1.0, 3.0]));
        assert!(matches!(w_n(&s, 3), Err(Error::SampleTooSmall { n: 3, min: 4 })));
    }

    #[test]
    fn i_n_contract() {
        assert_eq!(i_n(0.0, 0.02, 50).unwrap(), 0.0);
        let w = 0.0123;
        assert!((i_n(0.31, w, 100).unwrap() - (100.0 / (36.0 * w)).sqrt() * 0.31).abs() < 1e-15);
        assert!(i_n(2.0 / 100.0, w, 100).unwrap() > 0.0);
        assert!(matches!(i_n(1.0, 0.0, 10), Err(Error::NonpositiveVariance(_))));
    }

    #[test]
    fn four_point_test_report() {
        let pts: [f64; 4] = [0.0, 1.0, 3.0, 7.0];
        let d = DistanceMatrix::from_fn(4, |i, j| (pts[i] - pts[j]).abs());
        let rep = independence_test(&d, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        // mins: (1,1,2,3) → Q̂ = 7/16.
        assert!((rep.q_hat - 7.0 / 16.0).abs() < 1e-16);
        assert!((rep.t_hat - (6.0 * 7.0 / 16.0 - 2.0)).abs() < 1e-15);
        assert!((rep.w_n - 25.0 / 1152.0).abs() < 1e-17);
        assert!((rep.w_tilde - 7.0 / 60.0).abs() < 1e-16);
        assert!((rep.p_value - normal_sf(rep.i_n)).abs() == 0.0);
        assert_eq!((rep.l_max, rep.f_n, rep.tie_count_x, rep.tie_flag_y), (2, 2, 0, false));
    }

    #[test]
    fn report_json_keys() {
        let pts: [f64; 4] = [0.0, 1.0, 3.0, 7.0];
        let d = DistanceMatrix::from_fn(4, |i, j| (pts[i] - pts[j]).abs());
        let rep = independence_test(&d, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut want = vec![
            "n", "t_hat", "q_hat", "w_tilde", "w_n", "i_n", "p_value", "l_max", "f_n",
            "tie_count_x", "tie_flag_y",
        ];
        want.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, want);
    }

    #[test]
    fn test_needs_four_points() {
        let d = DistanceMatrix::from_fn(3, |i, j| (i as f64 - j as f64).abs());
        assert!(matches!(
            independence_test(&d, &[1.0, 2.0, 3.0]),
            Err(Error::SampleTooSmall { n: 3, min: 4 })
        ));
        // The coefficient alone is fine at n = 3.
        assert!(coefficient(&d, &[1.0, 2.0, 3.0]).is_ok());
    }
}
