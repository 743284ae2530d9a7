//! Synthetic functional data, response models, and the three Monte Carlo
//! studies: null distribution, power, and growth of the maximal in-degree.
//!
//! Replicate `b` of a study draws from its own random stream (see
//! [`crate::rng`]), so identical configurations give identical reports no
//! matter how many threads execute them.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal, Zeta};
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{distance_correlation, permutation_test, PermutationPlan};
use crate::dependence::{test_from_graph, TestReport};
use crate::error::{Error, Result};
use crate::graph::{degree_stats, nearest_neighbor_graph, PairwiseDistances};
use crate::model::{distance_matrix, DistanceMatrix, FunctionalSample, Grid};
use crate::rng::{derive_seed, stream_rng};
use crate::stats;

/// Sine system `e_k(u) = √2 sin((k − ½)πu)`, orthonormal in L²[0, 1].
pub fn sine_basis(k: u64, u: f64) -> f64 {
    SQRT_2 * ((k as f64 - 0.5) * PI * u).sin()
}

/// Truncated Karhunen–Loève model `X = Σ_{k≤K} Z_k e_k` with independent
/// `Z_k ~ N(0, decay^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KLModel {
    pub basis_size: usize,
    /// `Var(Z_k) = variance_decay^k`.
    pub variance_decay: f64,
    pub grid_points: usize,
}

impl Default for KLModel {
    fn default() -> Self {
        Self {
            basis_size: 20,
            variance_decay: 0.3,
            grid_points: 200,
        }
    }
}

impl KLModel {
    pub fn validate(&self) -> Result<()> {
        if self.basis_size == 0 {
            return Err(Error::InvalidParameter("basis size must be at least 1".into()));
        }
        if !(self.variance_decay >= 0.0 && self.variance_decay.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance decay must be finite and nonnegative, got {}",
                self.variance_decay
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn variances(&self) -> Vec<f64> {
        (1..=self.basis_size as i32)
            .map(|k| self.variance_decay.powi(k))
            .collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.grid_points)
    }
}

/// Draws `n` curves of `m` on its uniform grid over [0, 1].
pub fn kl_sample<R: Rng + ?Sized>(m: &KLModel, n: usize, rng: &mut R) -> Result<FunctionalSample> {
    m.validate()?;
    let grid = m.grid()?;
    let p = grid.len();
    let sds: Vec<f64> = m.variances().iter().map(|v| v.sqrt()).collect();
    let basis: Vec<f64> = (1..=m.basis_size as u64)
        .flat_map(|k| grid.points().iter().map(move |&u| sine_basis(k, u)))
        .collect();
    let mut data = vec![0.0; n * p];
    let mut z = vec![0.0; m.basis_size];
    for row in data.chunks_exact_mut(p) {
        for (zk, sd) in z.iter_mut().zip(&sds) {
            let e: f64 = rng.sample(StandardNormal);
            *zk = sd * e;
        }
        for (k, zk) in z.iter().enumerate() {
            let ek = &basis[k * p..(k + 1) * p];
            for (x, b) in row.iter_mut().zip(ek) {
                *x += zk * b;
            }
        }
    }
    FunctionalSample::new(data, n, grid)
}

pub fn kl_sample_seeded(m: &KLModel, n: usize, seed: u64) -> Result<FunctionalSample> {
    kl_sample(m, n, &mut stream_rng(seed, 0))
}

/// Eigenvalue sequence of the spike model's covariance operator.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    /// `λ_k = scale · k^{−exponent}`, `exponent > 1`.
    PowerLaw { scale: f64, exponent: f64 },
    /// Finitely many eigenvalues `λ_1, λ_2, …`.
    Explicit(Vec<f64>),
}

impl LambdaSpec {
    pub fn power_law(exponent: f64) -> Self {
        LambdaSpec::PowerLaw {
            scale: 1.0,
            exponent,
        }
    }

    /// `σ² = Σ λ_k`.
    pub fn total(&self) -> f64 {
        match self {
            LambdaSpec::PowerLaw { scale, exponent } => scale * riemann_zeta(*exponent),
            LambdaSpec::Explicit(l) => l.iter().sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LambdaSpec::PowerLaw { scale, exponent } => {
                if !(*exponent > 1.0 && exponent.is_finite()) || !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "power-law eigenvalues need scale > 0 and exponent > 1, got {scale}, {exponent}"
                    )));
                }
            }
            LambdaSpec::Explicit(l) => {
                if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(l.iter().sum::<f64>() > 0.0) {
                    return Err(Error::InvalidParameter(
                        "explicit eigenvalues must be nonnegative with positive sum".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `ζ(s) = Σ k^{−s}` for `s > 1`, by Euler–Maclaurin with 20 explicit terms.
pub fn riemann_zeta(s: f64) -> f64 {
    const N: usize = 20;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let x = N as f64;
    let b2 = s / 12.0 * x.powf(-s - 1.0);
    let b4 = s * (s + 1.0) * (s + 2.0) / 720.0 * x.powf(-s - 3.0);
    let b6 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / 30240.0 * x.powf(-s - 5.0);
    head + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + b2 - b4 + b6
}

/// Sample of the spike model `Xᵢ = Aᵢ e_{Kᵢ}`, with `Aᵢ ~ N(0, σ²)` and
/// `P(K = k) = λ_k / σ²`. Distances have the closed form
/// `‖Xᵢ − Xⱼ‖² = Aᵢ² + Aⱼ² − 2AᵢAⱼ 1{Kᵢ = Kⱼ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSample {
    pub amplitude: Vec<f64>,
    /// Basis indices, starting at 1.
    pub index: Vec<u64>,
    pub sigma2: f64,
}

pub fn spike_sample<R: Rng + ?Sized>(lambda: &LambdaSpec, n: usize, rng: &mut R) -> Result<SpikeSample> {
    lambda.validate()?;
    let sigma2 = lambda.total();
    let sigma = sigma2.sqrt();
    let mut amplitude = Vec::with_capacity(n);
    let mut index = Vec::with_capacity(n);
    match lambda {
        LambdaSpec::PowerLaw { exponent, .. } => {
            let zeta = Zeta::new(*exponent)
                .map_err(|e| Error::InvalidParameter(format!("zeta law: {e}")))?;
            for _ in 0..n {
                let a: f64 = rng.sample(StandardNormal);
                amplitude.push(sigma * a);
                let k: f64 = zeta.sample(rng);
                index.push(if k >= u64::MAX as f64 { u64::MAX } else { k as u64 });
            }
        }
        LambdaSpec::Explicit(l) => {
            let w = WeightedIndex::new(l)
                .map_err(|e| Error::InvalidParameter(format!("eigenvalue weights: {e}")))?;
            for _ in 0..n {
                let a: f64 = rng.sample(StandardNormal);
                amplitude.push(sigma * a);
                index.push(w.sample(rng) as u64 + 1);
            }
        }
    }
    Ok(SpikeSample {
        amplitude,
        index,
        sigma2,
    })
}

impl SpikeSample {
    pub fn n(&self) -> usize {
        self.amplitude.len()
    }

    /// Explicit curves `Aᵢ e_{Kᵢ}` on `grid`; only sensible when every `Kᵢ`
    /// is small relative to the grid resolution.
    pub fn materialize(&self, grid: Grid) -> Result<FunctionalSample> {
        let rows = self
            .amplitude
            .iter()
            .zip(&self.index)
            .map(|(&a, &k)| grid.points().iter().map(|&u| a * sine_basis(k, u)).collect())
            .collect();
        FunctionalSample::from_rows(rows, grid)
    }

    /// `Gₙ`: number of basis indices that occur exactly once.
    pub fn singleton_count(&self) -> usize {
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for &k in &self.index {
            *counts.entry(k).or_default() += 1;
        }
        counts.values().filter(|&&c| c == 1).count()
    }

    /// `|R_x| = #{i : Kᵢ ≥ x}`.
    pub fn tail_count(&self, x: u64) -> usize {
        self.index.iter().filter(|&&k| k >= x).count()
    }
}

impl PairwiseDistances for SpikeSample {
    fn len(&self) -> usize {
        self.n()
    }

    #[inline]
    fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.amplitude[i], self.amplitude[j]);
        if self.index[i] == self.index[j] {
            (a - b).abs()
        } else {
            a.hypot(b)
        }
    }
}

/// Dense closed-form distance matrix of a spike sample.
pub fn spike_distance_matrix(s: &SpikeSample) -> Result<DistanceMatrix> {
    let n = s.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    Ok(DistanceMatrix::from_fn(n, |i, j| s.distance(i, j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ThresholdBound {
    pub x: u64,
    /// `|R_x|`.
    pub tail: usize,
    /// `2 + 2x + |R_x|`.
    pub upper: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeBounds {
    pub n: usize,
    pub l_max: usize,
    pub g_n: usize,
    pub thresholds: Vec<ThresholdBound>,
}

/// Computes `Lₙ` from the exact nearest-neighbor graph of the spike sample and
/// checks `Gₙ − 1 ≤ Lₙ` and `Lₙ ≤ 2 + 2x + |R_x|` for every threshold `x`.
/// Both inequalities always hold, so a violation means a bug.
pub fn degree_bounds_check(s: &SpikeSample, thresholds: &[u64]) -> Result<DegreeBounds> {
    let g = nearest_neighbor_graph(s)?;
    let l_max = degree_stats(&g).l_max;
    let g_n = s.singleton_count();
    if l_max + 1 < g_n {
        return Err(Error::BoundViolation(format!(
            "L_n = {l_max} < G_n - 1 = {}",
            g_n - 1
        )));
    }
    let mut out = Vec::with_capacity(thresholds.len());
    for &x in thresholds {
        let tail = s.tail_count(x);
        let upper = 2 + 2 * x + tail as u64;
        if l_max as u64 > upper {
            return Err(Error::BoundViolation(format!(
                "L_n = {l_max} > 2 + 2x + |R_x| = {upper} at x = {x}"
            )));
        }
        out.push(ThresholdBound { x, tail, upper });
    }
    Ok(DegreeBounds {
        n: s.n(),
        l_max,
        g_n,
        thresholds: out,
    })
}

/// `⌈n^{num/den}⌉` in exact integer arithmetic.
pub fn ceil_root(n: u64, num: u32, den: u32) -> u64 {
    let target = (n as u128).pow(num);
    let mut x = (n as f64).powf(num as f64 / den as f64).floor() as u64;
    x = x.saturating_sub(2);
    while (x as u128).pow(den) < target {
        x += 1;
    }
    x
}

/// Thresholds `⌈n^{1/3}⌉, ⌈n^{1/2}⌉, ⌈n^{2/3}⌉`.
pub fn default_thresholds(n: usize) -> Vec<u64> {
    let n = n as u64;
    vec![ceil_root(n, 1, 3), ceil_root(n, 1, 2), ceil_root(n, 2, 3)]
}

/// Functional `f` applied to covariate curves; `Ind` produces a response
/// independent of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Ind,
    /// `∫ X`
    Int,
    /// `∫ X²`
    Sqnorm,
    /// `∫ t² X(t) dt`
    Weight,
    /// `sin(2π ∫ X)`
    Sin,
    /// `max X` over the grid
    Max,
    /// `max X − min X` over the grid
    Range,
    /// `X(0.5)` at the nearest grid point
    Eval,
}

impl ResponseKind {
    pub const ALL: [ResponseKind; 8] = [
        ResponseKind::Ind,
        ResponseKind::Int,
        ResponseKind::Sqnorm,
        ResponseKind::Weight,
        ResponseKind::Sin,
        ResponseKind::Max,
        ResponseKind::Range,
        ResponseKind::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResponseKind::Ind => "ind",
            ResponseKind::Int => "int",
            ResponseKind::Sqnorm => "sqnorm",
            ResponseKind::Weight => "weight",
            ResponseKind::Sin => "sin",
            ResponseKind::Max => "max",
            ResponseKind::Range => "range",
            ResponseKind::Eval => "eval",
        }
    }
}

impl fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResponseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ResponseKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// A response functional together with its target signal fraction
/// `r² = Var f(X) / Var Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseModel {
    pub kind: ResponseKind,
    pub r2: f64,
}

/// Noise-free values `f(Xᵢ)`. Zero for `Ind`.
pub fn signal(kind: ResponseKind, x: &FunctionalSample) -> Vec<f64> {
    let grid = x.grid();
    let eval_at = grid.nearest_index(0.5);
    let t2: Vec<f64> = grid.points().iter().map(|t| t * t).collect();
    x.curves()
        .map(|c| match kind {
            ResponseKind::Ind => 0.0,
            ResponseKind::Int => grid.integrate(c),
            ResponseKind::Sqnorm => grid.weights().iter().zip(c).map(|(w, v)| w * v * v).sum(),
            ResponseKind::Weight => {
                grid.weights().iter().zip(c).zip(&t2).map(|((w, v), t)| w * t * v).sum()
            }
            ResponseKind::Sin => (2.0 * PI * grid.integrate(c)).sin(),
            ResponseKind::Max => c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ResponseKind::Range => {
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo
            }
            ResponseKind::Eval => c[eval_at],
        })
        .collect()
}

/// Noise standard deviation `σ = √(v̂ (1 − r²) / r²)` from the pooled sample
/// variance `v̂` of all signals.
pub fn calibrate_noise(signals: &[f64], r2: f64) -> Result<f64> {
    if !(r2 > 0.0 && r2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("r2 must lie in (0, 1], got {r2}")));
    }
    if r2 == 1.0 {
        return Ok(0.0);
    }
    let v = if signals.len() < 2 { 0.0 } else { stats::variance(signals) };
    if !(v > 0.0) {
        return Err(Error::DegenerateSignal { r2 });
    }
    Ok((v * (1.0 - r2) / r2).sqrt())
}

/// Combines signals with standard-normal draws `eps` (or uniforms for `Ind`)
/// at noise level `sigma`. `r2 = 0` yields pure noise.
fn assemble(kind: ResponseKind, r2: f64, signals: &[f64], sigma: f64, eps: &[f64], unif: &[f64]) -> Vec<f64> {
    match kind {
        ResponseKind::Ind => unif.to_vec(),
        _ if r2 == 0.0 => eps.to_vec(),
        _ => signals.iter().zip(eps).map(|(f, e)| f + sigma * e).collect(),
    }
}

/// `y = f(X) + ε` with `σ` calibrated from this sample's own signals;
/// `Ind` draws `y ~ Uniform[0, 1]`.
pub fn response<R: Rng + ?Sized>(model: &ResponseModel, x: &FunctionalSample, rng: &mut R) -> Result<Vec<f64>> {
    let n = x.n();
    if model.kind == ResponseKind::Ind {
        return Ok((0..n).map(|_| rng.random::<f64>()).collect());
    }
    if !(0.0..=1.0).contains(&model.r2) {
        return Err(Error::InvalidParameter(format!("r2 must lie in [0, 1], got {}", model.r2)));
    }
    let f = signal(model.kind, x);
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let sigma = if model.r2 == 0.0 { 0.0 } else { calibrate_noise(&f, model.r2)? };
    Ok(assemble(model.kind, model.r2, &f, sigma, &eps, &[]))
}

/// Shared study parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub n: usize,
    /// Number of Monte Carlo replications `B`.
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub model: KLModel,
    pub kinds: Vec<ResponseKind>,
    pub r2: Vec<f64>,
    /// Also compute distance correlation for every replicate.
    pub dcor: bool,
    /// Permutations for the distance-correlation test in power studies; 0 disables it.
    pub dcor_permutations: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n: 100,
            replications: 500,
            seed: 1,
            alpha: 0.05,
            model: KLModel::default(),
            kinds: ResponseKind::ALL[1..].to_vec(),
            r2: (0..=10).map(|i| i as f64 / 10.0).collect(),
            dcor: false,
            dcor_permutations: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < crate::dependence::MIN_TEST_N {
            return Err(Error::SampleTooSmall {
                n: self.n,
                min: crate::dependence::MIN_TEST_N,
            });
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(r) = self.r2.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidParameter(format!("r2 must lie in [0, 1], got {r}")));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullReplicate {
    pub replicate: usize,
    pub t_hat: f64,
    pub i_n: f64,
    pub p_value: f64,
    pub l_max: usize,
    pub dcor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullStudyReport {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub t_hat_mean: f64,
    pub t_hat_sd: f64,
    pub i_n_mean: f64,
    pub i_n_sd: f64,
    /// Kolmogorov–Smirnov distance of the `Iₙ` sample to N(0, 1).
    pub ks_distance: f64,
    pub rejection_rate: f64,
    pub dcor_mean: Option<f64>,
    pub dcor_sd: Option<f64>,
    #[serde(skip)]
    pub replicates: Vec<NullReplicate>,
}

impl NullStudyReport {
    pub fn i_n(&self) -> Vec<f64> {
        self.replicates.iter().map(|r| r.i_n).collect()
    }
}

/// `B` independent draws of KL curves with an independent uniform response.
pub fn null_distribution_study(cfg: &StudyConfig) -> Result<NullStudyReport> {
    cfg.validate()?;
    let replicates = (0..cfg.replications)
        .into_par_iter()
        .map(|b| -> Result<NullReplicate> {
            let mut rng = stream_rng(cfg.seed, b as u64);
            let x = kl_sample(&cfg.model, cfg.n, &mut rng)?;
            let y: Vec<f64> = (0..cfg.n).map(|_| rng.random::<f64>()).collect();
            let d = distance_matrix(&x)?;
            let g = nearest_neighbor_graph(&d)?;
            let s = degree_stats(&g);
            let rep = test_from_graph(&g, &s, &y)?;
            let dcor = if cfg.dcor { Some(distance_correlation(&d, &y)?) } else { None };
            Ok(NullReplicate {
                replicate: b,
                t_hat: rep.t_hat,
                i_n: rep.i_n,
                p_value: rep.p_value,
                l_max: rep.l_max,
                dcor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let t: Vec<f64> = replicates.iter().map(|r| r.t_hat).collect();
    let i: Vec<f64> = replicates.iter().map(|r| r.i_n).collect();
    let rejections = replicates.iter().filter(|r| r.p_value < cfg.alpha).count();
    let dc: Option<Vec<f64>> = replicates.iter().map(|r| r.dcor).collect();
    Ok(NullStudyReport {
        n: cfg.n,
        replications: cfg.replications,
        seed: cfg.seed,
        alpha: cfg.alpha,
        t_hat_mean: stats::mean(&t),
        t_hat_sd: stats::std_dev(&t),
        i_n_mean: stats::mean(&i),
        i_n_sd: stats::std_dev(&i),
        ks_distance: stats::ks_distance(&i, stats::normal_cdf),
        rejection_rate: rejections as f64 / cfg.replications as f64,
        dcor_mean: dc.as_deref().map(stats::mean),
        dcor_sd: dc.as_deref().map(stats::std_dev),
        replicates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCell {
    pub kind: ResponseKind,
    pub r2: f64,
    /// Noise level used in this cell.
    pub sigma: f64,
    pub rejection_rate: f64,
    pub t_hat_mean: f64,
    pub t_hat_sd: f64,
    pub dcor_rejection_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerStudyReport {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub cells: Vec<PowerCell>,
}

struct CovariateDraw {
    graph: crate::graph::NNGraph,
    stats: crate::graph::DegreeStats,
    dist: Option<DistanceMatrix>,
    signals: Vec<Vec<f64>>,
    eps: Vec<f64>,
    unif: Vec<f64>,
}

/// Rejection rates of the asymptotic test for every `(kind, r²)` cell.
///
/// All cells share the same `B` covariate samples and noise draws, and the
/// noise level of a cell is calibrated from the pooled `n × B` signals of its
/// kind.
pub fn power_study(cfg: &StudyConfig) -> Result<PowerStudyReport> {
    cfg.validate()?;
    let n = cfg.n;
    let draws = (0..cfg.replications)
        .into_par_iter()
        .map(|b| -> Result<CovariateDraw> {
            let mut rx = stream_rng(cfg.seed, 2 * b as u64);
            let x = kl_sample(&cfg.model, n, &mut rx)?;
            let d = distance_matrix(&x)?;
            let graph = nearest_neighbor_graph(&d)?;
            let stats = degree_stats(&graph);
            let signals = cfg.kinds.iter().map(|&k| signal(k, &x)).collect();
            let mut re = stream_rng(cfg.seed, 2 * b as u64 + 1);
            let eps = (0..n).map(|_| re.sample(StandardNormal)).collect();
            let unif = (0..n).map(|_| re.random::<f64>()).collect();
            Ok(CovariateDraw {
                graph,
                stats,
                dist: (cfg.dcor_permutations > 0).then_some(d),
                signals,
                eps,
                unif,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(cfg.kinds.len() * cfg.r2.len());
    for (ki, &kind) in cfg.kinds.iter().enumerate() {
        let pooled: Vec<f64> = draws.iter().flat_map(|d| d.signals[ki].iter().copied()).collect();
        for (ri, &r2) in cfg.r2.iter().enumerate() {
            let sigma = if kind == ResponseKind::Ind || r2 == 0.0 {
                0.0
            } else {
                calibrate_noise(&pooled, r2)?
            };
            let cell_tag = (ki * cfg.r2.len() + ri) as u64;
            let results = draws
                .par_iter()
                .enumerate()
                .map(|(b, d)| -> Result<(TestReport, Option<bool>)> {
                    let y = assemble(kind, r2, &d.signals[ki], sigma, &d.eps, &d.unif);
                    let rep = test_from_graph(&d.graph, &d.stats, &y)?;
                    let dc = match &d.dist {
                        Some(dm) => {
                            let seed = derive_seed(cfg.seed, (cell_tag << 32) | b as u64);
                            let plan = PermutationPlan::new(cfg.dcor_permutations, seed)?;
                            let stat = |m: &DistanceMatrix, v: &[f64]| distance_correlation(m, v).unwrap_or(0.0);
                            Some(permutation_test(stat, dm, &y, plan) <= cfg.alpha)
                        }
                        None => None,
                    };
                    Ok((rep, dc))
                })
                .collect::<Result<Vec<_>>>()?;
            let t: Vec<f64> = results.iter().map(|r| r.0.t_hat).collect();
            let rejections = results.iter().filter(|r| r.0.reject(cfg.alpha)).count();
            let dc: Option<Vec<bool>> = results.iter().map(|r| r.1).collect();
            cells.push(PowerCell {
                kind,
                r2,
                sigma,
                rejection_rate: rejections as f64 / cfg.replications as f64,
                t_hat_mean: stats::mean(&t),
                t_hat_sd: stats::std_dev(&t),
                dcor_rejection_rate: dc.map(|v| v.iter().filter(|&&r| r).count() as f64 / v.len() as f64),
            });
        }
    }
    Ok(PowerStudyReport {
        n,
        replications: cfg.replications,
        seed: cfg.seed,
        alpha: cfg.alpha,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStudyConfig {
    pub sizes: Vec<usize>,
    /// Independent runs per sample size.
    pub runs: usize,
    pub seed: u64,
    pub lambda: LambdaSpec,
}

impl Default for DegreeStudyConfig {
    fn default() -> Self {
        Self {
            sizes: vec![250, 1000, 4000, 16000],
            runs: 20,
            seed: 1,
            lambda: LambdaSpec::power_law(2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeRun {
    pub n: usize,
    pub run: usize,
    pub bounds: DegreeBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSummary {
    pub n: usize,
    pub median_l_max: f64,
    pub mean_l_max: f64,
    pub median_g_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStudyReport {
    pub seed: u64,
    pub runs_per_size: usize,
    pub summaries: Vec<DegreeSummary>,
    /// Least-squares slope of log median `Lₙ` on log `n`. Reported, not tested.
    pub log_log_slope: f64,
    /// Median `Lₙ` strictly increasing along `sizes`.
    pub strictly_increasing: bool,
    #[serde(skip)]
    pub runs: Vec<DegreeRun>,
}

/// Spike-model samples at each size, with both degree bounds checked on
/// every run against the thresholds of [`default_thresholds`].
pub fn degree_growth_study(cfg: &DegreeStudyConfig) -> Result<DegreeStudyReport> {
    if cfg.runs == 0 || cfg.sizes.is_empty() {
        return Err(Error::InvalidParameter("degree study needs sizes and at least one run".into()));
    }
    if let Some(&n) = cfg.sizes.iter().find(|&&n| n < 2) {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let mut runs = Vec::with_capacity(cfg.sizes.len() * cfg.runs);
    let mut summaries = Vec::with_capacity(cfg.sizes.len());
    for (si, &n) in cfg.sizes.iter().enumerate() {
        let thresholds = default_thresholds(n);
        let batch = (0..cfg.runs)
            .map(|r| -> Result<DegreeRun> {
                let mut rng = stream_rng(cfg.seed, ((si as u64) << 32) | r as u64);
                let s = spike_sample(&cfg.lambda, n, &mut rng)?;
                Ok(DegreeRun {
                    n,
                    run: r,
                    bounds: degree_bounds_check(&s, &thresholds)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let l: Vec<f64> = batch.iter().map(|r| r.bounds.l_max as f64).collect();
        let g: Vec<f64> = batch.iter().map(|r| r.bounds.g_n as f64).collect();
        summaries.push(DegreeSummary {
            n,
            median_l_max: stats::median(&l),
            mean_l_max: stats::mean(&l),
            median_g_n: stats::median(&g),
        });
        runs.extend(batch);
    }
    let strictly_increasing = summaries.windows(2).all(|w| w[1].median_l_max > w[0].median_l_max);
    let lx: Vec<f64> = summaries.iter().map(|s| (s.n as f64).ln()).collect();
    let ly: Vec<f64> = summaries.iter().map(|s| s.median_l_max.max(1.0).ln()).collect();
    let log_log_slope = if summaries.len() >= 2 { stats::ols_slope(&lx, &ly) } else { f64::NAN };
    Ok(DegreeStudyReport {
        seed: cfg.seed,
        runs_per_size: cfg.runs,
        summaries,
        log_log_slope,
        strictly_increasing,
        runs,
    })
}
