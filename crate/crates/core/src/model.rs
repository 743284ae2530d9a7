//! Discretized functional data and the L² metric.
//!
//! Curves live on a shared [`Grid`]. Inner products and norms are approximated
//! by the trapezoidal rule on that grid, so non-uniform grids are handled.
//! On a uniform grid the trapezoidal distance is a fixed positive reweighting
//! of the Euclidean vector distance; the nearest-neighbor graph, and hence
//! every downstream statistic, is unaffected by strictly increasing transforms
//! of the metric.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default upper bound on `n` for a dense distance matrix.
pub const DEFAULT_MAX_N: usize = 50_000;

const UNIFORM_REL_TOL: f64 = 1e-9;

/// Strictly increasing abscissae shared by all curves of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(j) = points.iter().position(|u| !u.is_finite()) {
            return Err(Error::InvalidGrid(format!("point {j} is not finite")));
        }
        let mut min_gap = f64::INFINITY;
        let mut max_gap = 0.0f64;
        for (j, w) in points.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap <= 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "points must be strictly increasing (index {})",
                    j + 1
                )));
            }
            min_gap = min_gap.min(gap);
            max_gap = max_gap.max(gap);
        }
        let uniform = (max_gap - min_gap) < UNIFORM_REL_TOL * max_gap;
        let weights = trapezoid_weights(&points);
        Ok(Self {
            points,
            weights,
            uniform,
        })
    }

    /// `p` equidistant points on [0, 1], endpoints included.
    pub fn uniform(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {p}")));
        }
        let last = (p - 1) as f64;
        Self::new((0..p).map(|j| j as f64 / last).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Trapezoidal quadrature weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Trapezoidal integral of `values` over the grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Index of the grid point closest to `u`. Exact midpoints resolve to the
    /// right neighbor.
    pub fn nearest_index(&self, u: f64) -> usize {
        let pts = &self.points;
        let right = pts.partition_point(|&x| x < u);
        if right == 0 {
            return 0;
        }
        if right == pts.len() {
            return pts.len() - 1;
        }
        let (dl, dr) = (u - pts[right - 1], pts[right] - u);
        if dr <= dl {
            right
        } else {
            right - 1
        }
    }
}

fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let p = points.len();
    let mut w = vec![0.0; p];
    for j in 0..p - 1 {
        let half = 0.5 * (points[j + 1] - points[j]);
        w[j] += half;
        w[j + 1] += half;
    }
    w
}

/// `n` discretized curves on a shared grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    grid: Grid,
    data: Vec<f64>,
    n: usize,
}

impl FunctionalSample {
    /// Validates a row-major `n × p` buffer against `grid`.
    pub fn new(data: Vec<f64>, n: usize, grid: Grid) -> Result<Self> {
        let p = grid.len();
        if n == 0 {
            return Err(Error::SampleTooSmall { n, min: 1 });
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "sample buffer length",
                expected: n * p,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: k / p,
                col: k % p,
            });
        }
        Ok(Self { grid, data, n })
    }

    /// Builds a sample from one vector per curve.
    pub fn from_rows(rows: Vec<Vec<f64>>, grid: Grid) -> Result<Self> {
        let p = grid.len();
        let n = rows.len();
        let mut data = Vec::with_capacity(n * p);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "curve length vs grid length",
                    expected: p,
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { row: i, col: j });
            }
            data.extend(row);
        }
        Self::new(data, n, grid)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn curve(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn curves(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.p())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy with every value transformed by `f` (e.g. scaling, adding a curve).
    pub fn map_rows(&self, mut f: impl FnMut(&mut [f64])) -> Result<Self> {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.p()) {
            f(row);
        }
        Self::new(data, self.n, self.grid.clone())
    }
}

/// Symmetric `n × n` matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates a full row-major matrix: square, finite, nonnegative,
    /// symmetric, zero diagonal.
    pub fn from_full(d: Vec<f64>, n: usize) -> Result<Self> {
        if d.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "distance matrix entries",
                expected: n * n,
                found: d.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = d[i * n + j];
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "negative entry at ({i}, {j})"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "nonzero diagonal at {i}"
                    )));
                }
                if j > i && v != d[j * n + i] {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "asymmetric entries at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, d })
    }

    /// Builds from strictly-upper-triangular entries given by `f(i, j)`, `i < j`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    /// Applies `f` entrywise off the diagonal. `f` must be nonnegative and
    /// finite on the entries; used for monotone-transform checks.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let n = self.n;
        let mut d = self.d.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[i * n + j] = f(self.d[i * n + j]);
                }
            }
        }
        Self { n, d }
    }

    /// Relabels points: entry `(i, j)` of the result is entry `(perm[i], perm[j])`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let n = self.n;
        assert_eq!(perm.len(), n);
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, d }
    }
}

/// Tuning for [`distance_matrix_with`].
#[derive(Debug, Clone, Copy)]
pub struct DistanceOptions {
    /// Rows per cache block.
    pub block: usize,
    /// Refuse to materialize matrices beyond this many points.
    pub max_n: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            block: 64,
            max_n: DEFAULT_MAX_N,
        }
    }
}

/// Trapezoidal L² distance between two curves on `grid`.
///
/// Uses the same summation kernel as [`distance_matrix`], so the two agree
/// bit for bit.
pub fn l2_distance(a: &[f64], b: &[f64], grid: &Grid) -> Result<f64> {
    if a.len() != grid.len() || b.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "curve length vs grid length",
            expected: grid.len(),
            found: if a.len() != grid.len() { a.len() } else { b.len() },
        });
    }
    let roots: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let sa: Vec<f64> = a.iter().zip(&roots).map(|(x, r)| x * r).collect();
    let sb: Vec<f64> = b.iter().zip(&roots).map(|(x, r)| x * r).collect();
    Ok(squared_euclidean(&sa, &sb).sqrt())
}

/// All pairwise [`l2_distance`] values with default options.
pub fn distance_matrix(sample: &FunctionalSample) -> Result<DistanceMatrix> {
    distance_matrix_with(sample, DistanceOptions::default())
}

/// All pairwise distances, computed in cache blocks of `opts.block` rows and
/// parallelized over row blocks on the current rayon pool. Every entry is
/// produced by a single fixed-order summation, so the result does not depend
/// on the block size or the number of workers.
pub fn distance_matrix_with(sample: &FunctionalSample, opts: DistanceOptions) -> Result<DistanceMatrix> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    if n > opts.max_n {
        return Err(Error::SampleTooLarge { n, cap: opts.max_n });
    }
    let p = sample.p();
    let block = opts.block.max(1);

    // Fold the quadrature weights into the coordinates once.
    let roots: Vec<f64> = sample.grid().weights().iter().map(|w| w.sqrt()).collect();
    let mut scaled = sample.as_slice().to_vec();
    for row in scaled.chunks_exact_mut(p) {
        for (x, r) in row.iter_mut().zip(&roots) {
            *x *= r;
        }
    }
    let scaled = &scaled;

    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(block * n)
        .enumerate()
        .for_each(|(bi, strip)| {
            let i0 = bi * block;
            let rows = strip.len() / n;
            let mut j0 = i0;
            while j0 < n {
                let j1 = (j0 + block).min(n);
                for di in 0..rows {
                    let i = i0 + di;
                    let a = &scaled[i * p..(i + 1) * p];
                    let out = &mut strip[di * n..(di + 1) * n];
                    for j in j0.max(i + 1)..j1 {
                        out[j] = squared_euclidean(a, &scaled[j * p..(j + 1) * p]).sqrt();
                    }
                }
                j0 = j1;
            }
        });
    for i in 0..n {
        for j in 0..i {
            d[i * n + j] = d[j * n + i];
        }
    }
    Ok(DistanceMatrix { n, d })
}

const LANES: usize = 8;

/// Σ (aₖ − bₖ)² with a fixed 8-lane accumulation order.
#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            let t = x[l] - y[l];
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let t = x - y;
        tail += t * t;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}
