//! 1-nearest-neighbor graph and its degree statistics.
//!
//! The graph is built by an exact row scan over all pairs. Functional data
//! defeat low-dimensional spatial indexes, and exactness is what the variance
//! formulas and oracles rely on.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DistanceMatrix;

/// Anything that can report the distance between two sample points.
///
/// Implemented by [`DistanceMatrix`] and by closed-form models that never
/// materialize the full matrix.
pub trait PairwiseDistances: Sync {
    fn len(&self) -> usize;

    fn distance(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PairwiseDistances for DistanceMatrix {
    fn len(&self) -> usize {
        self.n()
    }

    #[inline]
    fn distance(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// Map `i ↦ N(i)` (zero-based) plus a tie diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NNGraph {
    nn: Vec<usize>,
    tie_count: usize,
}

impl NNGraph {
    /// Wraps an explicit neighbor map, checking `nn[i] != i` and range.
    pub fn from_neighbors(nn: Vec<usize>) -> Result<Self> {
        let n = nn.len();
        if n < 2 {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        for (i, &j) in nn.iter().enumerate() {
            if j >= n {
                return Err(Error::InvalidGraph(format!("N({i}) = {j} out of range")));
            }
            if j == i {
                return Err(Error::InvalidGraph(format!("N({i}) = {i} is a self-loop")));
            }
        }
        Ok(Self { nn, tie_count: 0 })
    }

    pub fn n(&self) -> usize {
        self.nn.len()
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.nn
    }

    #[inline]
    pub fn neighbor(&self, i: usize) -> usize {
        self.nn[i]
    }

    /// Number of points whose minimal distance was attained more than once.
    pub fn tie_count(&self) -> usize {
        self.tie_count
    }
}

/// Nearest neighbor of every point; ties go to the smallest index.
pub fn nearest_neighbor_graph<D: PairwiseDistances + ?Sized>(d: &D) -> Result<NNGraph> {
    let n = d.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let scans: Vec<(usize, bool)> = (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let mut best = f64::INFINITY;
            let mut arg = usize::MAX;
            let mut hits = 0usize;
            for j in (0..n).filter(|&j| j != i) {
                let v = d.distance(i, j);
                if v < best {
                    best = v;
                    arg = j;
                    hits = 1;
                } else if v == best {
                    hits += 1;
                }
            }
            (arg, hits > 1)
        })
        .collect();
    let tie_count = scans.iter().filter(|s| s.1).count();
    let nn = scans.into_iter().map(|s| s.0).collect::<Vec<_>>();
    if nn.contains(&usize::MAX) {
        return Err(Error::InvalidDistanceMatrix(
            "no finite nearest neighbor found".into(),
        ));
    }
    Ok(NNGraph { nn, tie_count })
}

/// In-degrees `L_{i,n}` and the derived counts used by the variance formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeStats {
    pub in_degree: Vec<usize>,
    /// Maximal in-degree `L_n`.
    pub l_max: usize,
    /// Σ L_{i,n}².
    pub sum_sq: u64,
    /// Number of indices `i` with `N(N(i)) = i`.
    pub f_n: usize,
}

pub fn degree_stats(g: &NNGraph) -> DegreeStats {
    let n = g.n();
    let mut in_degree = vec![0usize; n];
    for &j in g.neighbors() {
        in_degree[j] += 1;
    }
    let f_n = (0..n).filter(|&i| g.neighbor(g.neighbor(i)) == i).count();
    let l_max = in_degree.iter().copied().max().unwrap_or(0);
    let sum_sq = in_degree.iter().map(|&l| (l as u64) * (l as u64)).sum();
    DegreeStats {
        in_degree,
        l_max,
        sum_sq,
        f_n,
    }
}

impl DegreeStats {
    /// `W_{n,1} = n + Σ L² − 2 f_n`: ordered pairs `(i, j)` sharing exactly one
    /// index between `{i, N(i)}` and `{j, N(j)}`.
    pub fn w1(&self) -> u64 {
        self.in_degree.len() as u64 + self.sum_sq - 2 * self.f_n as u64
    }

    /// `W_{n,2} = n + f_n`: ordered pairs with `{i, N(i)} = {j, N(j)}`.
    pub fn w2(&self) -> u64 {
        (self.in_degree.len() + self.f_n) as u64
    }
}
