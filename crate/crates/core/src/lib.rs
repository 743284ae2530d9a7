//! Nearest-neighbor dependence coefficient for a scalar response and a
//! functional covariate, with a self-normalized asymptotic independence test.
//!
//! The pipeline is
//!
//! ```text
//! curves ──► DistanceMatrix ──► NNGraph ──► DegreeStats ─┐
//!                                                        ├──► TestReport
//! response ──► RankVector ───────────────────────────────┘
//! ```
//!
//! Everything after the distance matrix depends only on the 1-nearest-neighbor
//! graph and the response ranks. The graph is invariant under any strictly
//! increasing transform of the metric, so the same results are obtained from
//! squared distances, rescaled distances, or a precomputed matrix of any
//! metric (see [`DistanceMatrix::from_full`]).
//!
//! ```
//! use fdep::{Grid, FunctionalSample, distance_matrix, independence_test};
//!
//! let grid = Grid::uniform(2).unwrap();
//! let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 3.0], vec![7.0, 7.0]];
//! let sample = FunctionalSample::from_rows(rows, grid).unwrap();
//! let d = distance_matrix(&sample).unwrap();
//! let report = independence_test(&d, &[1.0, 2.0, 3.0, 4.0]).unwrap();
//! assert!((report.w_n - 25.0 / 1152.0).abs() < 1e-15);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod dependence;
pub mod error;
pub mod graph;
pub mod io;
pub mod model;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use baselines::{
    distance_correlation, exhaustive_permutation_moments, permutation_test, OracleMoments,
    PermutationPlan,
};
pub use dependence::{
    coefficient, independence_test, independence_test_sample, i_n, q_hat, rank_vector, t_hat,
    w_n, w_n_exact, w_tilde, CoefficientReport, RankVector, TestReport,
};
pub use error::{Error, Result};
pub use graph::{degree_stats, nearest_neighbor_graph, DegreeStats, NNGraph, PairwiseDistances};
pub use model::{distance_matrix, l2_distance, DistanceMatrix, DistanceOptions, FunctionalSample, Grid};
