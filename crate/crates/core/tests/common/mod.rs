#![allow(dead_code)]

use fdep::rng::stream_rng;
use fdep::{DistanceMatrix, FunctionalSample, Grid};
use rand::Rng;
use rand_distr::StandardNormal;

/// Euclidean distances of `n` standard normal points in `R^dim`.
pub fn random_points(n: usize, dim: usize, seed: u64) -> DistanceMatrix {
    let mut rng = stream_rng(seed, 0);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    DistanceMatrix::from_fn(n, |i, j| {
        pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })
}

/// Rough curves with independent normal values on a uniform grid.
pub fn random_curves(n: usize, p: usize, seed: u64) -> FunctionalSample {
    let mut rng = stream_rng(seed, 1);
    let data = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    FunctionalSample::new(data, n, Grid::uniform(p).unwrap()).unwrap()
}

pub fn random_response(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 2);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn line(points: &[f64]) -> DistanceMatrix {
    DistanceMatrix::from_fn(points.len(), |i, j| (points[i] - points[j]).abs())
}
