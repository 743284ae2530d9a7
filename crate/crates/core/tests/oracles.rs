mod common;

use common::{line, random_curves, random_points};
use fdep::dependence::q_hat_numerator;
use fdep::model::distance_matrix_with;
use fdep::{
    degree_stats, distance_matrix, exhaustive_permutation_moments, l2_distance,
    nearest_neighbor_graph, rank_vector, w_n, w_n_exact, DistanceOptions, FunctionalSample, Grid,
    NNGraph,
};
use num_bigint::BigInt;
use num_rational::BigRational;

fn ratio(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// Every functional graph without fixed points on `n` vertices, in
/// lexicographic order of the neighbor vector.
fn all_graphs(n: usize) -> Vec<NNGraph> {
    let mut out = Vec::new();
    let total = (n - 1).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let nn: Vec<usize> = (0..n)
            .map(|i| {
                let k = c % (n - 1);
                c /= n - 1;
                if k >= i { k + 1 } else { k }
            })
            .collect();
        out.push(NNGraph::from_neighbors(nn).unwrap());
    }
    out
}

#[test]
fn exact_variance_on_every_graph_up_to_five() {
    for n in 4..=5 {
        for g in all_graphs(n) {
            let m = exhaustive_permutation_moments(&g).unwrap();
            let s = degree_stats(&g);
            assert_eq!(w_n_exact(&s, n).unwrap(), m.exact_variance, "nn = {:?}", g.neighbors());
            assert_eq!(m.exact_mean_q, ratio(n as i64 + 1, 3 * n as i64));
            let w = w_n(&s, n).unwrap();
            assert!((w - m.variance).abs() <= 1e-12 * m.variance);
        }
    }
}

#[test]
fn exact_variance_on_geometric_graphs_six_to_eight() {
    for n in 6..=8 {
        for seed in 0..6 {
            let g = nearest_neighbor_graph(&random_points(n, 2, seed)).unwrap();
            let m = exhaustive_permutation_moments(&g).unwrap();
            let s = degree_stats(&g);
            assert_eq!(w_n_exact(&s, n).unwrap(), m.exact_variance);
            assert_eq!(m.exact_mean_q, ratio(n as i64 + 1, 3 * n as i64));
        }
    }
}

#[test]
fn perfect_matching_variance() {
    let g = NNGraph::from_neighbors(vec![1, 0, 3, 2]).unwrap();
    let m = exhaustive_permutation_moments(&g).unwrap();
    let (v0, v2) = (ratio(-1, 36), ratio(5, 144));
    assert_eq!(m.exact_variance, (ratio(8, 1) * v2 + ratio(8, 1) * v0) / ratio(4, 1));
}

#[test]
fn hand_case_line() {
    let d = line(&[0.0, 1.0, 3.0, 7.0]);
    let g = nearest_neighbor_graph(&d).unwrap();
    assert_eq!(g.neighbors(), &[1, 0, 1, 2]);
    let s = degree_stats(&g);
    assert_eq!(s.in_degree, vec![1, 2, 1, 0]);
    assert_eq!((s.sum_sq, s.f_n), (6, 2));
    assert_eq!(w_n_exact(&s, 4).unwrap(), ratio(25, 1152));
    let r = rank_vector(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(q_hat_numerator(&r, &g).unwrap(), 7);
}

#[test]
fn nearest_neighbors_match_brute_force() {
    let d = random_points(200, 4, 11);
    let g = nearest_neighbor_graph(&d).unwrap();
    for i in 0..200 {
        let mut best = usize::MAX;
        for j in 0..200 {
            if j != i && (best == usize::MAX || d.get(i, j) < d.get(i, best)) {
                best = j;
            }
        }
        assert_eq!(g.neighbor(i), best);
    }
    let s = degree_stats(&g);
    for j in 0..200 {
        assert_eq!(s.in_degree[j], g.neighbors().iter().filter(|&&k| k == j).count());
    }
    let f = (0..200).filter(|&i| g.neighbor(g.neighbor(i)) == i).count();
    assert_eq!(s.f_n, f);
}

#[test]
fn distances_match_naive_quadrature() {
    let (n, p) = (50, 30);
    let pts: Vec<f64> = (0..p).map(|j| (j as f64 / (p - 1) as f64).powf(1.7)).collect();
    let grid = Grid::new(pts.clone()).unwrap();
    let base = random_curves(n, p, 5);
    let x = FunctionalSample::new(base.as_slice().to_vec(), n, grid.clone()).unwrap();
    for block in [1, 7, 64] {
        let d = distance_matrix_with(&x, DistanceOptions { block, ..Default::default() }).unwrap();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (x.curve(i), x.curve(j));
                let mut acc = 0.0;
                for k in 0..p - 1 {
                    let lo = (a[k] - b[k]).powi(2);
                    let hi = (a[k + 1] - b[k + 1]).powi(2);
                    acc += 0.5 * (pts[k + 1] - pts[k]) * (lo + hi);
                }
                let naive = acc.sqrt();
                assert!((d.get(i, j) - naive).abs() <= 1e-12 * naive.max(1.0));
                if i != j {
                    assert_eq!(d.get(i, j), l2_distance(a, b, &grid).unwrap());
                }
            }
        }
    }
}

#[test]
fn distance_matrix_is_thread_count_independent() {
    let x = random_curves(120, 40, 9);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| distance_matrix(&x).unwrap());
    let b = wide.install(|| distance_matrix(&x).unwrap());
    assert_eq!(a.as_slice(), b.as_slice());
}
