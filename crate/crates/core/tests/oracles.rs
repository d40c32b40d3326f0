mod common;

use cibnet::prune::eigenvector_centrality;
use common::*;
use nalgebra::{DMatrix, SymmetricEigen};

#[test]
fn projection_matches_dense_cosine() {
    let c = ac1_projection(100, 11);
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn centrality_matches_long_run_reference() {
    let c = ac2_centrality(50, 12);
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn centrality_matches_dense_eigenvector() {
    let mut r = rng(13);
    for _ in 0..50 {
        let net = random_connected_graph(&mut r, 30);
        let n = net.node_count();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for e in &net.edges {
            a[(e.u, e.v)] = e.w;
            a[(e.v, e.u)] = e.w;
        }
        let eig = SymmetricEigen::new(a);
        let top = eig.eigenvalues.imax();
        let mut v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let ours = eigenvector_centrality(&net, 1e-8, 1000).unwrap();
        assert_eq!(discordant_pairs(&ours, &v, 1e-6), 0);
        for (a, b) in ours.iter().zip(&v) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}

#[test]
fn embedding_matches_equal_brute_force() {
    let c = ac4_embedding_matches(40, 14);
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn dbscan_recovers_planted_voices_and_matches_reference() {
    let c = ac7_dbscan(15);
    assert!(c.pass, "{}", c.detail);
}

#[test]
fn statistics() {
    let c = ac8_statistics(16);
    assert!(c.pass, "{}", c.detail);
}
