//! Shared fixtures for the benchmarks.

use knnvis_core::synthetic::gaussian_mixture;
use knnvis_core::{build_knn_graph, weigh_graph, DataMatrix, GraphConfig, WeightedGraph};

/// A ten-cluster mixture.
pub fn mixture(n: usize, dim: usize, seed: u64) -> DataMatrix {
    gaussian_mixture(n, dim, 10, 1.0, seed).0
}

/// KNN graph of [`mixture`] with `k` neighbors, weighted at perplexity `k / 3`.
pub fn weighted_graph(n: usize, dim: usize, k: usize) -> WeightedGraph {
    let data = mixture(n, dim, 0);
    let cfg = GraphConfig {
        k,
        trees: 8,
        ..GraphConfig::default()
    };
    let knn = build_knn_graph(&data, &cfg).expect("valid config");
    weigh_graph(&knn, (k as f64 / 3.0).max(2.0)).expect("valid graph")
}
