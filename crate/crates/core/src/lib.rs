//! Visualization of large high-dimensional point sets in two stages.
//!
//! 1. [`knn::build_knn_graph`] builds an approximate K-nearest-neighbor
//!    graph from a random projection forest ([`rptree`]) refined by
//!    neighbor exploring.
//! 2. [`weighting::weigh_graph`] turns it into a symmetric weighted graph
//!    and [`layout::train`] embeds that graph in 2 or 3 dimensions by
//!    maximizing an edge likelihood with negative sampling, using
//!    edge-sampled asynchronous SGD.
//!
//! [`eval`] holds the exact oracles and quality metrics used to check both
//! stages.

pub mod data;
pub mod error;
pub mod eval;
pub mod knn;
pub mod layout;
pub mod rng;
pub mod rptree;
pub mod sampler;
pub mod synthetic;
pub mod weighting;

pub use data::{squared_distance, DataMatrix, PointId};
pub use error::{Error, Result};
pub use eval::{brute_force_knn, knn_classify_accuracy, recall, LabeledSet, Metrics, RecallReport};
pub use knn::{build_knn_graph, explore_once, GraphConfig, Neighbor, NeighborLists};
pub use layout::{
    train, train_with_report, Embedding, LayoutConfig, LinkFunction, SampleBudget, TrainReport,
};
pub use rng::RngState;
pub use rptree::{build_forest, candidates_for, knn_from_forest, Forest};
pub use sampler::{AliasTable, EdgeSampler, NoiseDistribution};
pub use weighting::{calibrate_sigma, weigh_graph, WeightedGraph};
