//! Exact oracles and quality metrics: brute-force KNN, graph recall and
//! leave-one-out KNN classification accuracy on an embedding.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::{squared_distance_unchecked, DataMatrix, PointId};
use crate::error::{Error, Result};
use crate::knn::{BoundedHeap, Neighbor, NeighborLists};
use crate::layout::Embedding;

/// Above this many points the quadratic oracle logs a warning.
pub const BRUTE_FORCE_WARN_POINTS: usize = 100_000;

/// Exact `k` nearest neighbors, ties broken by smaller id.
pub fn brute_force_knn(data: &DataMatrix, k: usize) -> Result<NeighborLists> {
    let n = data.n_points();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "k = {k} must be in [1, {n}) for {n} points"
        )));
    }
    if n > BRUTE_FORCE_WARN_POINTS {
        log::warn!("exact KNN over {n} points is quadratic and may take a long time");
    }
    // Query rows are processed in blocks so each candidate row is read once
    // per block rather than once per query.
    const BLOCK: usize = 32;
    let blocks: Vec<Vec<Vec<Neighbor>>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let queries = b * BLOCK..((b + 1) * BLOCK).min(n);
            let mut heaps: Vec<BoundedHeap> =
                queries.clone().map(|_| BoundedHeap::new(k)).collect();
            for (j, xj) in data.rows().enumerate() {
                for (heap, i) in heaps.iter_mut().zip(queries.clone()) {
                    if j != i {
                        heap.push(Neighbor {
                            id: PointId::from(j),
                            dist2: squared_distance_unchecked(data.row(i), xj),
                        });
                    }
                }
            }
            heaps.into_iter().map(BoundedHeap::into_sorted).collect()
        })
        .collect();
    let lists = blocks.into_iter().flatten().collect();
    Ok(NeighborLists::from_lists_unchecked(k, lists))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallReport {
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub k: usize,
    pub n: usize,
}

/// Fraction of each point's exact neighbors present in its approximate list.
pub fn recall(approx: &NeighborLists, exact: &NeighborLists) -> Result<RecallReport> {
    if approx.n_points() != exact.n_points() || approx.k() != exact.k() {
        return Err(Error::InvalidInput(format!(
            "recall needs matching shapes, got n={} k={} vs n={} k={}",
            approx.n_points(),
            approx.k(),
            exact.n_points(),
            exact.k()
        )));
    }
    let k = exact.k();
    let per_point: Vec<f64> = (0..exact.n_points())
        .map(|i| {
            let truth = exact.list(i);
            let hits = approx
                .list(i)
                .iter()
                .filter(|a| truth.iter().any(|t| t.id == a.id))
                .count();
            hits as f64 / k as f64
        })
        .collect();
    let mean = per_point.iter().sum::<f64>() / per_point.len().max(1) as f64;
    Ok(RecallReport {
        per_point,
        mean,
        k,
        n: exact.n_points(),
    })
}

/// Per-point class labels, densely numbered in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    ids: Vec<u32>,
    names: Vec<String>,
}

impl LabeledSet {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut names = Vec::new();
        let ids = tokens
            .into_iter()
            .map(|t| {
                let t = t.as_ref();
                *index.entry(t.to_string()).or_insert_with(|| {
                    names.push(t.to_string());
                    (names.len() - 1) as u32
                })
            })
            .collect();
        Self { ids, names }
    }

    pub fn from_ids(ids: &[u32]) -> Self {
        Self::from_tokens(ids.iter().map(u32::to_string))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn n_classes(&self) -> usize {
        self.names.len()
    }

    /// Original token of class `id`.
    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    /// Original token for every point.
    pub fn tokens(&self) -> Vec<String> {
        self.ids
            .iter()
            .map(|&i| self.names[i as usize].clone())
            .collect()
    }
}

/// Leave-one-out accuracy of a `k`-NN majority vote in embedding space.
/// Neighbor ties go to the smaller id, vote ties to the smaller label id.
pub fn knn_classify_accuracy(embedding: &Embedding, labels: &LabeledSet, k: usize) -> Result<f64> {
    let n = embedding.n_points();
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} labels for {n} embedded points",
            labels.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!("k = {k} must be in [1, {n})")));
    }
    let dim = embedding.dim();
    let coords = embedding.coords();
    let classes = labels.n_classes();
    let correct: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = &coords[i * dim..(i + 1) * dim];
            let mut heap = BoundedHeap::new(k);
            for j in (0..n).filter(|&j| j != i) {
                heap.push(Neighbor {
                    id: PointId::from(j),
                    dist2: squared_distance_unchecked(yi, &coords[j * dim..(j + 1) * dim]),
                });
            }
            let mut votes = vec![0usize; classes];
            for nb in heap.into_sorted() {
                votes[labels.ids()[nb.id.index()] as usize] += 1;
            }
            // max_by_key returns the last maximum; iterate in reverse to prefer smaller ids.
            let predicted = (0..classes).rev().max_by_key(|&c| votes[c]).unwrap_or(0);
            usize::from(predicted as u32 == labels.ids()[i])
        })
        .sum();
    Ok(correct as f64 / n as f64)
}

/// Quality summary written as one JSON line.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mean_recall: Option<f64>,
    pub knn_accuracy: Option<f64>,
    pub k: usize,
    pub n: usize,
}

impl Metrics {
    /// `{"mean_recall": r, "knn_accuracy": a, "k": k, "n": n}`; absent or
    /// non-finite values are written as `null`.
    pub fn to_json_line(&self) -> String {
        let num = |v: Option<f64>| match v {
            Some(x) if x.is_finite() => format!("{x}"),
            _ => "null".to_string(),
        };
        format!(
            "{{\"mean_recall\": {}, \"knn_accuracy\": {}, \"k\": {}, \"n\": {}}}",
            num(self.mean_recall),
            num(self.knn_accuracy),
            self.k,
            self.n
        )
    }
}
