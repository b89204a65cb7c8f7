//! Symmetric edge weights from a KNN graph.
//!
//! Each directed KNN edge gets a Gaussian conditional probability whose
//! bandwidth is tuned per source point to hit a target perplexity. The
//! symmetric weight of an unordered pair is the mean of both directions
//! divided by the number of points, so all ordered weights sum to one.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::PointId;
use crate::error::{Error, Result};
use crate::knn::NeighborLists;

/// Search range for σ².
pub const SIGMA2_MIN: f64 = 1e-20;
pub const SIGMA2_MAX: f64 = 1e20;
const MAX_HALVINGS: usize = 100;
/// Entropy tolerance in bits. Tight enough that recalibration after a
/// rescaling reproduces the probabilities to well below 1e-6.
const ENTROPY_TOL: f64 = 1e-11;

/// Ordered weights below `DEFAULT_WEIGHT_FLOOR / N` are dropped.
pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub sigma: f64,
    /// Normalized conditional probabilities, same order as the input.
    pub probs: Vec<f64>,
    /// `2^H` of `probs`, entropy in bits.
    pub perplexity: f64,
    /// The target could not be reached: either it is at or above the list
    /// length, or the search ran into its σ bounds.
    pub saturated: bool,
}

/// Finds σ such that the perplexity of `p_j ∝ exp(−d_j / 2σ²)` matches `target`.
pub fn calibrate_sigma(dists2: &[f64], target: f64) -> Result<Calibration> {
    if dists2.is_empty() {
        return Err(Error::InvalidInput(
            "cannot calibrate an empty distance list".into(),
        ));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "perplexity target {target} must be positive"
        )));
    }
    if let Some(bad) = dists2.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "invalid squared distance {bad}"
        )));
    }
    let n = dists2.len();
    let min = dists2.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = dists2.iter().map(|d| d - min).collect();
    let all_equal = shifted.iter().all(|&d| d == 0.0);

    if all_equal || target >= n as f64 {
        let sigma = if all_equal { 1.0 } else { SIGMA2_MAX.sqrt() };
        return Ok(Calibration {
            sigma,
            probs: vec![1.0 / n as f64; n],
            perplexity: n as f64,
            saturated: target >= n as f64 || (all_equal && target != n as f64),
        });
    }

    let log_target = target.log2();
    let (mut lo, mut hi) = (SIGMA2_MIN.ln(), SIGMA2_MAX.ln());
    let mut probs = vec![0.0; n];
    let mut sigma2 = 1.0;
    let mut perplexity = 0.0;
    let mut converged = false;
    for _ in 0..MAX_HALVINGS {
        let mid = 0.5 * (lo + hi);
        sigma2 = mid.exp();
        let entropy = conditional_probs(&shifted, sigma2, &mut probs);
        perplexity = entropy.exp2();
        if (entropy - log_target).abs() < ENTROPY_TOL {
            converged = true;
            break;
        }
        if perplexity > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration {
        sigma: sigma2.sqrt(),
        probs,
        perplexity,
        saturated: !converged,
    })
}

/// Fills `probs` and returns the entropy in bits.
fn conditional_probs(shifted: &[f64], sigma2: f64, probs: &mut [f64]) -> f64 {
    let beta = 0.5 / sigma2;
    let mut z = 0.0;
    for (p, d) in probs.iter_mut().zip(shifted) {
        *p = (-beta * d).exp();
        z += *p;
    }
    let mut entropy = 0.0;
    for p in probs.iter_mut() {
        *p /= z;
        if *p > 0.0 {
            entropy -= *p * p.log2();
        }
    }
    entropy
}

/// Symmetric sparse graph with per-vertex noise degrees.
///
/// Stored as CSR over ordered edges: every undirected edge appears as both
/// `(i, j, w)` and `(j, i, w)` with the identical weight value.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n_vertices: usize,
    offsets: Vec<usize>,
    sources: Vec<PointId>,
    targets: Vec<PointId>,
    weights: Vec<f64>,
    noise_degree: Vec<f64>,
}

impl WeightedGraph {
    /// Builds a graph from ordered edges, validating symmetry, positivity and
    /// absence of self-loops and duplicates.
    pub fn from_edges(n_vertices: usize, mut edges: Vec<(PointId, PointId, f64)>) -> Result<Self> {
        for &(i, j, w) in &edges {
            if i.index() >= n_vertices || j.index() >= n_vertices {
                return Err(Error::InvalidInput(format!("edge ({i},{j}) out of range")));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "edge ({i},{j}) has weight {w}"
                )));
            }
        }
        edges.sort_unstable_by_key(|e| (e.0, e.1));
        if edges
            .windows(2)
            .any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::InvalidInput("duplicate edge".into()));
        }
        for &(i, j, w) in &edges {
            match edges.binary_search_by(|e| (e.0, e.1).cmp(&(j, i))) {
                Ok(pos) if edges[pos].2 == w => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "edge ({i},{j}) has no reverse edge of equal weight"
                    )))
                }
            }
        }
        Ok(Self::from_sorted(n_vertices, edges))
    }

    fn from_sorted(n_vertices: usize, edges: Vec<(PointId, PointId, f64)>) -> Self {
        let mut offsets = vec![0usize; n_vertices + 1];
        let mut noise_degree = vec![0.0; n_vertices];
        for &(i, _, w) in &edges {
            offsets[i.index() + 1] += 1;
            noise_degree[i.index()] += w;
        }
        for v in 0..n_vertices {
            offsets[v + 1] += offsets[v];
        }
        let mut sources = Vec::with_capacity(edges.len());
        let mut targets = Vec::with_capacity(edges.len());
        let mut weights = Vec::with_capacity(edges.len());
        for (i, j, w) in edges {
            sources.push(i);
            targets.push(j);
            weights.push(w);
        }
        Self {
            n_vertices,
            offsets,
            sources,
            targets,
            weights,
            noise_degree,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Number of ordered edges (twice the number of undirected edges).
    pub fn n_edges(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn edge(&self, e: usize) -> (PointId, PointId, f64) {
        (self.sources[e], self.targets[e], self.weights[e])
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (PointId, PointId, f64)> + '_ {
        (0..self.weights.len()).map(|e| self.edge(e))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Outgoing `(target, weight)` pairs of `v`, ascending by target.
    pub fn neighbors(&self, v: PointId) -> impl Iterator<Item = (PointId, f64)> + '_ {
        let range = self.offsets[v.index()]..self.offsets[v.index() + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Weight of the ordered edge `(i, j)`, if present.
    pub fn weight(&self, i: PointId, j: PointId) -> Option<f64> {
        let range = self.offsets[i.index()]..self.offsets[i.index() + 1];
        self.targets[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|pos| self.weights[range.start + pos])
    }

    /// Weighted degree `d_j = Σ_i w_ij`.
    pub fn noise_degree(&self) -> &[f64] {
        &self.noise_degree
    }

    /// Edge list dump: `i j w` per ordered edge, weights with 9 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.n_edges() * 24);
        for (i, j, w) in self.edges() {
            writeln!(out, "{i} {j} {w:.8e}").unwrap();
        }
        out
    }

    /// Parses [`WeightedGraph::to_text`] output. Weights that differ between
    /// directions after rounding are rejected.
    pub fn from_text(text: &str, n_vertices: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [i, j, w] => i
                    .parse::<u32>()
                    .ok()
                    .zip(j.parse::<u32>().ok())
                    .zip(w.parse::<f64>().ok()),
                _ => None,
            };
            let ((i, j), w) = parsed
                .ok_or_else(|| Error::InvalidInput(format!("line {lineno}: expected `i j w`")))?;
            edges.push((PointId(i), PointId(j), w));
        }
        Self::from_edges(n_vertices, edges)
    }
}

/// [`weigh_graph_with_floor`] with [`DEFAULT_WEIGHT_FLOOR`].
pub fn weigh_graph(knn: &NeighborLists, perplexity: f64) -> Result<WeightedGraph> {
    weigh_graph_with_floor(knn, perplexity, DEFAULT_WEIGHT_FLOOR)
}

/// Calibrates every point's conditional distribution over its KNN list and
/// symmetrizes: `w_ij = (p_{j|i} + p_{i|j}) / 2N`, a missing reverse edge
/// contributing zero. Weights below `floor / N` are dropped.
pub fn weigh_graph_with_floor(
    knn: &NeighborLists,
    perplexity: f64,
    floor: f64,
) -> Result<WeightedGraph> {
    let n = knn.n_points();
    if perplexity > knn.k() as f64 {
        log::warn!(
            "perplexity {perplexity} exceeds k = {}; conditional distributions saturate to uniform",
            knn.k()
        );
    }
    let directed: Vec<Vec<(PointId, f64)>> = knn
        .lists()
        .par_iter()
        .map(|list| -> Result<Vec<(PointId, f64)>> {
            if list.is_empty() {
                return Ok(Vec::new());
            }
            let d: Vec<f64> = list.iter().map(|nb| nb.dist2).collect();
            let cal = calibrate_sigma(&d, perplexity)?;
            Ok(list.iter().map(|nb| nb.id).zip(cal.probs).collect())
        })
        .collect::<Result<_>>()?;

    let mut triples: Vec<(PointId, PointId, f64)> = Vec::with_capacity(2 * knn.n_edges());
    for (i, row) in directed.iter().enumerate() {
        let i = PointId::from(i);
        for &(j, p) in row {
            triples.push((i, j, p));
            triples.push((j, i, p));
        }
    }
    triples.par_sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let scale = 1.0 / (2.0 * n as f64);
    let cutoff = floor / n as f64;
    let mut edges = Vec::with_capacity(triples.len());
    let mut iter = triples.into_iter().peekable();
    while let Some((i, j, mut p)) = iter.next() {
        // At most two entries per ordered pair: the direct and the mirrored one.
        while let Some(&(i2, j2, q)) = iter.peek() {
            if (i2, j2) != (i, j) {
                break;
            }
            p += q;
            iter.next();
        }
        let w = p * scale;
        if w >= cutoff && w > 0.0 {
            edges.push((i, j, w));
        }
    }
    Ok(WeightedGraph::from_sorted(n, edges))
}
