//! Approximate KNN graphs and neighbor-exploring refinement.
//!
//! Refinement proposes every neighbor of a neighbor as a candidate. Each
//! point's bounded heap is seeded with its previous list, so recall against
//! the exact graph never decreases from one pass to the next.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{squared_distance_unchecked, DataMatrix, PointId};
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::rptree::{build_forest, knn_from_forest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: PointId,
    pub dist2: f64,
}

impl Neighbor {
    /// Orders by squared distance, then by id. Both the refinement heaps and
    /// the exact oracle use this rule.
    #[inline]
    pub fn cmp_closer(a: &Neighbor, b: &Neighbor) -> Ordering {
        a.dist2.total_cmp(&b.dist2).then(a.id.cmp(&b.id))
    }
}

/// Heap entry: the max element is the current worst neighbor.
#[derive(Clone, Copy)]
struct Farthest(Neighbor);

impl PartialEq for Farthest {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Farthest {}
impl PartialOrd for Farthest {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Farthest {
    fn cmp(&self, other: &Self) -> Ordering {
        Neighbor::cmp_closer(&self.0, &other.0)
    }
}

/// Max-heap holding at most `capacity` of the closest neighbors pushed.
pub(crate) struct BoundedHeap {
    heap: BinaryHeap<Farthest>,
    capacity: usize,
}

impl BoundedHeap {
    pub(crate) fn new(capacity: usize) -> Self {
        Self {
            heap: BinaryHeap::with_capacity(capacity + 1),
            capacity,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, n: Neighbor) {
        if self.heap.len() == self.capacity {
            match self.heap.peek() {
                Some(worst) if Neighbor::cmp_closer(&n, &worst.0) == Ordering::Less => {}
                _ => return,
            }
        }
        self.heap.push(Farthest(n));
        if self.heap.len() > self.capacity {
            self.heap.pop();
        }
    }

    pub(crate) fn into_sorted(self) -> Vec<Neighbor> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|f| f.0)
            .collect()
    }
}

/// Per-point neighbor lists of capacity `k`, each sorted ascending by
/// `(dist2, id)` with no self-loops and no duplicate ids.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLists {
    k: usize,
    lists: Vec<Vec<Neighbor>>,
}

impl NeighborLists {
    pub(crate) fn from_lists_unchecked(k: usize, lists: Vec<Vec<Neighbor>>) -> Self {
        Self { k, lists }
    }

    /// Builds lists and checks the structural invariants (ordering, capacity,
    /// no self-loops, no duplicates, ids in range).
    pub fn from_lists(k: usize, lists: Vec<Vec<Neighbor>>) -> Result<Self> {
        let out = Self { k, lists };
        out.validate_structure()?;
        Ok(out)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, i: usize) -> &[Neighbor] {
        &self.lists[i]
    }

    pub fn lists(&self) -> &[Vec<Neighbor>] {
        &self.lists
    }

    pub fn ids(&self, i: usize) -> Vec<PointId> {
        self.lists[i].iter().map(|n| n.id).collect()
    }

    pub fn n_edges(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    fn validate_structure(&self) -> Result<()> {
        let n = self.lists.len();
        for (i, list) in self.lists.iter().enumerate() {
            if list.len() > self.k {
                return Err(Error::InvalidInput(format!(
                    "point {i} has {} neighbors, capacity is {}",
                    list.len(),
                    self.k
                )));
            }
            for n_ in list {
                if n_.id.index() >= n {
                    return Err(Error::InvalidInput(format!(
                        "point {i} lists out-of-range neighbor {}",
                        n_.id
                    )));
                }
                if n_.id.index() == i {
                    return Err(Error::InvalidInput(format!("point {i} lists itself")));
                }
                if !(n_.dist2 >= 0.0 && n_.dist2.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "point {i} has invalid distance {}",
                        n_.dist2
                    )));
                }
            }
            for w in list.windows(2) {
                if Neighbor::cmp_closer(&w[0], &w[1]) != Ordering::Less {
                    return Err(Error::InvalidInput(format!(
                        "list of point {i} is not strictly ascending or has duplicates"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Structural checks plus exact agreement of every stored distance with
    /// a recomputation from `data`.
    pub fn validate(&self, data: &DataMatrix) -> Result<()> {
        if self.lists.len() != data.n_points() {
            return Err(Error::InvalidInput(format!(
                "{} lists for {} points",
                self.lists.len(),
                data.n_points()
            )));
        }
        self.validate_structure()?;
        for (i, list) in self.lists.iter().enumerate() {
            for n_ in list {
                let d = data.dist2(i, n_.id.index());
                if d != n_.dist2 {
                    return Err(Error::InvalidInput(format!(
                        "stored distance {} for ({i},{}) differs from {d}",
                        n_.dist2, n_.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Text dump, one line per point: `id count (neighbor,dist2) ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, list) in self.lists.iter().enumerate() {
            write!(out, "{i} {}", list.len()).unwrap();
            for n_ in list {
                write!(out, " ({},{})", n_.id, n_.dist2).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`NeighborLists::to_text`] output.
    pub fn from_text(text: &str, k: usize) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::InvalidInput(format!("line {line}: {what}"));
        let mut lists = Vec::new();
        for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let id: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(lineno, "missing point id"))?;
            if id != lists.len() {
                return Err(bad(lineno, "point ids must be consecutive from 0"));
            }
            let count: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(lineno, "missing neighbor count"))?;
            let mut list = Vec::with_capacity(count);
            for tok in tokens {
                let inner = tok
                    .strip_prefix('(')
                    .and_then(|t| t.strip_suffix(')'))
                    .ok_or_else(|| bad(lineno, "expected (neighbor,dist2)"))?;
                let (a, b) = inner
                    .split_once(',')
                    .ok_or_else(|| bad(lineno, "expected (neighbor,dist2)"))?;
                let nid: u32 = a.parse().map_err(|_| bad(lineno, "bad neighbor id"))?;
                let dist2: f64 = b.parse().map_err(|_| bad(lineno, "bad distance"))?;
                list.push(Neighbor {
                    id: PointId(nid),
                    dist2,
                });
            }
            if list.len() != count {
                return Err(bad(lineno, "neighbor count does not match entries"));
            }
            lists.push(list);
        }
        Self::from_lists(k, lists)
    }
}

/// One neighbor-exploring pass: every point keeps the `k` closest of its own
/// list and its neighbors' lists.
pub fn explore_once(data: &DataMatrix, current: &NeighborLists, k: usize) -> NeighborLists {
    let n = data.n_points();
    let old = &current.lists;
    let lists = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0u32; n],
            |visited, i| {
                // Stamps are i + 1, unique per point, so the buffer never needs clearing.
                let stamp = i as u32 + 1;
                visited[i] = stamp;
                let xi = data.row(i);
                let mut heap = BoundedHeap::new(k);
                for nb in &old[i] {
                    visited[nb.id.index()] = stamp;
                    heap.push(*nb);
                }
                for j in &old[i] {
                    for l in &old[j.id.index()] {
                        let li = l.id.index();
                        if visited[li] == stamp {
                            continue;
                        }
                        visited[li] = stamp;
                        heap.push(Neighbor {
                            id: l.id,
                            dist2: squared_distance_unchecked(xi, data.row(li)),
                        });
                    }
                }
                heap.into_sorted()
            },
        )
        .collect();
    NeighborLists { k, lists }
}

/// Tunables for KNN graph construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    /// Number of random projection trees.
    pub trees: usize,
    /// Neighbors per point.
    pub k: usize,
    /// Neighbor-exploring passes.
    pub iterations: usize,
    /// Target perplexity for edge weighting.
    pub perplexity: f64,
    /// Leaf size threshold; `None` means `max(k, 32)`.
    pub leaf_capacity: Option<usize>,
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            trees: 15,
            k: 150,
            iterations: 1,
            perplexity: 50.0,
            leaf_capacity: None,
            seed: 0,
        }
    }
}

impl GraphConfig {
    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity.unwrap_or(self.k.max(32))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidConfig("trees must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.perplexity > 1.0 && self.perplexity.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "perplexity must be a finite value > 1, got {}",
                self.perplexity
            )));
        }
        if self.leaf_capacity == Some(0) {
            return Err(Error::InvalidConfig("leaf capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// Forest search followed by `cfg.iterations` exploring passes.
pub fn build_knn_graph(data: &DataMatrix, cfg: &GraphConfig) -> Result<NeighborLists> {
    cfg.validate()?;
    let forest = build_forest(
        data,
        cfg.trees,
        cfg.leaf_capacity(),
        RngState::new(cfg.seed),
    )?;
    let mut knn = knn_from_forest(&forest, data, cfg.k)?;
    for _ in 0..cfg.iterations {
        knn = explore_once(data, &knn, cfg.k);
    }
    Ok(knn)
}
