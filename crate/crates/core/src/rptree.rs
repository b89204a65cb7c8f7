//! Random projection forests.
//!
//! Each internal node splits its subset by the perpendicular bisector of two
//! member points drawn without replacement. Points whose projection equals the
//! offset go right. A point's nearest-neighbor candidates are the members of
//! the leaf it lands in, unioned over all trees; there is no backtracking.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::data::{squared_distance_unchecked, DataMatrix, PointId};
use crate::error::{Error, Result};
use crate::knn::{Neighbor, NeighborLists};
use crate::rng::{Rng, RngState};

/// Random attempts at finding a usable split before falling back to a scan.
const SPLIT_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitNode {
    /// Difference of the two sampled points, `a − b`.
    pub normal: Vec<f32>,
    /// `⟨normal, (a + b) / 2⟩`.
    pub offset: f64,
    pub left: usize,
    pub right: usize,
}

impl SplitNode {
    #[inline]
    pub fn goes_left(&self, p: &[f32]) -> bool {
        dot(&self.normal, p) < self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafNode {
    pub members: Vec<PointId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split(SplitNode),
    Leaf(LeafNode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    /// Node index of the leaf holding each point.
    leaf_of: Vec<u32>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &LeafNode> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(leaf) => Some(leaf),
            Node::Split(_) => None,
        })
    }

    /// Members of the leaf containing `p`, including `p`.
    pub fn leaf_members(&self, p: PointId) -> &[PointId] {
        match &self.nodes[self.leaf_of[p.index()] as usize] {
            Node::Leaf(leaf) => &leaf.members,
            Node::Split(_) => unreachable!("leaf_of points at a split node"),
        }
    }

    /// Descends from the root by the split rule. For build-set points this
    /// agrees with the leaf recorded at build time.
    pub fn descend(&self, p: &[f32]) -> &LeafNode {
        let mut node = &self.nodes[0];
        loop {
            match node {
                Node::Leaf(leaf) => return leaf,
                Node::Split(s) => {
                    node = &self.nodes[if s.goes_left(p) { s.left } else { s.right }];
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    leaf_capacity: usize,
    n_points: usize,
}

impl Forest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }
}

/// Builds `nt` trees; tree `t` draws from `rng.fork(t)`, so the first trees of
/// a larger forest coincide with a smaller forest built from the same state.
pub fn build_forest(
    data: &DataMatrix,
    nt: usize,
    leaf_capacity: usize,
    rng: RngState,
) -> Result<Forest> {
    if nt == 0 {
        return Err(Error::InvalidConfig("number of trees must be >= 1".into()));
    }
    if leaf_capacity == 0 {
        return Err(Error::InvalidConfig("leaf capacity must be >= 1".into()));
    }
    let trees = (0..nt as u64)
        .into_par_iter()
        .map(|t| build_tree(data, leaf_capacity, &mut rng.fork(t).rng()))
        .collect();
    Ok(Forest {
        trees,
        leaf_capacity,
        n_points: data.n_points(),
    })
}

fn build_tree(data: &DataMatrix, leaf_capacity: usize, rng: &mut Rng) -> Tree {
    let n = data.n_points();
    let placeholder = || {
        Node::Leaf(LeafNode {
            members: Vec::new(),
        })
    };
    let mut nodes = vec![placeholder()];
    let mut stack: Vec<(usize, Vec<u32>)> = vec![(0, (0..n as u32).collect())];

    while let Some((slot, members)) = stack.pop() {
        if members.len() > leaf_capacity {
            if let Some((normal, offset, left, right)) = choose_split(data, &members, rng) {
                let l = nodes.len();
                nodes.push(placeholder());
                nodes.push(placeholder());
                nodes[slot] = Node::Split(SplitNode {
                    normal,
                    offset,
                    left: l,
                    right: l + 1,
                });
                stack.push((l + 1, right));
                stack.push((l, left));
                continue;
            }
        }
        nodes[slot] = Node::Leaf(LeafNode {
            members: members.into_iter().map(PointId).collect(),
        });
    }

    let mut leaf_of = vec![u32::MAX; n];
    for (idx, node) in nodes.iter().enumerate() {
        if let Node::Leaf(leaf) = node {
            for p in &leaf.members {
                leaf_of[p.index()] = idx as u32;
            }
        }
    }
    Tree { nodes, leaf_of }
}

type Split = (Vec<f32>, f64, Vec<u32>, Vec<u32>);

/// Picks a bisecting hyperplane, or `None` when the subset holds fewer than
/// two distinct points.
fn choose_split(data: &DataMatrix, members: &[u32], rng: &mut Rng) -> Option<Split> {
    for _ in 0..SPLIT_ATTEMPTS {
        let pair = sample(rng, members.len(), 2);
        let (a, b) = (members[pair.index(0)], members[pair.index(1)]);
        if let Some(split) = try_split(data, members, a, b) {
            return Some(split);
        }
    }
    // Heavy duplication can defeat random sampling; scan for any distinct pair.
    let first = members[0];
    members[1..]
        .iter()
        .find_map(|&other| try_split(data, members, first, other))
}

fn try_split(data: &DataMatrix, members: &[u32], a: u32, b: u32) -> Option<Split> {
    let (pa, pb) = (data.row(a as usize), data.row(b as usize));
    if pa == pb {
        return None;
    }
    let normal: Vec<f32> = pa.iter().zip(pb).map(|(x, y)| x - y).collect();
    let midpoint: Vec<f32> = pa.iter().zip(pb).map(|(x, y)| 0.5 * (x + y)).collect();
    let offset = dot(&normal, &midpoint);
    let (left, right): (Vec<u32>, Vec<u32>) = members
        .iter()
        .partition(|&&m| dot(&normal, data.row(m as usize)) < offset);
    if left.is_empty() || right.is_empty() {
        return None;
    }
    Some((normal, offset, left, right))
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum()
}

/// Union of `p`'s leaf co-members over all trees, without `p`, sorted by id.
pub fn candidates_for(forest: &Forest, p: PointId) -> Vec<PointId> {
    let mut out: Vec<PointId> = forest
        .trees
        .iter()
        .flat_map(|t| t.leaf_members(p).iter().copied())
        .filter(|&q| q != p)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// The `k` nearest candidates of every point, ascending by `(distance, id)`.
pub fn knn_from_forest(forest: &Forest, data: &DataMatrix, k: usize) -> Result<NeighborLists> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if forest.n_points != data.n_points() {
        return Err(Error::InvalidInput(format!(
            "forest covers {} points but data has {}",
            forest.n_points,
            data.n_points()
        )));
    }
    let lists = (0..data.n_points())
        .into_par_iter()
        .map(|i| {
            let p = PointId::from(i);
            let xi = data.row(i);
            let mut cands: Vec<Neighbor> = candidates_for(forest, p)
                .into_iter()
                .map(|q| Neighbor {
                    id: q,
                    dist2: squared_distance_unchecked(xi, data.point(q)),
                })
                .collect();
            if cands.len() > k {
                cands.select_nth_unstable_by(k - 1, Neighbor::cmp_closer);
                cands.truncate(k);
            }
            cands.sort_unstable_by(Neighbor::cmp_closer);
            cands
        })
        .collect();
    Ok(NeighborLists::from_lists_unchecked(k, lists))
}
