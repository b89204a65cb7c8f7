//! Constant-time weighted sampling: alias tables for edges and for the
//! negative-sampling noise distribution.

use rand::Rng;

use crate::data::PointId;
use crate::error::{Error, Result};
use crate::weighting::WeightedGraph;

/// Exponent applied to vertex degrees in the noise distribution.
pub const NOISE_EXPONENT: f64 = 0.75;
/// Rejection attempts before [`NoiseDistribution::sample_negative`] scans.
const MAX_REDRAWS: usize = 100;

/// One column of an alias table: yields `own` with probability `prob`,
/// otherwise `alias`. Payloads sit next to the threshold so a draw touches
/// a single cache line.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Column<T> {
    prob: f64,
    own: T,
    alias: T,
}

#[inline]
fn draw<T: Copy, R: Rng + ?Sized>(columns: &[Column<T>], rng: &mut R) -> T {
    let c = &columns[rng.random_range(0..columns.len())];
    if rng.random::<f64>() < c.prob {
        c.own
    } else {
        c.alias
    }
}

/// Exact draw probabilities, accumulated by `index(payload)`.
fn stationary_by<T: Copy>(
    columns: &[Column<T>],
    n_out: usize,
    index: impl Fn(T) -> usize,
) -> Vec<f64> {
    let n = columns.len() as f64;
    let mut out = vec![0.0; n_out];
    for c in columns {
        out[index(c.own)] += c.prob / n;
        if c.prob < 1.0 {
            out[index(c.alias)] += (1.0 - c.prob) / n;
        }
    }
    out
}

/// Walker/Vose alias table.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    columns: Vec<Column<u32>>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput(
                "alias table needs at least one weight".into(),
            ));
        }
        if weights.len() > u32::MAX as usize {
            return Err(Error::InvalidInput(
                "too many weights for an alias table".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("all weights are zero".into()));
        }
        let n = weights.len();
        let scale = n as f64 / total;
        let mut prob: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<u32>, Vec<u32>) =
            (0..n as u32).partition(|&k| prob[k as usize] < 1.0);

        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            large.pop();
            alias[s as usize] = l;
            let rest = (prob[l as usize] + prob[s as usize]) - 1.0;
            prob[l as usize] = rest;
            if rest < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        // Leftovers differ from 1 only by rounding.
        for k in small.into_iter().chain(large) {
            prob[k as usize] = 1.0;
            alias[k as usize] = k;
        }
        let columns = prob
            .into_iter()
            .zip(alias)
            .enumerate()
            .map(|(k, (prob, alias))| Column {
                prob,
                own: k as u32,
                alias,
            })
            .collect();
        Ok(Self { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Acceptance threshold of each column.
    pub fn prob(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.prob).collect()
    }

    /// Fallback index of each column.
    pub fn alias(&self) -> Vec<u32> {
        self.columns.iter().map(|c| c.alias).collect()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.columns, rng) as usize
    }

    /// Exact probability of drawing each index, read off the table.
    pub fn stationary(&self) -> Vec<f64> {
        stationary_by(&self.columns, self.columns.len(), |k| k as usize)
    }

    fn with_payload<T: Copy>(&self, payload: impl Fn(u32) -> T) -> Vec<Column<T>> {
        self.columns
            .iter()
            .map(|c| Column {
                prob: c.prob,
                own: payload(c.own),
                alias: payload(c.alias),
            })
            .collect()
    }
}

/// Free-function form of [`AliasTable::new`].
pub fn build_alias(weights: &[f64]) -> Result<AliasTable> {
    AliasTable::new(weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeRef {
    index: u32,
    source: u32,
    target: u32,
}

/// Draws ordered edges of a [`WeightedGraph`] in proportion to their weight.
///
/// The graph stores each undirected edge in both directions with equal
/// weight, so drawing an ordered edge is drawing an undirected edge and an
/// orientation uniformly.
#[derive(Debug, Clone)]
pub struct EdgeSampler {
    columns: Vec<Column<EdgeRef>>,
}

impl EdgeSampler {
    pub fn new(graph: &WeightedGraph) -> Result<Self> {
        if graph.is_empty() {
            return Err(Error::InvalidInput("graph has no edges".into()));
        }
        let table = AliasTable::new(graph.weights())?;
        let columns = table.with_payload(|e| {
            let (s, t, _) = graph.edge(e as usize);
            EdgeRef {
                index: e,
                source: s.0,
                target: t.0,
            }
        });
        Ok(Self { columns })
    }

    /// Index of a drawn edge.
    #[inline]
    pub fn sample_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.columns, rng).index as usize
    }

    /// Endpoints of a drawn edge; same draw as [`Self::sample_edge`].
    #[inline]
    pub fn sample_endpoints<R: Rng + ?Sized>(&self, rng: &mut R) -> (PointId, PointId) {
        let e = draw(&self.columns, rng);
        (PointId(e.source), PointId(e.target))
    }

    /// Exact probability of drawing each edge index.
    pub fn stationary(&self) -> Vec<f64> {
        stationary_by(&self.columns, self.columns.len(), |e| e.index as usize)
    }
}

/// `P_n(j) ∝ d_j^0.75` over vertices with positive degree.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    columns: Vec<Column<PointId>>,
    vertices: Vec<PointId>,
}

impl NoiseDistribution {
    pub fn new(graph: &WeightedGraph) -> Result<Self> {
        Self::from_degrees(graph.noise_degree())
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self> {
        let (vertices, weights): (Vec<PointId>, Vec<f64>) = degrees
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(v, d)| (PointId::from(v), d.powf(NOISE_EXPONENT)))
            .unzip();
        if vertices.is_empty() {
            return Err(Error::InvalidInput("no vertex has positive degree".into()));
        }
        let columns = AliasTable::new(&weights)?.with_payload(|k| vertices[k as usize]);
        Ok(Self { columns, vertices })
    }

    /// Vertices with positive weight, in id order.
    pub fn vertices(&self) -> &[PointId] {
        &self.vertices
    }

    /// Exact sampling probability per vertex id (zero for isolated vertices).
    pub fn probabilities(&self, n_vertices: usize) -> Vec<f64> {
        stationary_by(&self.columns, n_vertices, PointId::index)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointId {
        draw(&self.columns, rng)
    }

    /// Draws a vertex other than `source` and `target`, redrawing on
    /// collision. After [`MAX_REDRAWS`] collisions it scans cyclically from a
    /// random start; `None` means no admissible vertex exists.
    pub fn sample_negative<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        source: PointId,
        target: PointId,
    ) -> Option<PointId> {
        for _ in 0..MAX_REDRAWS {
            let v = self.sample(rng);
            if v != source && v != target {
                return Some(v);
            }
        }
        let n = self.vertices.len();
        let start = rng.random_range(0..n);
        (0..n)
            .map(|off| self.vertices[(start + off) % n])
            .find(|&v| v != source && v != target)
    }
}
