//! Graph layout by negative-sampled likelihood maximization.
//!
//! Each step draws an ordered edge `(i, j)` in proportion to its weight,
//! pulls `y_i` and `y_j` together, then pushes `y_i` away from `M` vertices
//! drawn from the noise distribution. Edge weights never scale a gradient;
//! sampling frequency carries them. Workers share one coordinate buffer and
//! update it without locks.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::sampler::{EdgeSampler, NoiseDistribution};
use crate::weighting::WeightedGraph;

/// Half-width of the initial coordinate box is `0.5 / INIT_SCALE`.
pub const INIT_SCALE: f64 = 1e3;

/// Probability of an edge as a function of embedding distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkFunction {
    /// `f(x) = 1 / (1 + a x²)`
    InverseQuadratic { a: f64 },
    /// `f(x) = 1 / (1 + exp(x²))`
    Sigmoid,
}

impl Default for LinkFunction {
    fn default() -> Self {
        LinkFunction::InverseQuadratic { a: 1.0 }
    }
}

impl LinkFunction {
    /// `f` evaluated at squared distance `d2`.
    #[inline]
    pub fn prob(&self, d2: f64) -> f64 {
        match *self {
            LinkFunction::InverseQuadratic { a } => 1.0 / (1.0 + a * d2),
            LinkFunction::Sigmoid => 1.0 / (1.0 + d2.exp()),
        }
    }

    /// `log f`.
    #[inline]
    pub fn log_prob(&self, d2: f64) -> f64 {
        match *self {
            LinkFunction::InverseQuadratic { a } => -(a * d2).ln_1p(),
            LinkFunction::Sigmoid => -softplus(d2),
        }
    }

    /// `log (1 − f)`; `−∞` at `d2 = 0` for the inverse-quadratic link.
    #[inline]
    pub fn log_one_minus_prob(&self, d2: f64) -> f64 {
        match *self {
            LinkFunction::InverseQuadratic { a } => (a * d2).ln() - (a * d2).ln_1p(),
            LinkFunction::Sigmoid => -softplus(-d2),
        }
    }

    /// `c` with `∇_{y_i} log f(‖y_i − y_j‖) = c (y_i − y_j)`.
    #[inline]
    pub fn attraction_coef(&self, d2: f64) -> f64 {
        match *self {
            LinkFunction::InverseQuadratic { a } => -2.0 * a / (1.0 + a * d2),
            LinkFunction::Sigmoid => -2.0 / (1.0 + (-d2).exp()),
        }
    }

    /// `c` with `∇_{y_i} log (1 − f(‖y_i − y_k‖)) = c (y_i − y_k)`, the
    /// inverse-quadratic singularity at `d2 = 0` softened by `epsilon`.
    #[inline]
    pub fn repulsion_coef(&self, d2: f64, epsilon: f64) -> f64 {
        match *self {
            LinkFunction::InverseQuadratic { a } => 2.0 / ((d2 + epsilon) * (1.0 + a * d2)),
            LinkFunction::Sigmoid => 2.0 / (1.0 + d2.exp()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LinkFunction::InverseQuadratic { a } if !(a > 0.0 && a.is_finite()) => Err(
                Error::InvalidConfig(format!("link parameter a must be positive, got {a}")),
            ),
            _ => Ok(()),
        }
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn dist2_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `f(‖yi − yj‖)`.
pub fn edge_probability(link: LinkFunction, yi: &[f64], yj: &[f64]) -> f64 {
    link.prob(dist2_f64(yi, yj))
}

/// Gradients of `log f(‖yi − yj‖)` with respect to `yi` and `yj`, each
/// component clipped to `[−clip, clip]`.
pub fn positive_gradient(
    link: LinkFunction,
    yi: &[f64],
    yj: &[f64],
    clip: f64,
) -> (Vec<f64>, Vec<f64>) {
    let coef = link.attraction_coef(dist2_f64(yi, yj));
    let gi: Vec<f64> = yi
        .iter()
        .zip(yj)
        .map(|(a, b)| (coef * (a - b)).clamp(-clip, clip))
        .collect();
    let gj = gi.iter().map(|g| -g).collect();
    (gi, gj)
}

/// Gradients of `γ log (1 − f(‖yi − yk‖))` with respect to `yi` and `yk`,
/// each component clipped to `[−clip, clip]`.
pub fn negative_gradient(
    link: LinkFunction,
    yi: &[f64],
    yk: &[f64],
    gamma: f64,
    epsilon: f64,
    clip: f64,
) -> (Vec<f64>, Vec<f64>) {
    let coef = gamma * link.repulsion_coef(dist2_f64(yi, yk), epsilon);
    let gi: Vec<f64> = yi
        .iter()
        .zip(yk)
        .map(|(a, b)| (coef * (a - b)).clamp(-clip, clip))
        .collect();
    let gk = gi.iter().map(|g| -g).collect();
    (gi, gk)
}

/// `n_points` coordinate vectors of dimension `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    n_points: usize,
    dim: usize,
    coords: Vec<f32>,
}

impl Embedding {
    pub fn new(n_points: usize, dim: usize, coords: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "embedding dimension must be >= 1".into(),
            ));
        }
        if coords.len() != n_points * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                n_points * dim,
                coords.len()
            )));
        }
        Ok(Self {
            n_points,
            dim,
            coords,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f32] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| f64::from(c)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// Text output: a `N s` header, then one `label c_1 ... c_s` line per
    /// point with six decimals. Labels default to the zero-based index.
    pub fn to_text(&self, labels: Option<&[String]>) -> Result<String> {
        if let Some(l) = labels {
            if l.len() != self.n_points {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    l.len(),
                    self.n_points
                )));
            }
        }
        let mut out = String::with_capacity(16 + self.n_points * (8 + 12 * self.dim));
        writeln!(out, "{} {}", self.n_points, self.dim).unwrap();
        for i in 0..self.n_points {
            match labels {
                Some(l) => out.push_str(&l[i]),
                None => write!(out, "{i}").unwrap(),
            }
            for c in self.point(i) {
                write!(out, " {c:.6}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Uniform coordinates in `[−0.5/INIT_SCALE, 0.5/INIT_SCALE]`.
pub fn initialize_embedding(n: usize, dim: usize, rng: RngState) -> Embedding {
    let half = (0.5 / INIT_SCALE) as f32;
    let mut r = rng.rng();
    let coords = (0..n * dim).map(|_| r.random_range(-half..=half)).collect();
    Embedding {
        n_points: n,
        dim,
        coords,
    }
}

/// How many edge samples to draw in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleBudget {
    Total(u64),
    PerNode(u64),
}

impl SampleBudget {
    pub fn total(&self, n_points: usize) -> u64 {
        match *self {
            SampleBudget::Total(t) => t,
            SampleBudget::PerNode(per) => per.saturating_mul(n_points as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutConfig {
    /// Output dimension.
    pub dim: usize,
    pub link: LinkFunction,
    /// Negative samples per edge sample.
    pub negatives: usize,
    /// Weight of the negative-edge term.
    pub gamma: f64,
    pub samples: SampleBudget,
    /// Initial learning rate; decays linearly to zero over the budget.
    pub initial_rate: f64,
    pub workers: usize,
    /// Per-component gradient bound.
    pub clip: f64,
    /// Softens the repulsion singularity at zero distance.
    pub epsilon: f64,
    pub seed: u64,
    /// Record the mean per-sample objective in this many buckets (0 = off).
    pub trace_buckets: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            link: LinkFunction::default(),
            negatives: 5,
            gamma: 7.0,
            samples: SampleBudget::PerNode(10_000),
            initial_rate: 1.0,
            workers: 1,
            clip: 5.0,
            epsilon: 0.1,
            seed: 0,
            trace_buckets: 0,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dim == 0 {
            return bad("output dimension must be >= 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if !(self.initial_rate > 0.0 && self.initial_rate.is_finite()) {
            return bad(format!("rate must be positive, got {}", self.initial_rate));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return bad(format!("clip must be positive, got {}", self.clip));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            ));
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        Ok(())
    }

    /// `ρ_t = ρ (1 − t/T)`.
    #[inline]
    pub fn rate_at(&self, t: u64, total: u64) -> f64 {
        self.initial_rate * (1.0 - t as f64 / total as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub embedding: Embedding,
    pub total_samples: u64,
    /// Mean per-sample objective `log f(d_ij) + Σ_k γ log(1 − f(d_ik))` per
    /// bucket of consecutive sample indices; empty unless requested.
    pub trace: Vec<f64>,
}

/// Coordinates shared between workers. Each component is an `f32` behind an
/// `AtomicU32`, so a concurrent reader sees either the old or the new value.
struct SharedCoords {
    dim: usize,
    cells: Vec<AtomicU32>,
}

impl SharedCoords {
    fn new(e: &Embedding) -> Self {
        Self {
            dim: e.dim,
            cells: e
                .coords
                .iter()
                .map(|c| AtomicU32::new(c.to_bits()))
                .collect(),
        }
    }

    #[inline]
    fn load(&self, v: usize, out: &mut [f64]) {
        let row = &self.cells[v * self.dim..(v + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(row) {
            *o = f64::from(f32::from_bits(c.load(Ordering::Relaxed)));
        }
    }

    #[inline]
    fn store(&self, v: usize, vals: &[f64]) {
        let row = &self.cells[v * self.dim..(v + 1) * self.dim];
        for (c, x) in row.iter().zip(vals) {
            c.store((*x as f32).to_bits(), Ordering::Relaxed);
        }
    }

    fn into_embedding(self) -> Embedding {
        let n = self.cells.len() / self.dim;
        Embedding {
            n_points: n,
            dim: self.dim,
            coords: self
                .cells
                .into_iter()
                .map(|c| f32::from_bits(c.into_inner()))
                .collect(),
        }
    }
}

/// Lays out `graph` from a fresh random initialization.
pub fn train(graph: &WeightedGraph, cfg: &LayoutConfig) -> Result<Embedding> {
    Ok(train_with_report(graph, cfg)?.embedding)
}

pub fn train_with_report(graph: &WeightedGraph, cfg: &LayoutConfig) -> Result<TrainReport> {
    let init = initialize_embedding(graph.n_vertices(), cfg.dim, RngState::new(cfg.seed).fork(0));
    train_from(graph, cfg, init)
}

/// Runs the optimizer starting from `initial`.
///
/// Sample `t` (0-based, global) uses rate `ρ (1 − t/T)`. With `W` workers,
/// worker `w` handles samples `w, w + W, w + 2W, ...` from its own stream;
/// only `W = 1` is reproducible bit for bit.
pub fn train_from(
    graph: &WeightedGraph,
    cfg: &LayoutConfig,
    initial: Embedding,
) -> Result<TrainReport> {
    cfg.validate()?;
    if initial.n_points != graph.n_vertices() || initial.dim != cfg.dim {
        return Err(Error::InvalidInput(format!(
            "initial embedding is {}x{}, expected {}x{}",
            initial.n_points,
            initial.dim,
            graph.n_vertices(),
            cfg.dim
        )));
    }
    let edges = EdgeSampler::new(graph)?;
    let noise = NoiseDistribution::new(graph)?;
    let total = cfg.samples.total(graph.n_vertices());
    if total == 0 {
        return Err(Error::InvalidConfig("sample budget must be >= 1".into()));
    }
    let shared = SharedCoords::new(&initial);
    let root = RngState::new(cfg.seed);
    let workers = cfg.workers as u64;

    let ctx = WorkerContext {
        edges: &edges,
        noise: &noise,
        cfg,
        coords: &shared,
        total,
        stride: workers,
    };
    let traces: Vec<Option<Vec<(f64, u64)>>> = if workers == 1 {
        vec![ctx.run(0, root.fork(1))]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let ctx = &ctx;
                    scope.spawn(move || ctx.run(w, root.fork(1 + w)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("layout worker panicked"))
                .collect()
        })
    };

    let embedding = shared.into_embedding();
    if let Some(pos) = embedding.coords.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite {
            point: pos / cfg.dim,
            component: pos % cfg.dim,
            samples: total,
        });
    }

    let mut trace = Vec::new();
    if cfg.trace_buckets > 0 {
        let mut sums = vec![(0.0, 0u64); cfg.trace_buckets];
        for t in traces.into_iter().flatten() {
            for (acc, (s, c)) in sums.iter_mut().zip(t) {
                acc.0 += s;
                acc.1 += c;
            }
        }
        trace = sums
            .into_iter()
            .map(|(s, c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect();
    }
    Ok(TrainReport {
        embedding,
        total_samples: total,
        trace,
    })
}

struct WorkerContext<'a> {
    edges: &'a EdgeSampler,
    noise: &'a NoiseDistribution,
    cfg: &'a LayoutConfig,
    coords: &'a SharedCoords,
    total: u64,
    stride: u64,
}

impl WorkerContext<'_> {
    fn run(&self, worker: u64, stream: RngState) -> Option<Vec<(f64, u64)>> {
        let cfg = self.cfg;
        let dim = cfg.dim;
        let link = cfg.link;
        let mut rng = stream.rng();
        let (mut yi, mut yj, mut yk) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
        let mut acc = vec![0.0; dim];
        let mut trace = (cfg.trace_buckets > 0).then(|| vec![(0.0, 0u64); cfg.trace_buckets]);

        let mut t = worker;
        while t < self.total {
            let rate = cfg.rate_at(t, self.total);
            let (i, j) = self.edges.sample_endpoints(&mut rng);
            let (i, j) = (i.index(), j.index());
            self.coords.load(i, &mut yi);
            self.coords.load(j, &mut yj);
            acc.iter_mut().for_each(|a| *a = 0.0);

            let d2 = dist2_f64(&yi, &yj);
            let mut objective = if trace.is_some() {
                link.log_prob(d2)
            } else {
                0.0
            };
            let coef = link.attraction_coef(d2);
            for c in 0..dim {
                let g = (coef * (yi[c] - yj[c])).clamp(-cfg.clip, cfg.clip);
                acc[c] += g;
                yj[c] -= rate * g;
            }
            self.coords.store(j, &yj);

            for _ in 0..cfg.negatives {
                let Some(k) = self.noise.sample_negative(&mut rng, i.into(), j.into()) else {
                    break;
                };
                let k = k.index();
                self.coords.load(k, &mut yk);
                let d2 = dist2_f64(&yi, &yk);
                if trace.is_some() {
                    objective += cfg.gamma * link.log_one_minus_prob(d2 + cfg.epsilon);
                }
                let coef = cfg.gamma * link.repulsion_coef(d2, cfg.epsilon);
                for c in 0..dim {
                    let g = (coef * (yi[c] - yk[c])).clamp(-cfg.clip, cfg.clip);
                    acc[c] += g;
                    yk[c] -= rate * g;
                }
                self.coords.store(k, &yk);
            }

            for c in 0..dim {
                yi[c] += rate * acc[c].clamp(-cfg.clip, cfg.clip);
            }
            self.coords.store(i, &yi);

            if let Some(tr) = trace.as_mut() {
                let bucket = ((t as u128 * tr.len() as u128) / self.total as u128) as usize;
                tr[bucket].0 += objective;
                tr[bucket].1 += 1;
            }
            t += self.stride;
        }
        trace
    }
}

/// `log (1 − f)` at squared distance `d2`, guarded by `epsilon`.
#[inline]
fn guarded_log_one_minus(link: LinkFunction, d2: f64, epsilon: f64) -> f64 {
    link.log_one_minus_prob(d2 + epsilon)
}

fn row(coords: &[f64], dim: usize, v: usize) -> &[f64] {
    &coords[v * dim..(v + 1) * dim]
}

fn check_coords(graph: &WeightedGraph, coords: &[f64], dim: usize) -> Result<()> {
    if dim == 0 || coords.len() != graph.n_vertices() * dim {
        return Err(Error::InvalidInput(format!(
            "{} coordinates do not describe {} points of dimension {dim}",
            coords.len(),
            graph.n_vertices()
        )));
    }
    Ok(())
}

/// Monte-Carlo estimate of the negative-sampled objective
/// `Σ_(i,j) w_ij [log f(d_ij) + Σ_{m≤M} E_{k~P_n} γ log(1 − f(d_ik))]`,
/// with negatives drawn as in training (never `i` or `j`).
pub fn objective_estimate(
    graph: &WeightedGraph,
    coords: &[f64],
    cfg: &LayoutConfig,
    sample_count: u64,
    rng: RngState,
) -> Result<f64> {
    check_coords(graph, coords, cfg.dim)?;
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample count must be >= 1".into()));
    }
    let edges = EdgeSampler::new(graph)?;
    let noise = NoiseDistribution::new(graph)?;
    let total_weight: f64 = graph.weights().iter().sum();
    let mut r = rng.rng();
    let dim = cfg.dim;
    let mut sum = 0.0;
    for _ in 0..sample_count {
        let (i, j, _) = graph.edge(edges.sample_edge(&mut r));
        let yi = row(coords, dim, i.index());
        let mut term = cfg
            .link
            .log_prob(dist2_f64(yi, row(coords, dim, j.index())));
        for _ in 0..cfg.negatives {
            if let Some(k) = noise.sample_negative(&mut r, i, j) {
                let d2 = dist2_f64(yi, row(coords, dim, k.index()));
                term += cfg.gamma * guarded_log_one_minus(cfg.link, d2, cfg.epsilon);
            }
        }
        sum += term;
    }
    Ok(total_weight * sum / sample_count as f64)
}

/// Exact value of the quantity [`objective_estimate`] estimates: the noise
/// expectation is summed over `P_n` restricted to vertices other than `i`
/// and `j`. Quadratic in the number of vertices.
pub fn exact_sampled_objective(
    graph: &WeightedGraph,
    coords: &[f64],
    cfg: &LayoutConfig,
) -> Result<f64> {
    check_coords(graph, coords, cfg.dim)?;
    let noise = NoiseDistribution::new(graph)?;
    let p_noise = noise.probabilities(graph.n_vertices());
    let dim = cfg.dim;
    let mut total = 0.0;
    for (i, j, w) in graph.edges() {
        let (i, j) = (i.index(), j.index());
        let yi = row(coords, dim, i);
        let mut term = cfg.link.log_prob(dist2_f64(yi, row(coords, dim, j)));
        let mass = 1.0 - p_noise[i] - p_noise[j];
        if mass > 0.0 {
            let mut expect = 0.0;
            for (k, &p) in p_noise.iter().enumerate() {
                if k != i && k != j && p > 0.0 {
                    let d2 = dist2_f64(yi, row(coords, dim, k));
                    expect += p * guarded_log_one_minus(cfg.link, d2, cfg.epsilon);
                }
            }
            term += cfg.negatives as f64 * cfg.gamma * expect / mass;
        }
        total += w * term;
    }
    Ok(total)
}

/// Full graph log-likelihood: `Σ_{(i,j)∈E} w_ij log f(d_ij)` plus
/// `γ Σ log(1 − f(d_ij))` over ordered non-adjacent pairs `i ≠ j`.
/// Returns `−∞` when two non-adjacent points coincide and `epsilon = 0`.
pub fn exact_likelihood(graph: &WeightedGraph, coords: &[f64], cfg: &LayoutConfig) -> Result<f64> {
    check_coords(graph, coords, cfg.dim)?;
    let n = graph.n_vertices();
    let dim = cfg.dim;
    let mut positive = 0.0;
    let mut negative = 0.0;
    let mut adjacent = vec![false; n];
    for i in 0..n {
        let yi = row(coords, dim, i);
        for (j, w) in graph.neighbors(i.into()) {
            adjacent[j.index()] = true;
            positive += w * cfg
                .link
                .log_prob(dist2_f64(yi, row(coords, dim, j.index())));
        }
        for (j, &adj) in adjacent.iter().enumerate() {
            if j != i && !adj {
                let d2 = dist2_f64(yi, row(coords, dim, j));
                negative += guarded_log_one_minus(cfg.link, d2, cfg.epsilon);
            }
        }
        for (j, _) in graph.neighbors(i.into()) {
            adjacent[j.index()] = false;
        }
    }
    Ok(positive + cfg.gamma * negative)
}

/// Unclipped gradient of [`exact_likelihood`].
pub fn exact_likelihood_gradient(
    graph: &WeightedGraph,
    coords: &[f64],
    cfg: &LayoutConfig,
) -> Result<Vec<f64>> {
    check_coords(graph, coords, cfg.dim)?;
    let n = graph.n_vertices();
    let dim = cfg.dim;
    let mut grad = vec![0.0; coords.len()];
    let mut weight_to = vec![0.0; n];
    for i in 0..n {
        for (j, w) in graph.neighbors(i.into()) {
            weight_to[j.index()] = w;
        }
        let yi = row(coords, dim, i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let yj = row(coords, dim, j);
            let d2 = dist2_f64(yi, yj);
            let coef = if weight_to[j] > 0.0 {
                weight_to[j] * cfg.link.attraction_coef(d2)
            } else {
                cfg.gamma * cfg.link.repulsion_coef(d2 + cfg.epsilon, 0.0)
            };
            // The ordered pair (i, j) contributes to both endpoints.
            for c in 0..dim {
                let g = coef * (yi[c] - yj[c]);
                grad[i * dim + c] += g;
                grad[j * dim + c] -= g;
            }
        }
        for (j, _) in graph.neighbors(i.into()) {
            weight_to[j.index()] = 0.0;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PointId;

    const LINKS: [LinkFunction; 3] = [
        LinkFunction::InverseQuadratic { a: 1.0 },
        LinkFunction::InverseQuadratic { a: 2.5 },
        LinkFunction::Sigmoid,
    ];

    fn rel_err(got: &[f64], want: &[f64]) -> f64 {
        let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
        let norm: f64 = want.iter().map(|b| b * b).sum();
        (diff / norm).sqrt()
    }

    /// Central differences of `h(yi)` with step 1e−5.
    fn fd_grad(yi: &[f64], h: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let step = 1e-5;
        (0..yi.len())
            .map(|c| {
                let mut up = yi.to_vec();
                let mut down = yi.to_vec();
                up[c] += step;
                down[c] -= step;
                (h(&up) - h(&down)) / (2.0 * step)
            })
            .collect()
    }

    fn pair_graph() -> WeightedGraph {
        WeightedGraph::from_edges(
            2,
            vec![(PointId(0), PointId(1), 0.5), (PointId(1), PointId(0), 0.5)],
        )
        .unwrap()
    }

    /// Random symmetric graph on `n` vertices.
    fn random_graph(n: usize, extra: usize, seed: u64) -> WeightedGraph {
        let mut rng = RngState::new(seed).rng();
        let mut pairs = std::collections::BTreeMap::new();
        for v in 0..n {
            pairs.insert((v, (v + 1) % n), rng.random_range(0.1..1.0));
        }
        for _ in 0..extra {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a != b {
                pairs.insert((a.min(b), a.max(b)), rng.random_range(0.1..1.0));
            }
        }
        let mut edges = Vec::new();
        for ((a, b), w) in pairs {
            let (a, b) = (a.min(b), a.max(b));
            if edges
                .iter()
                .any(|&(x, y, _)| (x, y) == (PointId::from(a), PointId::from(b)))
            {
                continue;
            }
            edges.push((PointId::from(a), PointId::from(b), w));
            edges.push((PointId::from(b), PointId::from(a), w));
        }
        WeightedGraph::from_edges(n, edges).unwrap()
    }

    fn random_coords(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngState::new(seed).rng();
        (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn edge_probability_examples() {
        let link = LinkFunction::InverseQuadratic { a: 1.0 };
        assert_eq!(edge_probability(link, &[0.3, 0.3], &[0.3, 0.3]), 1.0);
        assert_eq!(edge_probability(link, &[1.0, 0.0], &[0.0, 0.0]), 0.5);
        let link = LinkFunction::InverseQuadratic { a: 2.0 };
        assert!((edge_probability(link, &[3.0], &[0.0]) - 1.0 / 19.0).abs() < 1e-15);
        assert_eq!(edge_probability(LinkFunction::Sigmoid, &[0.0], &[0.0]), 0.5);
    }

    #[test]
    fn links_decrease_with_distance() {
        for link in LINKS {
            let mut prev = link.prob(0.0);
            for step in 1..100 {
                let p = link.prob(step as f64 * 0.1);
                assert!(p < prev && p > 0.0);
                prev = p;
            }
        }
    }

    #[test]
    fn positive_gradient_examples() {
        let link = LinkFunction::InverseQuadratic { a: 1.0 };
        let (gi, gj) = positive_gradient(link, &[0.4, -1.0], &[0.4, -1.0], 5.0);
        assert_eq!(gi, vec![0.0, 0.0]);
        assert_eq!(gj, vec![0.0, 0.0]);
        let (gi, gj) = positive_gradient(link, &[1.0], &[0.0], 5.0);
        assert_eq!(gi, vec![-1.0]);
        assert_eq!(gj, vec![1.0]);
    }

    #[test]
    fn negative_gradient_examples() {
        let link = LinkFunction::InverseQuadratic { a: 1.0 };
        let (gi, gk) = negative_gradient(link, &[1.0], &[0.0], 1.0, 0.0, 5.0);
        assert_eq!(gi, vec![1.0]);
        assert_eq!(gk, vec![-1.0]);
        let mut prev = f64::INFINITY;
        for d in [1.0, 10.0, 100.0, 1000.0] {
            let (gi, _) = negative_gradient(link, &[d], &[0.0], 7.0, 0.1, 5.0);
            assert!(gi[0] > 0.0 && gi[0] < prev);
            prev = gi[0];
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn clipping_bounds_components() {
        let link = LinkFunction::InverseQuadratic { a: 1.0 };
        let (gi, _) = negative_gradient(link, &[1e-4, 0.0], &[0.0, 0.0], 7.0, 0.0, 5.0);
        assert_eq!(gi[0], 5.0);
        let (gi, _) = positive_gradient(link, &[-3.0], &[0.0], 0.5);
        assert_eq!(gi[0], 0.5);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngState::new(21).rng();
        for link in LINKS {
            for _ in 0..200 {
                let yi: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
                let yj: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
                if dist2_f64(&yi, &yj) < 0.01 {
                    continue;
                }
                let (gi, _) = positive_gradient(link, &yi, &yj, f64::INFINITY);
                let fd = fd_grad(&yi, |y| link.log_prob(dist2_f64(y, &yj)));
                assert!(rel_err(&gi, &fd) <= 1e-4, "{link:?} positive");

                let gamma = 7.0;
                let (gi, _) = negative_gradient(link, &yi, &yj, gamma, 0.0, f64::INFINITY);
                let fd = fd_grad(&yi, |y| gamma * link.log_one_minus_prob(dist2_f64(y, &yj)));
                assert!(rel_err(&gi, &fd) <= 1e-4, "{link:?} negative");
            }
        }
    }

    #[test]
    fn update_signs() {
        let mut rng = RngState::new(4).rng();
        for link in LINKS {
            for _ in 0..100 {
                let yi: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let yj: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let before = dist2_f64(&yi, &yj);
                let rate = 1e-3;
                let step = |y: &[f64], g: &[f64]| -> Vec<f64> {
                    y.iter().zip(g).map(|(a, b)| a + rate * b).collect()
                };
                let (gi, gj) = positive_gradient(link, &yi, &yj, 5.0);
                assert!(dist2_f64(&step(&yi, &gi), &step(&yj, &gj)) < before);
                let (gi, gk) = negative_gradient(link, &yi, &yj, 7.0, 0.1, 5.0);
                assert!(dist2_f64(&step(&yi, &gi), &step(&yj, &gk)) > before);
            }
        }
    }

    #[test]
    fn initialization_is_tiny_and_deterministic() {
        let e = initialize_embedding(500, 3, RngState::new(1));
        assert!(e.coords().iter().all(|c| c.abs() <= 5e-4));
        assert_eq!(e, initialize_embedding(500, 3, RngState::new(1)));
        assert_ne!(e, initialize_embedding(500, 3, RngState::new(2)));
    }

    #[test]
    fn initial_points_do_not_collide() {
        for seed in 0..10_000 {
            let e = initialize_embedding(2, 2, RngState::new(seed));
            assert_ne!(e.point(0), e.point(1));
        }
    }

    #[test]
    fn rate_schedule_is_linear_to_zero() {
        let cfg = LayoutConfig {
            initial_rate: 2.0,
            ..LayoutConfig::default()
        };
        assert_eq!(cfg.rate_at(0, 1000), 2.0);
        assert!((cfg.rate_at(500, 1000) - 1.0).abs() < 1e-15);
        assert!(cfg.rate_at(999, 1000) <= 2.0 / 1000.0 + 1e-15);
    }

    #[test]
    fn single_edge_pure_attraction() {
        let g = pair_graph();
        let init = Embedding::new(2, 2, vec![-1.0, 0.5, 2.0, -0.5]).unwrap();
        let before = dist2_f64(&[-1.0, 0.5], &[2.0, -0.5]);
        let cfg = LayoutConfig {
            negatives: 0,
            samples: SampleBudget::Total(5000),
            initial_rate: 0.05,
            ..LayoutConfig::default()
        };
        let out = train_from(&g, &cfg, init).unwrap().embedding;
        let y = out.to_f64();
        assert!(dist2_f64(&y[0..2], &y[2..4]) < 0.01 * before);
    }

    #[test]
    fn one_sample_moves_each_component_at_most_rate_times_clip() {
        let g = random_graph(3, 3, 1);
        let cfg = LayoutConfig {
            negatives: 1,
            samples: SampleBudget::Total(1),
            epsilon: 0.0,
            clip: 0.25,
            initial_rate: 0.8,
            ..LayoutConfig::default()
        };
        for seed in 0..50 {
            let init = initialize_embedding(3, 2, RngState::new(seed));
            let out = train_from(
                &g,
                &LayoutConfig {
                    seed,
                    ..cfg.clone()
                },
                init.clone(),
            )
            .unwrap();
            for (a, b) in init.coords().iter().zip(out.embedding.coords()) {
                assert!(f64::from((a - b).abs()) <= 0.8 * 0.25 + 1e-6);
            }
        }
    }

    #[test]
    fn single_worker_is_reproducible() {
        let g = random_graph(30, 40, 3);
        let cfg = LayoutConfig {
            samples: SampleBudget::PerNode(500),
            seed: 99,
            ..LayoutConfig::default()
        };
        assert_eq!(train(&g, &cfg).unwrap(), train(&g, &cfg).unwrap());
        let other = LayoutConfig {
            seed: 100,
            ..cfg.clone()
        };
        assert_ne!(train(&g, &cfg).unwrap(), train(&g, &other).unwrap());
    }

    #[test]
    fn multiple_workers_finish_finite() {
        let g = random_graph(200, 400, 5);
        let cfg = LayoutConfig {
            samples: SampleBudget::PerNode(200),
            workers: 4,
            trace_buckets: 10,
            ..LayoutConfig::default()
        };
        let report = train_with_report(&g, &cfg).unwrap();
        assert!(report.embedding.is_finite());
        assert_eq!(report.total_samples, 40_000);
        assert!(report.trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_config() {
        let g = pair_graph();
        let bad = [
            LayoutConfig {
                initial_rate: 0.0,
                ..LayoutConfig::default()
            },
            LayoutConfig {
                workers: 0,
                ..LayoutConfig::default()
            },
            LayoutConfig {
                link: LinkFunction::InverseQuadratic { a: -1.0 },
                ..LayoutConfig::default()
            },
            LayoutConfig {
                samples: SampleBudget::Total(0),
                ..LayoutConfig::default()
            },
        ];
        for cfg in bad {
            assert!(train(&g, &cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn coincident_points_objective_limits() {
        let g = random_graph(5, 2, 8);
        let coords = vec![0.25; 10];
        let mut cfg = LayoutConfig {
            epsilon: 0.0,
            ..LayoutConfig::default()
        };
        assert_eq!(
            exact_likelihood(&g, &coords, &cfg).unwrap(),
            f64::NEG_INFINITY
        );
        cfg.epsilon = 1e-6;
        let guarded = exact_likelihood(&g, &coords, &cfg).unwrap();
        assert!(guarded.is_finite() && guarded < -10.0);
        // The positive part alone is log 1 = 0.
        let positive = LayoutConfig { gamma: 0.0, ..cfg };
        assert_eq!(exact_likelihood(&g, &coords, &positive).unwrap(), 0.0);
    }

    #[test]
    fn likelihood_gradient_matches_finite_differences() {
        let g = random_graph(10, 8, 12);
        let coords = random_coords(10, 2, 13);
        for link in LINKS {
            for epsilon in [0.0, 0.1] {
                let cfg = LayoutConfig {
                    link,
                    epsilon,
                    ..LayoutConfig::default()
                };
                let grad = exact_likelihood_gradient(&g, &coords, &cfg).unwrap();
                let fd: Vec<f64> = (0..coords.len())
                    .map(|c| {
                        let mut up = coords.clone();
                        let mut down = coords.clone();
                        up[c] += 1e-5;
                        down[c] -= 1e-5;
                        (exact_likelihood(&g, &up, &cfg).unwrap()
                            - exact_likelihood(&g, &down, &cfg).unwrap())
                            / 2e-5
                    })
                    .collect();
                assert!(rel_err(&grad, &fd) < 1e-5, "{link:?} eps={epsilon}");
            }
        }
    }

    #[test]
    fn embedding_text_format() {
        let e = Embedding::new(2, 2, vec![0.5, -1.25, 3.0, 0.0]).unwrap();
        assert_eq!(
            e.to_text(None).unwrap(),
            "2 2\n0 0.500000 -1.250000\n1 3.000000 0.000000\n"
        );
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(e.to_text(Some(&labels)).unwrap().starts_with("2 2\na 0.5"));
        assert!(e.to_text(Some(&labels[..1])).is_err());
    }
}
