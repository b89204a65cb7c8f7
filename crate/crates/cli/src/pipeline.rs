//! End-to-end run: vectors → KNN graph → weights → layout → outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use knnvis_core::{
    brute_force_knn, build_knn_graph, knn_classify_accuracy, recall, train_with_report,
    weigh_graph, DataMatrix, Embedding, GraphConfig, LabeledSet, LayoutConfig, LinkFunction,
    Metrics, RngState, SampleBudget,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::ingest::{ingest_labels, ingest_vectors};
use crate::manifest::{InputDigest, MetricsRecord, RunManifest};
use crate::svg::{emit_svg, DEFAULT_RADIUS, PALETTE};

/// Below this many points the desk-scale defaults apply.
pub const DESK_SCALE_POINTS: usize = 10_000;
pub const DESK_SCALE_K: usize = 15;
pub const DESK_SCALE_SAMPLES_PER_NODE: u64 = 20_000;
/// Neighbors used by the leave-one-out classifier.
pub const CLASSIFIER_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    #[default]
    Invq,
    Sigmoid,
}

impl std::str::FromStr for LinkKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "invq" => Ok(LinkKind::Invq),
            "sigmoid" => Ok(LinkKind::Sigmoid),
            _ => Err(format!("unknown link `{s}` (expected invq or sigmoid)")),
        }
    }
}

/// User-facing parameters; `None` means "use the default for this input".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSettings {
    pub trees: Option<usize>,
    pub k: Option<usize>,
    pub iters: Option<usize>,
    pub perplexity: Option<f64>,
    pub dim: Option<usize>,
    pub negatives: Option<usize>,
    pub gamma: Option<f64>,
    pub samples_per_node: Option<u64>,
    pub rate: Option<f64>,
    pub link: Option<LinkKind>,
    pub a: Option<f64>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

/// Every value the run actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trees: usize,
    pub k: usize,
    pub iters: usize,
    pub perplexity: f64,
    pub leaf_capacity: usize,
    pub dim: usize,
    pub negatives: usize,
    pub gamma: f64,
    pub samples_per_node: u64,
    pub rate: f64,
    pub link: LinkKind,
    pub a: f64,
    pub clip: f64,
    pub epsilon: f64,
    pub workers: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunSettings::default().resolve(usize::MAX)
    }
}

impl RunSettings {
    /// Fills unset values for an input of `n` points.
    ///
    /// Below [`DESK_SCALE_POINTS`] the neighbor count drops to at most
    /// [`DESK_SCALE_K`] and each node gets [`DESK_SCALE_SAMPLES_PER_NODE`]
    /// samples. `k` never exceeds `n − 1`. An unset perplexity larger than `k`
    /// becomes `k / 3` (at least 2).
    pub fn resolve(&self, n: usize) -> RunConfig {
        let g = GraphConfig::default();
        let l = LayoutConfig::default();
        let desk = n < DESK_SCALE_POINTS;
        let mut k = self
            .k
            .unwrap_or(if desk { g.k.min(DESK_SCALE_K) } else { g.k });
        if n >= 2 && k > n - 1 {
            log::warn!("k={k} exceeds n-1={}; using {}", n - 1, n - 1);
            k = n - 1;
        }
        let perplexity = self.perplexity.unwrap_or(if g.perplexity > k as f64 {
            (k as f64 / 3.0).max(2.0)
        } else {
            g.perplexity
        });
        let default_per_node = match l.samples {
            SampleBudget::PerNode(p) => p,
            SampleBudget::Total(_) => 10_000,
        };
        let a_default = match l.link {
            LinkFunction::InverseQuadratic { a } => a,
            LinkFunction::Sigmoid => 1.0,
        };
        RunConfig {
            trees: self.trees.unwrap_or(g.trees),
            k,
            iters: self.iters.unwrap_or(g.iterations),
            perplexity,
            leaf_capacity: GraphConfig { k, ..g.clone() }.leaf_capacity(),
            dim: self.dim.unwrap_or(l.dim),
            negatives: self.negatives.unwrap_or(l.negatives),
            gamma: self.gamma.unwrap_or(l.gamma),
            samples_per_node: self.samples_per_node.unwrap_or(if desk {
                DESK_SCALE_SAMPLES_PER_NODE
            } else {
                default_per_node
            }),
            rate: self.rate.unwrap_or(l.initial_rate),
            link: self.link.unwrap_or_default(),
            a: self.a.unwrap_or(a_default),
            clip: l.clip,
            epsilon: l.epsilon,
            workers: self.workers.unwrap_or_else(default_workers),
            seed: self.seed.unwrap_or(0),
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl RunConfig {
    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            trees: self.trees,
            k: self.k,
            iterations: self.iters,
            perplexity: self.perplexity,
            leaf_capacity: Some(self.leaf_capacity),
            seed: self.seed,
        }
    }

    /// The layout draws from a stream unrelated to the tree builders.
    pub fn layout_config(&self) -> LayoutConfig {
        LayoutConfig {
            dim: self.dim,
            link: match self.link {
                LinkKind::Invq => LinkFunction::InverseQuadratic { a: self.a },
                LinkKind::Sigmoid => LinkFunction::Sigmoid,
            },
            negatives: self.negatives,
            gamma: self.gamma,
            samples: SampleBudget::PerNode(self.samples_per_node),
            initial_rate: self.rate,
            workers: self.workers,
            clip: self.clip,
            epsilon: self.epsilon,
            seed: RngState::new(self.seed).fork(0).seed,
            trace_buckets: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunRequest {
    pub input: PathBuf,
    pub output: PathBuf,
    pub labels: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    /// Defaults to `<output>.manifest.json`.
    pub manifest: Option<PathBuf>,
    pub exact_recall: bool,
    pub settings: RunSettings,
}

impl RunRequest {
    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| {
            let mut s = self.output.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub embedding: Embedding,
    pub metrics: Option<Metrics>,
    pub manifest: RunManifest,
}

/// Computes the layout and metrics for in-memory inputs.
pub fn compute(
    data: &DataMatrix,
    labels: Option<&LabeledSet>,
    cfg: &RunConfig,
    exact_recall: bool,
    timings: &mut BTreeMap<String, f64>,
) -> Result<(Embedding, Option<Metrics>)> {
    if data.n_points() < 2 {
        return Err(CliError::Invalid("need at least 2 points".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut timed = |name: &str, start: Instant| {
            timings.insert(name.to_string(), start.elapsed().as_secs_f64() * 1e3);
        };

        let t = Instant::now();
        let knn = build_knn_graph(data, &cfg.graph_config()).map_err(CliError::stage("graph"))?;
        timed("graph", t);

        let t = Instant::now();
        let graph = weigh_graph(&knn, cfg.perplexity).map_err(CliError::stage("weighting"))?;
        timed("weighting", t);

        let t = Instant::now();
        let report =
            train_with_report(&graph, &cfg.layout_config()).map_err(CliError::stage("layout"))?;
        timed("layout", t);

        if !exact_recall && labels.is_none() {
            return Ok((report.embedding, None));
        }
        let t = Instant::now();
        let mean_recall = if exact_recall {
            let exact = brute_force_knn(data, cfg.k).map_err(CliError::stage("eval"))?;
            Some(recall(&knn, &exact).map_err(CliError::stage("eval"))?.mean)
        } else {
            None
        };
        let knn_accuracy = match labels {
            Some(l) => {
                let k = CLASSIFIER_K.min(data.n_points() - 1);
                Some(
                    knn_classify_accuracy(&report.embedding, l, k)
                        .map_err(CliError::stage("eval"))?,
                )
            }
            None => None,
        };
        timed("eval", t);
        let metrics = Metrics {
            mean_recall,
            knn_accuracy,
            k: cfg.k,
            n: data.n_points(),
        };
        Ok((report.embedding, Some(metrics)))
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs the pipeline on files and writes every requested output.
pub fn run_pipeline(req: &RunRequest) -> Result<RunOutput> {
    let t = Instant::now();
    let data = ingest_vectors(&req.input)?;
    let labels = match &req.labels {
        Some(p) => Some(ingest_labels(p, data.n_points())?),
        None => None,
    };
    let mut timings = BTreeMap::new();
    timings.insert("ingest".to_string(), t.elapsed().as_secs_f64() * 1e3);
    let cfg = req.settings.resolve(data.n_points());
    run_resolved(req, &data, labels.as_ref(), cfg, timings)
}

fn run_resolved(
    req: &RunRequest,
    data: &DataMatrix,
    labels: Option<&LabeledSet>,
    cfg: RunConfig,
    mut timings: BTreeMap<String, f64>,
) -> Result<RunOutput> {
    if req.metrics_out.is_some() && labels.is_none() && !req.exact_recall {
        return Err(CliError::Invalid(
            "--metrics-out needs --labels and/or --exact-recall".into(),
        ));
    }
    if req.svg.is_some() && cfg.dim != 2 {
        return Err(CliError::UnsupportedDimension(cfg.dim));
    }
    log::info!("{} points, {} dims; {:?}", data.n_points(), data.dim(), cfg);

    let (embedding, metrics) = compute(data, labels, &cfg, req.exact_recall, &mut timings)?;

    let mut outputs = BTreeMap::new();
    let tokens = labels.map(LabeledSet::tokens);
    let text = embedding
        .to_text(tokens.as_deref())
        .map_err(CliError::stage("output"))?;
    write_text(&req.output, &text)?;
    outputs.insert("embedding".to_string(), req.output.display().to_string());

    if let Some(m) = &metrics {
        let line = m.to_json_line();
        match &req.metrics_out {
            Some(p) => {
                write_text(p, &format!("{line}\n"))?;
                outputs.insert("metrics".to_string(), p.display().to_string());
            }
            None => println!("{line}"),
        }
    }
    if let Some(p) = &req.svg {
        emit_svg(&embedding, labels, p, DEFAULT_RADIUS, &PALETTE)?;
        outputs.insert("svg".to_string(), p.display().to_string());
    }

    let mut inputs = BTreeMap::new();
    inputs.insert("vectors".to_string(), InputDigest::of_file(&req.input)?);
    if let Some(p) = &req.labels {
        inputs.insert("labels".to_string(), InputDigest::of_file(p)?);
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        inputs,
        outputs,
        timings_ms: timings,
        metrics: metrics.as_ref().map(|m| MetricsRecord {
            mean_recall: m.mean_recall,
            knn_accuracy: m.knn_accuracy,
            k: m.k,
            n: m.n,
        }),
    };
    manifest.write(&req.manifest_path())?;
    Ok(RunOutput {
        embedding,
        metrics,
        manifest,
    })
}

/// Re-runs a recorded configuration after checking the inputs are unchanged.
/// Outputs go to `output`, with the recorded SVG and metrics paths replaced
/// by siblings of it when requested.
pub fn replay(manifest_path: &Path, output: &Path) -> Result<RunOutput> {
    let m = RunManifest::read(manifest_path)?;
    m.verify_inputs()?;
    let vectors = m
        .inputs
        .get("vectors")
        .ok_or_else(|| CliError::Invalid("manifest has no vectors input".into()))?;
    let req = RunRequest {
        input: PathBuf::from(&vectors.path),
        output: output.to_path_buf(),
        labels: m.inputs.get("labels").map(|d| PathBuf::from(&d.path)),
        exact_recall: m.metrics.as_ref().is_some_and(|r| r.mean_recall.is_some()),
        ..RunRequest::default()
    };
    let data = ingest_vectors(&req.input)?;
    let labels = match &req.labels {
        Some(p) => Some(ingest_labels(p, data.n_points())?),
        None => None,
    };
    run_resolved(&req, &data, labels.as_ref(), m.config, BTreeMap::new())
}
