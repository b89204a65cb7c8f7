//! File formats, plotting and the end-to-end pipeline behind the `knnvis`
//! command.

pub mod error;
pub mod ingest;
pub mod manifest;
pub mod pipeline;
pub mod svg;

pub use error::{CliError, Result};
pub use ingest::{ingest_labels, ingest_vectors, write_vectors};
pub use manifest::RunManifest;
pub use pipeline::{replay, run_pipeline, RunConfig, RunRequest, RunSettings};
pub use svg::emit_svg;
