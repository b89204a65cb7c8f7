//! Scatter plot output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use knnvis_core::{Embedding, LabeledSet};

use crate::error::{CliError, Result};

pub const VIEWBOX: f64 = 1000.0;
pub const MARGIN: f64 = 0.05;
pub const DEFAULT_RADIUS: f64 = 2.0;

/// Twenty distinguishable colors, cycled by label id.
pub const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
    "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

/// Maps embedding coordinates into the viewBox. The longer side of the
/// bounding box spans the area inside the margin; y points up.
#[derive(Debug, Clone, Copy)]
pub struct ViewTransform {
    mid: [f64; 2],
    scale: f64,
}

impl ViewTransform {
    pub fn fit(embedding: &Embedding) -> Result<Self> {
        if embedding.dim() != 2 {
            return Err(CliError::UnsupportedDimension(embedding.dim()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for i in 0..embedding.n_points() {
            for (a, &c) in embedding.point(i).iter().enumerate() {
                lo[a] = lo[a].min(f64::from(c));
                hi[a] = hi[a].max(f64::from(c));
            }
        }
        if embedding.n_points() == 0 {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let span = if span > 0.0 { span } else { 1.0 };
        Ok(Self {
            mid: [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
            scale: VIEWBOX * (1.0 - 2.0 * MARGIN) / span,
        })
    }

    pub fn apply(&self, p: &[f32]) -> (f64, f64) {
        let c = VIEWBOX / 2.0;
        (
            c + (f64::from(p[0]) - self.mid[0]) * self.scale,
            c - (f64::from(p[1]) - self.mid[1]) * self.scale,
        )
    }
}

pub fn render_svg(
    embedding: &Embedding,
    labels: Option<&LabeledSet>,
    point_radius: f64,
    palette: &[&str],
) -> Result<String> {
    let view = ViewTransform::fit(embedding)?;
    if palette.is_empty() {
        return Err(CliError::Invalid("palette must not be empty".into()));
    }
    if let Some(l) = labels {
        if l.len() != embedding.n_points() {
            return Err(CliError::Invalid(format!(
                "{} labels for {} points",
                l.len(),
                embedding.n_points()
            )));
        }
    }
    let mut out = String::with_capacity(256 + embedding.n_points() * 64);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {v} {v}" width="{v}" height="{v}">"#,
        v = VIEWBOX
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect width="{v}" height="{v}" fill="white"/>"#,
        v = VIEWBOX
    )
    .unwrap();
    for i in 0..embedding.n_points() {
        let (x, y) = view.apply(embedding.point(i));
        let color = match labels {
            Some(l) => palette[l.ids()[i] as usize % palette.len()],
            None => palette[0],
        };
        writeln!(
            out,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="{point_radius}" fill="{color}"/>"#
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg(
    embedding: &Embedding,
    labels: Option<&LabeledSet>,
    path: &Path,
    point_radius: f64,
    palette: &[&str],
) -> Result<()> {
    let svg = render_svg(embedding, labels, point_radius, palette)?;
    fs::write(path, svg).map_err(|e| CliError::io(path, e))
}
