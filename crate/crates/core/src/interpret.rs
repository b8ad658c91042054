//! Neighbour-count sweeps and projections of neighbourhood embeddings.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingModel;
use crate::error::{Error, Result};
use crate::eval::{EvalReport, ExperimentSpec, ModelKind};
use crate::features::mean_neighbor_embedding;
use crate::geo::{GeoPoint, SpatialIndex};
pub use crate::pca::{pca_fit, PcaFit};

/// Neighbours averaged per point in the quantile analysis.
pub const QUANTILE_NEIGHBORS: usize = 10;

/// Runs the text model once per neighbour count, in the given order.
pub fn n_sweep(
    base: &ExperimentSpec,
    counts: &[usize],
    mut run: impl FnMut(&ExperimentSpec) -> Result<EvalReport>,
) -> Result<Vec<(usize, f64)>> {
    counts
        .iter()
        .map(|&n| {
            let spec = ExperimentSpec { neighbors: n, model_kind: ModelKind::Text, ..base.clone() };
            Ok((n, run(&spec)?.pearson_r2))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub fit: PcaFit,
    pub points: Vec<ProjectedPoint>,
}

impl PcaProjection {
    /// Mean 2-D position of every point carrying `label`.
    pub fn centroid(&self, label: &str) -> Option<(f64, f64)> {
        let sel: Vec<&ProjectedPoint> = self.points.iter().filter(|p| p.label == label).collect();
        if sel.is_empty() {
            return None;
        }
        let n = sel.len() as f64;
        Some((sel.iter().map(|p| p.x).sum::<f64>() / n, sel.iter().map(|p| p.y).sum::<f64>() / n))
    }
}

/// Indices of the lowest and highest `floor(n / 3)` predictions. Ties keep
/// input order.
pub fn prediction_thirds(predictions: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
    let k = predictions.len() / 3;
    let poor = order[..k].to_vec();
    let rich = order[order.len() - k..].to_vec();
    (poor, rich)
}

/// Projects neighbourhood embeddings of the richest and poorest thirds of
/// predicted points, together with category article embeddings, onto the
/// top two principal components of the combined set.
pub fn quantile_embedding_analysis(
    predictions: &[f64],
    locations: &[GeoPoint],
    index: &SpatialIndex,
    model: &EmbeddingModel,
    categories: &[(String, Vec<f64>)],
) -> Result<PcaProjection> {
    if predictions.len() != locations.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: locations.len() });
    }
    if predictions.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: predictions.len() });
    }
    let (poor, rich) = prediction_thirds(predictions);
    let mut labels = Vec::new();
    let mut vectors = Vec::new();
    for (tag, idx) in [("rich", &rich), ("poor", &poor)] {
        for &i in idx.iter() {
            vectors.push(mean_neighbor_embedding(locations[i], index, model, QUANTILE_NEIGHBORS)?);
            labels.push(String::from(tag));
        }
    }
    for (name, v) in categories {
        if v.len() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: v.len() });
        }
        vectors.push(v.clone());
        labels.push(alloc::format!("category:{name}"));
    }
    let fit = pca_fit(&vectors, 2)?;
    let points = labels
        .into_iter()
        .zip(&vectors)
        .map(|(label, v)| {
            let xy = fit.project(v);
            ProjectedPoint { label, x: xy[0], y: xy[1] }
        })
        .collect();
    Ok(PcaProjection { fit, points })
}
