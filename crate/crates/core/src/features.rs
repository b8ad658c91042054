//! Text feature vectors from the nearest articles, and nightlight grids.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingModel;
use crate::error::{Error, Result};
use crate::geo::{distance_km, GeoPoint, SpatialIndex};

/// Divisor applied to distances when `normalize_distances` is on.
pub const DISTANCE_SCALE_KM: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub neighbors: usize,
    pub normalize_distances: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { neighbors: 10, normalize_distances: false }
    }
}

/// Embeddings of the `n` nearest articles followed by their distances,
/// nearest first in both blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub neighbors: usize,
    pub dim: usize,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn embedding(&self, rank: usize) -> &[f64] {
        &self.values[rank * self.dim..(rank + 1) * self.dim]
    }

    pub fn distances(&self) -> &[f64] {
        &self.values[self.dim * self.neighbors..]
    }
}

pub fn feature_len(dim: usize, neighbors: usize) -> usize {
    dim * neighbors + neighbors
}

pub fn build_text_features(
    query: GeoPoint,
    index: &SpatialIndex,
    model: &EmbeddingModel,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let n = config.neighbors;
    let hits = index.knn(query, n)?;
    let dim = model.dim();
    let mut values = Vec::with_capacity(feature_len(dim, n));
    for hit in &hits {
        let row = model.row_of(hit.id).ok_or_else(|| Error::MissingEmbedding(String::from(hit.id)))?;
        values.extend(model.doc_vector(row).iter().map(|&x| x as f64));
    }
    let scale = if config.normalize_distances { DISTANCE_SCALE_KM } else { 1.0 };
    values.extend(hits.iter().map(|hit| {
        // the index may rank by a different metric; the feature is always km
        distance_km(query, index.location(hit.slot)).km() / scale
    }));
    Ok(FeatureVector { values, neighbors: n, dim })
}

/// Mean embedding of the `n` nearest articles.
pub fn mean_neighbor_embedding(
    query: GeoPoint,
    index: &SpatialIndex,
    model: &EmbeddingModel,
    n: usize,
) -> Result<Vec<f64>> {
    let hits = index.knn(query, n)?;
    let mut acc = alloc::vec![0.0; model.dim()];
    for hit in &hits {
        let v = model.embed_doc(hit.id).map_err(|_| Error::MissingEmbedding(String::from(hit.id)))?;
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(acc)
}

/// Single-band radiance raster centred on a survey point.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    pub center: GeoPoint,
    pixels: Vec<f32>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, center: GeoPoint, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(alloc::format!("empty grid {height}x{width}")));
        }
        if pixels.len() != height * width {
            return Err(Error::LengthMismatch { left: pixels.len(), right: height * width });
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidImage(alloc::format!("pixel {i} is {}", pixels[i])));
        }
        Ok(Self { height, width, center, pixels })
    }

    pub fn zeros(height: usize, width: usize, center: GeoPoint) -> Self {
        Self { height, width, center, pixels: alloc::vec![0.0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / self.pixels.len() as f64
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenizedDoc;
    use crate::embed::{build_vocab, train_pvdbow, EmbedConfig};
    use crate::geo::Metric;
    use alloc::vec;

    fn tiny_model(ids: &[&str], dim: usize) -> EmbeddingModel {
        let docs: Vec<TokenizedDoc> =
            ids.iter().map(|id| TokenizedDoc { id: (*id).into(), tokens: vec!["w".into(), "v".into()] }).collect();
        let cfg = EmbedConfig { dim, epochs: 1, min_count: 1, ..EmbedConfig::default() };
        let vocab = build_vocab(&docs, &cfg).unwrap();
        train_pvdbow(&docs, &vocab, &cfg).unwrap()
    }

    #[test]
    fn single_neighbor_at_query() {
        let model = tiny_model(&["a", "b"], 4);
        let here = GeoPoint { lat: 1.0, lon: 1.0 };
        let idx = SpatialIndex::build([("a", here), ("b", GeoPoint { lat: 2.0, lon: 1.0 })], Metric::GreatCircle).unwrap();
        let f = build_text_features(here, &idx, &model, &FeatureConfig { neighbors: 1, ..Default::default() }).unwrap();
        let emb: Vec<f64> = model.embed_doc("a").unwrap().iter().map(|&x| x as f64).collect();
        assert_eq!(&f.values[..4], emb.as_slice());
        assert_eq!(f.values[4], 0.0);
        assert_eq!(f.len(), 5);
    }

    #[test]
    fn too_few_articles() {
        let model = tiny_model(&["a"], 2);
        let idx = SpatialIndex::build([("a", GeoPoint { lat: 0.0, lon: 0.0 })], Metric::GreatCircle).unwrap();
        let err = build_text_features(GeoPoint { lat: 0.0, lon: 0.0 }, &idx, &model, &FeatureConfig::default());
        assert_eq!(err.unwrap_err(), Error::InsufficientArticles { requested: 10, available: 1 });
    }

    #[test]
    fn missing_embedding() {
        let model = tiny_model(&["a"], 2);
        let idx = SpatialIndex::build([("z", GeoPoint { lat: 0.0, lon: 0.0 })], Metric::GreatCircle).unwrap();
        let cfg = FeatureConfig { neighbors: 1, ..Default::default() };
        assert!(matches!(
            build_text_features(GeoPoint { lat: 0.0, lon: 0.0 }, &idx, &model, &cfg),
            Err(Error::MissingEmbedding(_))
        ));
    }

    #[test]
    fn image_validation() {
        let c = GeoPoint { lat: 0.0, lon: 0.0 };
        assert!(ImageGrid::new(2, 2, c, vec![0.0, 1.0, f32::NAN, 0.0]).is_err());
        assert!(ImageGrid::new(2, 2, c, vec![0.0, -1.0, 0.0, 0.0]).is_err());
        assert_eq!(ImageGrid::new(4, 4, c, vec![0.0; 16]).unwrap(), ImageGrid::zeros(4, 4, c));
    }
}
