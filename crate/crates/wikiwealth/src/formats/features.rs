//! `GWFT` text-feature tables: magic, u32 version, u32 neighbours, u32
//! embedding dim, u8 distance-normalisation flag, u64 rows, then per row
//! a length-prefixed point id and `dim * neighbours + neighbours` f32
//! values.

use std::collections::HashMap;
use std::path::Path;

use wikiwealth_core::embed::EmbeddingModel;
use wikiwealth_core::features::{build_text_features, feature_len, FeatureConfig};
use wikiwealth_core::geo::SpatialIndex;
use wikiwealth_core::survey::SurveyPoint;

use super::binary::{read_file, write_file, Decoder, Encoder};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GWFT";
const VERSION: u32 = 1;

/// `country/cluster_id`, the key that ties feature rows to survey points.
pub fn point_key(p: &SurveyPoint) -> String {
    format!("{}/{}", p.country, p.cluster_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub neighbors: usize,
    pub dim: usize,
    pub normalized: bool,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn build(points: &[SurveyPoint], index: &SpatialIndex, model: &EmbeddingModel, cfg: &FeatureConfig) -> Result<Self> {
        let rows = points
            .iter()
            .map(|p| Ok(build_text_features(p.location, index, model, cfg)?.values))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            neighbors: cfg.neighbors,
            dim: model.dim(),
            normalized: cfg.normalize_distances,
            ids: points.iter().map(point_key).collect(),
            rows,
        })
    }

    pub fn row_len(&self) -> usize {
        feature_len(self.dim, self.neighbors)
    }

    /// Rows reordered to follow `points`.
    pub fn aligned(&self, points: &[SurveyPoint]) -> Result<Vec<Vec<f64>>> {
        let by_id: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        points
            .iter()
            .map(|p| {
                let key = point_key(p);
                by_id
                    .get(key.as_str())
                    .map(|&i| self.rows[i].clone())
                    .ok_or_else(|| Error::Config(format!("feature table has no row for survey point {key}")))
            })
            .collect()
    }
}

pub fn encode_features(table: &FeatureTable) -> Vec<u8> {
    let mut e = Encoder::default();
    e.bytes(MAGIC);
    e.u32(VERSION);
    e.u32(table.neighbors as u32);
    e.u32(table.dim as u32);
    e.u8(u8::from(table.normalized));
    e.u64(table.rows.len() as u64);
    for (id, row) in table.ids.iter().zip(&table.rows) {
        e.string(id);
        let narrow: Vec<f32> = row.iter().map(|&v| v as f32).collect();
        e.f32s(&narrow);
    }
    e.buf
}

pub fn decode_features(bytes: &[u8], source: &Path) -> Result<FeatureTable> {
    let mut d = Decoder::new(bytes, "features.bad_file", source);
    d.magic(MAGIC)?;
    d.version(VERSION)?;
    let dims_at = d.position();
    let neighbors = d.u32()? as usize;
    let dim = d.u32()? as usize;
    if neighbors == 0 || dim == 0 {
        return Err(d.error_at(dims_at, format!("bad dimensions N={neighbors} p={dim}")));
    }
    let flag_at = d.position();
    let normalized = match d.u8()? {
        0 => false,
        1 => true,
        v => return Err(d.error_at(flag_at, format!("bad flag {v}"))),
    };
    let len = feature_len(dim, neighbors);
    let n = d.u64()?;
    let n = d.count(n, 4 + 4 * len)?;
    let mut ids = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        ids.push(d.string()?);
        let at = d.position();
        let row = d.f32s(len)?;
        if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
            return Err(d.error_at(at + 4 * bad, "non-finite feature"));
        }
        rows.push(row.into_iter().map(f64::from).collect());
    }
    d.finish()?;
    Ok(FeatureTable { neighbors, dim, normalized, ids, rows })
}

pub fn load_features(path: &Path) -> Result<FeatureTable> {
    decode_features(&read_file(path)?, path)
}

pub fn save_features(path: &Path, table: &FeatureTable) -> Result<()> {
    write_file(path, &encode_features(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use wikiwealth_core::geo::GeoPoint;

    fn table() -> FeatureTable {
        FeatureTable {
            neighbors: 2,
            dim: 1,
            normalized: false,
            ids: vec!["A/1".into(), "A/2".into()],
            rows: vec![vec![0.5, -0.25, 0.0, 3.0], vec![1.0, 2.0, 1.5, 2.5]],
        }
    }

    #[test]
    fn round_trip() {
        let t = table();
        assert_eq!(decode_features(&encode_features(&t), Path::new("f")).unwrap(), t);
    }

    #[test]
    fn alignment_by_point_key() {
        let p = |id: &str| SurveyPoint {
            cluster_id: id.into(),
            country: "A".into(),
            location: GeoPoint { lat: 0.0, lon: 0.0 },
            outcome: 0.0,
            urban: false,
        };
        let t = table();
        assert_eq!(t.aligned(&[p("2"), p("1")]).unwrap(), vec![t.rows[1].clone(), t.rows[0].clone()]);
        assert!(t.aligned(&[p("3")]).is_err());
    }

    #[test]
    fn rejects_bad_flag_and_length() {
        let mut bytes = encode_features(&table());
        bytes[16] = 2;
        assert!(matches!(decode_features(&bytes, Path::new("f")), Err(Error::Format { offset: 16, .. })));
        let bytes = encode_features(&table());
        assert!(decode_features(&bytes[..bytes.len() - 4], Path::new("f")).is_err());
    }
}
