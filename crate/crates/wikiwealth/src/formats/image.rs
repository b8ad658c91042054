//! `NLIM` nightlight grids: magic, u32 version, u32 height, u32 width,
//! f64 centre lat, f64 centre lon, then `height * width` f32 pixels.

use std::path::{Path, PathBuf};

use wikiwealth_core::features::ImageGrid;
use wikiwealth_core::geo::GeoPoint;
use wikiwealth_core::survey::SurveyPoint;

use super::binary::{read_file, write_file, Decoder, Encoder};
use crate::error::Result;

const MAGIC: &[u8; 4] = b"NLIM";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8;

pub fn encode_image(grid: &ImageGrid) -> Vec<u8> {
    let mut e = Encoder::default();
    e.bytes(MAGIC);
    e.u32(VERSION);
    e.u32(grid.height() as u32);
    e.u32(grid.width() as u32);
    e.f64(grid.center.lat);
    e.f64(grid.center.lon);
    e.f32s(grid.pixels());
    e.buf
}

pub fn decode_image(bytes: &[u8], source: &Path) -> Result<ImageGrid> {
    let mut d = Decoder::new(bytes, "features.bad_image", source);
    d.magic(MAGIC)?;
    d.version(VERSION)?;
    let dims_at = d.position();
    let h = d.u32()? as usize;
    let w = d.u32()? as usize;
    if h == 0 || w == 0 {
        return Err(d.error_at(dims_at, format!("empty grid {h}x{w}")));
    }
    let centre_at = d.position();
    let center = GeoPoint { lat: d.f64()?, lon: d.f64()? };
    if !center.is_valid() {
        return Err(d.error_at(centre_at, format!("centre ({}, {}) out of range", center.lat, center.lon)));
    }
    let n = h.checked_mul(w).ok_or_else(|| d.error_at(dims_at, "grid size overflows"))?;
    if n.checked_mul(4) != Some(d.remaining()) {
        return Err(d.error_at(HEADER_LEN, format!("{h}x{w} grid needs {} payload bytes, file has {}", n * 4, d.remaining())));
    }
    let pixels = d.f32s(n)?;
    if let Some(bad) = pixels.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(d.error_at(HEADER_LEN + 4 * bad, format!("pixel {bad} is {}", pixels[bad])));
    }
    Ok(ImageGrid::new(h, w, center, pixels)?)
}

pub fn load_image(path: &Path) -> Result<ImageGrid> {
    decode_image(&read_file(path)?, path)
}

pub fn save_image(path: &Path, grid: &ImageGrid) -> Result<()> {
    write_file(path, &encode_image(grid))
}

/// File name of a survey point's image inside an image directory.
pub fn image_file_name(point: &SurveyPoint) -> String {
    format!("{}_{}.nlim", point.country, point.cluster_id)
}

pub fn image_path(dir: &Path, point: &SurveyPoint) -> PathBuf {
    dir.join(image_file_name(point))
}
