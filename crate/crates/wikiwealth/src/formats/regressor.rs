//! `GWNN` regressor checkpoints: magic, u32 version, u32 layer count, one
//! `(u8 section, u8 activation, u32 inputs, u32 outputs)` per layer, u64
//! parameter count, then every tensor as f32 in layer order.

use std::path::Path;

use wikiwealth_core::nn::{Activation, LayerDesc, Regressor, Section};

use super::binary::{read_file, write_file, Decoder, Encoder};
use crate::error::Result;

const MAGIC: &[u8; 4] = b"GWNN";
const VERSION: u32 = 1;

pub fn encode_regressor(model: &Regressor) -> Vec<u8> {
    let mut e = Encoder::default();
    e.bytes(MAGIC);
    e.u32(VERSION);
    let layers = model.layers();
    e.u32(layers.len() as u32);
    for l in &layers {
        e.u8(l.section.code());
        e.u8(l.activation.code());
        e.u32(l.inputs as u32);
        e.u32(l.outputs as u32);
    }
    e.u64(model.num_parameters() as u64);
    for t in model.tensors() {
        let narrow: Vec<f32> = t.iter().map(|&v| v as f32).collect();
        e.f32s(&narrow);
    }
    e.buf
}

pub fn decode_regressor(bytes: &[u8], source: &Path) -> Result<Regressor> {
    let mut d = Decoder::new(bytes, "nn.bad_checkpoint", source);
    d.magic(MAGIC)?;
    d.version(VERSION)?;
    let n = d.u32()?;
    let n = d.count(n as u64, 10)?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let at = d.position();
        let section = Section::from_code(d.u8()?).ok_or_else(|| d.error_at(at, "unknown layer section"))?;
        let activation = Activation::from_code(d.u8()?).ok_or_else(|| d.error_at(at + 1, "unknown activation"))?;
        let inputs = d.u32()? as usize;
        let outputs = d.u32()? as usize;
        layers.push(LayerDesc { section, inputs, outputs, activation });
    }
    let mut model = Regressor::from_layers(&layers).map_err(|e| d.error_at(8, e.to_string()))?;
    let count_at = d.position();
    let count = d.u64()?;
    if count != model.num_parameters() as u64 {
        return Err(d.error_at(count_at, format!("{count} parameters stored, layers need {}", model.num_parameters())));
    }
    let params_at = d.position();
    let values = d.f32s(count as usize)?;
    d.finish()?;
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(d.error_at(params_at + 4 * bad, "non-finite parameter"));
    }
    let mut it = values.into_iter();
    for t in model.tensors_mut() {
        for (dst, src) in t.iter_mut().zip(&mut it) {
            *dst = src as f64;
        }
    }
    Ok(model)
}

pub fn load_regressor(path: &Path) -> Result<Regressor> {
    decode_regressor(&read_file(path)?, path)
}

pub fn save_regressor(path: &Path, model: &Regressor) -> Result<()> {
    write_file(path, &encode_regressor(model))
}
