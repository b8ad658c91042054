//! `PVDB` embedding checkpoints.
//!
//! Header: magic, u32 version, u64 documents, u64 vocabulary size, u32 dim.
//! Body: document ids, document vectors, `(word, u64 count)` pairs, output
//! word vectors. Strings are u32-length-prefixed UTF-8 and vectors are f32
//! row-major. A trailer holds the per-epoch loss (u32 count, f64 values)
//! and the training config as length-prefixed JSON.

use std::path::Path;

use wikiwealth_core::embed::{EmbedConfig, EmbeddingModel, Vocabulary};

use super::binary::{read_file, write_file, Decoder, Encoder};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PVDB";
const VERSION: u32 = 1;

pub fn encode_model(model: &EmbeddingModel) -> Vec<u8> {
    let mut e = Encoder::default();
    e.bytes(MAGIC);
    e.u32(VERSION);
    e.u64(model.num_docs() as u64);
    e.u64(model.vocab().len() as u64);
    e.u32(model.dim() as u32);
    for id in model.doc_ids() {
        e.string(id);
    }
    e.f32s(model.doc_vectors());
    for (word, count) in model.vocab().iter() {
        e.string(word);
        e.u64(count);
    }
    e.f32s(model.word_output_vectors());
    let losses = model.per_epoch_loss();
    e.u32(losses.len() as u32);
    for l in losses {
        e.f64(*l);
    }
    e.string(&serde_json::to_string(model.config()).expect("config serialises"));
    e.buf
}

pub fn decode_model(bytes: &[u8], source: &Path) -> Result<EmbeddingModel> {
    let mut d = Decoder::new(bytes, "embed.bad_checkpoint", source);
    d.magic(MAGIC)?;
    d.version(VERSION)?;
    let n_docs = d.u64()?;
    let n_words = d.u64()?;
    let dim_at = d.position();
    let dim = d.u32()? as usize;
    if dim == 0 {
        return Err(d.error_at(dim_at, "zero dimension"));
    }
    let n_docs = d.count(n_docs, 4)?;
    let n_words = d.count(n_words, 12)?;
    let ids = (0..n_docs).map(|_| d.string()).collect::<Result<Vec<_>>>()?;
    let doc_vectors = d.f32s(n_docs * dim)?;
    let vocab_at = d.position();
    let entries = (0..n_words).map(|_| Ok((d.string()?, d.u64()?))).collect::<Result<Vec<_>>>()?;
    let vocab = Vocabulary::from_counts(entries).map_err(|e| d.error_at(vocab_at, e.to_string()))?;
    let word_output = d.f32s(n_words * dim)?;
    let n_loss = d.u32()? as usize;
    let n_loss = d.count(n_loss as u64, 8)?;
    let losses = (0..n_loss).map(|_| d.f64()).collect::<Result<Vec<_>>>()?;
    let config_at = d.position();
    let config: EmbedConfig =
        serde_json::from_str(&d.string()?).map_err(|e| d.error_at(config_at, format!("config: {e}")))?;
    d.finish()?;
    if let Some(bad) = doc_vectors.iter().chain(&word_output).position(|v| !v.is_finite()) {
        return Err(d.error_at(0, format!("non-finite vector component {bad}")));
    }
    EmbeddingModel::from_parts(dim, ids, doc_vectors, vocab, word_output, config, losses).map_err(Error::from)
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel> {
    decode_model(&read_file(path)?, path)
}

pub fn save_model(path: &Path, model: &EmbeddingModel) -> Result<()> {
    write_file(path, &encode_model(model))
}
