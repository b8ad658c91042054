//! PV-DBOW paragraph vectors trained with negative sampling.
//!
//! Each document owns a vector that is trained to predict the words it
//! contains. When [`EmbedConfig::train_word_vectors`] is set, skip-gram word
//! pairs inside `window` are trained at the same time and share the output
//! table with the document predictions, which places documents and words in
//! one space.
//!
//! Training is split into [`PvDbowTrainer::train_shard`] calls over generic
//! [`ParamTable`]s, so a caller with threads can run several shards against
//! shared tables. [`train_pvdbow`] is the deterministic single-worker path.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDoc;
use crate::error::{Error, Result};
use crate::math::{dot, sigmoid, softplus, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    /// Embedding dimensionality.
    pub dim: usize,
    pub epochs: usize,
    pub window: usize,
    pub negative: usize,
    pub initial_lr: f32,
    pub min_count: u64,
    /// Frequent-word downsampling threshold; `0` disables it.
    pub subsample: f64,
    pub train_word_vectors: bool,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 300,
            epochs: 10,
            window: 8,
            negative: 5,
            initial_lr: 0.025,
            min_count: 5,
            subsample: 1e-3,
            train_word_vectors: true,
            seed: 1,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.epochs == 0 || self.negative == 0 {
            return Err(Error::InvalidConfig(String::from(
                "embedding dim, epochs and negative samples must be at least 1",
            )));
        }
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::InvalidConfig(String::from("initial_lr must be finite and >= 0")));
        }
        if self.train_word_vectors && self.window == 0 {
            return Err(Error::InvalidConfig(String::from("window must be >= 1 for word training")));
        }
        Ok(())
    }
}

/// Retained words, their counts and the negative-sampling distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, u32>,
    total: u64,
    /// Cumulative `count^0.75`, last entry is the normaliser.
    cumulative: Vec<f64>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, count)` pairs, most frequent first.
    pub fn from_counts(mut entries: Vec<(String, u64)>) -> Result<Self> {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut index = BTreeMap::new();
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (i, (w, c)) in entries.into_iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::DuplicateId(w));
            }
            words.push(w);
            counts.push(c);
        }
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += libm::pow(c as f64, 0.75);
                acc
            })
            .collect();
        let total = counts.iter().sum();
        Ok(Vocabulary { words, counts, index, total, cumulative })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, i: u32) -> &str {
        &self.words[i as usize]
    }

    pub fn count(&self, i: u32) -> u64 {
        self.counts[i as usize]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(String::as_str).zip(self.counts.iter().copied())
    }

    /// Probability of drawing word `i` as a negative sample.
    pub fn sampling_weight(&self, i: u32) -> f64 {
        let i = i as usize;
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - prev) / self.cumulative[self.cumulative.len() - 1]
    }

    /// Maps a uniform draw in `[0, 1)` to a word index.
    pub fn sample_negative(&self, u: f64) -> u32 {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.words.len() - 1) as u32
    }
}

pub fn build_vocab(docs: &[TokenizedDoc], config: &EmbedConfig) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for d in docs {
        for t in &d.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count.max(1))
        .map(|(w, c)| (String::from(w), c))
        .collect();
    Vocabulary::from_counts(kept)
}

/// Negative-sampling loss for one input vector against a positive target
/// and a set of negatives, `softplus(-x·t) + Σ softplus(x·n)`. `rows` holds
/// the target vectors back to back, positive first.
///
/// Writes d(loss)/d(input) into `grad` and, per target, the coefficient
/// `label - σ(x·row)` into `coefs`. A gradient-descent step of size `lr` is
/// then `input -= lr * grad` and `row += lr * coef * input`.
pub fn ns_objective<T: Real>(input: &[T], rows: &[T], grad: &mut [T], coefs: &mut [T]) -> T {
    for g in grad.iter_mut() {
        *g = T::ZERO;
    }
    let mut loss = T::ZERO;
    for (j, row) in rows.chunks_exact(input.len()).enumerate() {
        let f = dot(input, row);
        let label = if j == 0 { T::ONE } else { T::ZERO };
        loss += if j == 0 { softplus(-f) } else { softplus(f) };
        let coef = label - sigmoid(f);
        coefs[j] = coef;
        for (g, r) in grad.iter_mut().zip(row.iter()) {
            *g += -(coef * *r);
        }
    }
    loss
}

/// Row-addressable parameter storage.
pub trait ParamTable {
    fn dim(&self) -> usize;
    fn read(&self, row: usize, out: &mut [f32]);
    fn add(&mut self, row: usize, delta: &[f32]);
}

/// Plain in-memory table for single-worker training.
pub struct VecTable<'a> {
    data: &'a mut [f32],
    dim: usize,
}

impl<'a> VecTable<'a> {
    pub fn new(data: &'a mut [f32], dim: usize) -> Self {
        VecTable { data, dim }
    }
}

impl ParamTable for VecTable<'_> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn read(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }
    fn add(&mut self, row: usize, delta: &[f32]) {
        for (x, d) in self.data[row * self.dim..(row + 1) * self.dim].iter_mut().zip(delta) {
            *x += *d;
        }
    }
}

/// Document, input-word and output-word tables in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub docs: Vec<f32>,
    pub words_in: Vec<f32>,
    pub words_out: Vec<f32>,
}

/// Trained paragraph-vector model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    doc_ids: Vec<String>,
    doc_index: BTreeMap<String, usize>,
    doc_vectors: Vec<f32>,
    vocab: Vocabulary,
    word_output: Vec<f32>,
    config: EmbedConfig,
    loss_trace: Vec<f64>,
}

impl EmbeddingModel {
    /// Assembles a model from stored parts (used by checkpoint loading).
    pub fn from_parts(
        dim: usize,
        doc_ids: Vec<String>,
        doc_vectors: Vec<f32>,
        vocab: Vocabulary,
        word_output: Vec<f32>,
        config: EmbedConfig,
        loss_trace: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || doc_vectors.len() != doc_ids.len() * dim {
            return Err(Error::DimensionMismatch { expected: doc_ids.len() * dim, got: doc_vectors.len() });
        }
        if word_output.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch { expected: vocab.len() * dim, got: word_output.len() });
        }
        let mut doc_index = BTreeMap::new();
        for (i, id) in doc_ids.iter().enumerate() {
            if doc_index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(EmbeddingModel { dim, doc_ids, doc_index, doc_vectors, vocab, word_output, config, loss_trace })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn row_of(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }

    pub fn doc_vector(&self, row: usize) -> &[f32] {
        &self.doc_vectors[row * self.dim..(row + 1) * self.dim]
    }

    pub fn embed_doc(&self, doc_id: &str) -> Result<&[f32]> {
        self.row_of(doc_id)
            .map(|r| self.doc_vector(r))
            .ok_or_else(|| Error::UnknownDocument(String::from(doc_id)))
    }

    pub fn doc_vectors(&self) -> &[f32] {
        &self.doc_vectors
    }

    pub fn word_output_vectors(&self) -> &[f32] {
        &self.word_output
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn config(&self) -> &EmbedConfig {
        &self.config
    }

    /// Mean negative-sampling loss of the document predictions, evaluated
    /// after each epoch.
    pub fn per_epoch_loss(&self) -> &[f64] {
        &self.loss_trace
    }
}

const EVAL_STREAM: u64 = u64::MAX;
const INIT_STREAM: u64 = u64::MAX - 1;

/// Owns the encoded corpus and schedule for one training run.
pub struct PvDbowTrainer<'a> {
    ids: Vec<String>,
    docs: Vec<Vec<u32>>,
    vocab: &'a Vocabulary,
    config: EmbedConfig,
    keep_prob: Vec<f32>,
}

impl<'a> PvDbowTrainer<'a> {
    pub fn new(docs: &[TokenizedDoc], vocab: &'a Vocabulary, config: &EmbedConfig) -> Result<Self> {
        config.validate()?;
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut seen = BTreeMap::new();
        for d in docs {
            if seen.insert(d.id.as_str(), ()).is_some() {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        let encoded = docs
            .iter()
            .map(|d| d.tokens.iter().filter_map(|t| vocab.get(t)).collect())
            .collect();
        let total = vocab.total_tokens() as f64;
        let keep_prob = (0..vocab.len() as u32)
            .map(|i| {
                if config.subsample <= 0.0 {
                    return 1.0;
                }
                let f = vocab.count(i) as f64;
                let t = config.subsample * total;
                ((libm::sqrt(f / t) + 1.0) * t / f).min(1.0) as f32
            })
            .collect();
        Ok(PvDbowTrainer {
            ids: docs.iter().map(|d| d.id.clone()).collect(),
            docs: encoded,
            vocab,
            config: config.clone(),
            keep_prob,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn config(&self) -> &EmbedConfig {
        &self.config
    }

    /// Uniform `[-0.5/p, 0.5/p]` document and input-word vectors, zero
    /// output vectors.
    pub fn init_tables(&self) -> Tables {
        let p = self.config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(INIT_STREAM);
        let half = 0.5 / p as f32;
        let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-half..half)).collect() };
        let docs = draw(self.docs.len() * p);
        let words_in = if self.config.train_word_vectors { draw(self.vocab.len() * p) } else { Vec::new() };
        Tables { docs, words_in, words_out: vec![0.0; self.vocab.len() * p] }
    }

    fn learning_rate(&self, epoch: usize, done: usize, shard_len: usize) -> f32 {
        let lr0 = self.config.initial_lr;
        let frac = (epoch as f64 + done as f64 / shard_len.max(1) as f64) / self.config.epochs as f64;
        let lr_min = lr0 / 100.0;
        (lr0 as f64 - (lr0 - lr_min) as f64 * frac.min(1.0)) as f32
    }

    /// Runs one epoch over the documents in `shard`. Documents are visited
    /// in a seeded order that depends on `(seed, epoch, worker)`.
    pub fn train_shard<D, W, O>(
        &self,
        epoch: usize,
        shard: Range<usize>,
        worker: u64,
        doc_table: &mut D,
        word_in: &mut W,
        word_out: &mut O,
    ) where
        D: ParamTable,
        W: ParamTable,
        O: ParamTable,
    {
        let p = self.config.dim;
        let k = self.config.negative;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream((epoch as u64) << 20 | worker);
        let mut order: Vec<usize> = shard.clone().collect();
        order.shuffle(&mut rng);

        let mut input = vec![0f32; p];
        let mut rows = vec![0f32; (k + 1) * p];
        let mut grad = vec![0f32; p];
        let mut coefs = vec![0f32; k + 1];
        let mut delta = vec![0f32; p];
        let mut targets: Vec<u32> = Vec::with_capacity(k + 1);
        let mut kept: Vec<u32> = Vec::new();

        for (done, &d) in order.iter().enumerate() {
            let lr = self.learning_rate(epoch, done, order.len());
            kept.clear();
            for &w in &self.docs[d] {
                let keep = self.keep_prob[w as usize];
                if keep >= 1.0 || rng.random::<f32>() < keep {
                    kept.push(w);
                }
            }
            for pos in 0..kept.len() {
                let w = kept[pos];
                draw_targets(self.vocab, w, k, &mut rng, &mut targets);
                doc_table.read(d, &mut input);
                sgd_step(
                    lr, &input, &targets, word_out, &mut rows, &mut grad, &mut coefs, &mut delta,
                );
                for (g, x) in delta.iter_mut().zip(&grad) {
                    *g = -lr * *x;
                }
                doc_table.add(d, &delta);

                if self.config.train_word_vectors {
                    let shrink = rng.random_range(0..self.config.window);
                    let reach = self.config.window - shrink;
                    let lo = pos.saturating_sub(reach);
                    let hi = (pos + reach + 1).min(kept.len());
                    for c in lo..hi {
                        if c == pos {
                            continue;
                        }
                        let ctx = kept[c] as usize;
                        draw_targets(self.vocab, w, k, &mut rng, &mut targets);
                        word_in.read(ctx, &mut input);
                        sgd_step(
                            lr, &input, &targets, word_out, &mut rows, &mut grad, &mut coefs, &mut delta,
                        );
                        for (g, x) in delta.iter_mut().zip(&grad) {
                            *g = -lr * *x;
                        }
                        word_in.add(ctx, &delta);
                    }
                }
            }
        }
    }

    /// Mean document-prediction loss over every token, with negatives drawn
    /// from a fixed stream so successive epochs are comparable.
    pub fn evaluate_loss<D: ParamTable, O: ParamTable>(&self, doc_table: &D, word_out: &O) -> f64 {
        let p = self.config.dim;
        let k = self.config.negative;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(EVAL_STREAM);
        let mut input = vec![0f32; p];
        let mut rows = vec![0f32; (k + 1) * p];
        let mut grad = vec![0f32; p];
        let mut coefs = vec![0f32; k + 1];
        let mut targets = Vec::with_capacity(k + 1);
        let mut total = 0.0f64;
        let mut n = 0usize;
        for (d, doc) in self.docs.iter().enumerate() {
            doc_table.read(d, &mut input);
            for &w in doc {
                draw_targets(self.vocab, w, k, &mut rng, &mut targets);
                for (j, &t) in targets.iter().enumerate() {
                    word_out.read(t as usize, &mut rows[j * p..(j + 1) * p]);
                }
                let used = &rows[..targets.len() * p];
                total += ns_objective(&input, used, &mut grad, &mut coefs) as f64;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    pub fn finish(self, tables: Tables, loss_trace: Vec<f64>) -> Result<EmbeddingModel> {
        EmbeddingModel::from_parts(
            self.config.dim,
            self.ids,
            tables.docs,
            self.vocab.clone(),
            tables.words_out,
            self.config,
            loss_trace,
        )
    }
}

/// Positive target first, then up to `k` negatives distinct from it.
fn draw_targets(vocab: &Vocabulary, positive: u32, k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<u32>) {
    out.clear();
    out.push(positive);
    for _ in 0..k {
        let n = vocab.sample_negative(rng.random::<f64>());
        if n != positive {
            out.push(n);
        }
    }
}

/// One negative-sampling update: output rows move immediately, the input
/// gradient is left in `grad` for the caller to apply.
#[allow(clippy::too_many_arguments)]
fn sgd_step<O: ParamTable>(
    lr: f32,
    input: &[f32],
    targets: &[u32],
    word_out: &mut O,
    rows: &mut [f32],
    grad: &mut [f32],
    coefs: &mut [f32],
    delta: &mut [f32],
) {
    let p = input.len();
    for (j, &t) in targets.iter().enumerate() {
        word_out.read(t as usize, &mut rows[j * p..(j + 1) * p]);
    }
    ns_objective(input, &rows[..targets.len() * p], grad, coefs);
    for (j, &t) in targets.iter().enumerate() {
        let c = lr * coefs[j];
        for (dv, x) in delta.iter_mut().zip(input) {
            *dv = c * *x;
        }
        word_out.add(t as usize, delta);
    }
}

/// Deterministic single-worker training.
pub fn train_pvdbow(docs: &[TokenizedDoc], vocab: &Vocabulary, config: &EmbedConfig) -> Result<EmbeddingModel> {
    let trainer = PvDbowTrainer::new(docs, vocab, config)?;
    let mut tables = trainer.init_tables();
    let p = config.dim;
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        {
            let mut dt = VecTable::new(&mut tables.docs, p);
            let mut wi = VecTable::new(&mut tables.words_in, p);
            let mut wo = VecTable::new(&mut tables.words_out, p);
            trainer.train_shard(epoch, 0..trainer.num_docs(), 0, &mut dt, &mut wi, &mut wo);
        }
        let loss = {
            let mut docs = core::mem::take(&mut tables.docs);
            let mut out = core::mem::take(&mut tables.words_out);
            let l = trainer.evaluate_loss(&VecTable::new(&mut docs, p), &VecTable::new(&mut out, p));
            tables.docs = docs;
            tables.words_out = out;
            l
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(loss);
    }
    trainer.finish(tables, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    fn doc(id: &str, toks: &[&str]) -> TokenizedDoc {
        TokenizedDoc { id: id.into(), tokens: toks.iter().map(|s| s.to_string()).collect() }
    }

    fn small_config() -> EmbedConfig {
        EmbedConfig { dim: 16, epochs: 3, min_count: 1, ..EmbedConfig::default() }
    }

    #[test]
    fn vocab_threshold() {
        let cfg = EmbedConfig { min_count: 2, ..EmbedConfig::default() };
        let v = build_vocab(&[doc("d", &["a", "a", "b"])], &cfg).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.get("a"), Some(0));
        assert_eq!(v.get("b"), None);

        let cfg = EmbedConfig { min_count: 1, ..EmbedConfig::default() };
        let v = build_vocab(&[doc("x", &["a", "b"]), doc("y", &["a", "b"])], &cfg).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.count(v.get("a").unwrap()), 2);
        assert_eq!(v.count(v.get("b").unwrap()), 2);
    }

    #[test]
    fn vocab_all_dropped_is_an_error() {
        let cfg = EmbedConfig { min_count: 5, ..EmbedConfig::default() };
        assert_eq!(build_vocab(&[doc("d", &["a"])], &cfg).unwrap_err(), Error::EmptyVocabulary);
        assert_eq!(build_vocab(&[], &cfg).unwrap_err(), Error::EmptyCorpus);
    }

    #[test]
    fn sampling_weights_follow_three_quarter_power() {
        let v = Vocabulary::from_counts(vec![("a".into(), 16), ("b".into(), 1), ("c".into(), 81)]).unwrap();
        let z = libm::pow(16.0, 0.75) + 1.0 + libm::pow(81.0, 0.75);
        for (w, c) in [("a", 16.0), ("b", 1.0), ("c", 81.0)] {
            let i = v.get(w).unwrap();
            assert!((v.sampling_weight(i) - libm::pow(c, 0.75) / z).abs() < 1e-12);
        }
        // empirical frequency of the sampler matches the weights
        let mut hits = [0usize; 3];
        let n = 100_000;
        for s in 0..n {
            hits[v.sample_negative((s as f64 + 0.5) / n as f64) as usize] += 1;
        }
        for i in 0..3u32 {
            assert!((hits[i as usize] as f64 / n as f64 - v.sampling_weight(i)).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialisation() {
        let docs = [doc("only", &["a", "b", "c", "a"])];
        let cfg = EmbedConfig { epochs: 1, initial_lr: 0.0, ..small_config() };
        let v = build_vocab(&docs, &cfg).unwrap();
        let trainer = PvDbowTrainer::new(&docs, &v, &cfg).unwrap();
        let init = trainer.init_tables();
        let model = train_pvdbow(&docs, &v, &cfg).unwrap();
        assert_eq!(model.embed_doc("only").unwrap(), &init.docs[..]);

        let cfg = EmbedConfig { epochs: 4, ..cfg };
        let model = train_pvdbow(&docs, &v, &cfg).unwrap();
        let trace = model.per_epoch_loss();
        assert_eq!(trace.len(), 4);
        assert!(trace.iter().all(|&l| l == trace[0]));
    }

    #[test]
    fn lookup_is_pure_and_unknown_fails() {
        let docs = [doc("a", &["x", "y"]), doc("b", &["y", "z"])];
        let cfg = small_config();
        let v = build_vocab(&docs, &cfg).unwrap();
        let m = train_pvdbow(&docs, &v, &cfg).unwrap();
        let first = m.embed_doc("a").unwrap().to_vec();
        assert_eq!(first.len(), 16);
        assert!(first.iter().all(|x| x.is_finite()));
        assert_eq!(m.embed_doc("a").unwrap(), &first[..]);
        assert_eq!(m.embed_doc("nope").unwrap_err(), Error::UnknownDocument("nope".into()));
        assert_eq!(m.per_epoch_loss().len(), 3);
    }

    #[test]
    fn training_is_deterministic() {
        let docs: Vec<TokenizedDoc> = (0..20)
            .map(|i| doc(&format!("d{i}"), &["alpha", "beta", if i % 2 == 0 { "gamma" } else { "delta" }, "beta"]))
            .collect();
        let cfg = small_config();
        let v = build_vocab(&docs, &cfg).unwrap();
        let a = train_pvdbow(&docs, &v, &cfg).unwrap();
        let b = train_pvdbow(&docs, &v, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_doc_ids_rejected() {
        let docs = [doc("a", &["x"]), doc("a", &["y"])];
        let cfg = small_config();
        let v = build_vocab(&docs, &cfg).unwrap();
        assert!(matches!(train_pvdbow(&docs, &v, &cfg), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn ns_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = 12;
        let mut rand_vec = |scale: f64| -> Vec<f64> { (0..p).map(|_| rng.random_range(-scale..scale)).collect() };
        let input = rand_vec(1.0);
        let refs: Vec<f64> = (0..6).flat_map(|_| rand_vec(1.0)).collect();
        let mut grad = vec![0.0; p];
        let mut coefs = vec![0.0; 6];
        ns_objective(&input, &refs, &mut grad, &mut coefs);
        let h = 1e-4;
        let mut scratch_g = vec![0.0; p];
        let mut scratch_c = vec![0.0; 6];
        for i in 0..p {
            let mut plus = input.clone();
            plus[i] += h;
            let mut minus = input.clone();
            minus[i] -= h;
            let fd = (ns_objective(&plus, &refs, &mut scratch_g, &mut scratch_c)
                - ns_objective(&minus, &refs, &mut scratch_g, &mut scratch_c))
                / (2.0 * h);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "component {i}: analytic {} vs numeric {fd}", grad[i]);
        }
    }
}
