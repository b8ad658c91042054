//! Multi-threaded training back ends.
//!
//! Embedding training with more than one worker updates shared tables
//! without locks (asynchronous SGD). Component writes are atomic, but
//! read-modify-write sequences from different workers can interleave, so
//! multi-worker runs are not reproducible bit for bit. One worker falls
//! back to the deterministic single-threaded trainer.
//!
//! The regressor gradient splits each mini-batch into fixed contiguous
//! slices and sums the per-slice gradients in slice order, so its result
//! depends only on the thread count.

use std::sync::atomic::{AtomicU32, Ordering};
use std::thread;

use wikiwealth_core::corpus::TokenizedDoc;
use wikiwealth_core::embed::{train_pvdbow, EmbedConfig, EmbeddingModel, ParamTable, PvDbowTrainer, Tables, Vocabulary};
use wikiwealth_core::nn::train::batch_gradient;
use wikiwealth_core::nn::{BatchGradient, Example, Regressor};
use wikiwealth_core::{Error, Result};

struct SharedTable {
    data: Vec<AtomicU32>,
    dim: usize,
}

impl SharedTable {
    fn new(values: &[f32], dim: usize) -> Self {
        SharedTable { data: values.iter().map(|v| AtomicU32::new(v.to_bits())).collect(), dim }
    }

    fn handle(&self) -> TableHandle<'_> {
        TableHandle { table: self }
    }

    fn into_vec(self) -> Vec<f32> {
        self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

/// Per-worker view of a shared table.
struct TableHandle<'a> {
    table: &'a SharedTable,
}

impl ParamTable for TableHandle<'_> {
    fn dim(&self) -> usize {
        self.table.dim
    }

    fn read(&self, row: usize, out: &mut [f32]) {
        let d = self.table.dim;
        for (o, a) in out.iter_mut().zip(&self.table.data[row * d..(row + 1) * d]) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add(&mut self, row: usize, delta: &[f32]) {
        let d = self.table.dim;
        for (a, x) in self.table.data[row * d..(row + 1) * d].iter().zip(delta) {
            let v = f32::from_bits(a.load(Ordering::Relaxed)) + x;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

/// Contiguous, nearly equal slices of `0..n`.
fn shards(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.clamp(1, n.max(1));
    (0..parts).map(|i| i * n / parts..(i + 1) * n / parts).collect()
}

/// PV-DBOW training across `workers` threads, each owning a slice of the
/// documents per epoch.
pub fn train_pvdbow_parallel(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    config: &EmbedConfig,
    workers: usize,
) -> Result<EmbeddingModel> {
    if workers <= 1 {
        return train_pvdbow(docs, vocab, config);
    }
    let trainer = PvDbowTrainer::new(docs, vocab, config)?;
    let init = trainer.init_tables();
    let p = config.dim;
    let doc_t = SharedTable::new(&init.docs, p);
    let in_t = SharedTable::new(&init.words_in, p);
    let out_t = SharedTable::new(&init.words_out, p);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        thread::scope(|s| {
            for (w, range) in shards(trainer.num_docs(), workers).into_iter().enumerate() {
                let trainer = &trainer;
                let (doc_t, in_t, out_t) = (&doc_t, &in_t, &out_t);
                s.spawn(move || {
                    let (mut d, mut i, mut o) = (doc_t.handle(), in_t.handle(), out_t.handle());
                    trainer.train_shard(epoch, range, w as u64, &mut d, &mut i, &mut o);
                });
            }
        });
        let loss = trainer.evaluate_loss(&doc_t.handle(), &out_t.handle());
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(loss);
    }
    let tables = Tables { docs: doc_t.into_vec(), words_in: in_t.into_vec(), words_out: out_t.into_vec() };
    trainer.finish(tables, trace)
}

/// Mini-batch gradient computed on up to `threads` threads.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    pub threads: usize,
}

/// Slices smaller than this are not worth a thread.
const MIN_SLICE: usize = 4;

impl BatchGradient for Threaded {
    fn gradient(&self, model: &Regressor, batch: &[&Example], targets: &[f64], grad: &mut Regressor) -> Result<Vec<f64>> {
        let parts = self.threads.min(batch.len() / MIN_SLICE).max(1);
        if parts == 1 {
            return batch_gradient(model, batch, targets, batch.len(), grad);
        }
        let ranges = shards(batch.len(), parts);
        let results: Vec<Result<(Regressor, Vec<f64>)>> = thread::scope(|s| {
            let handles: Vec<_> = ranges
                .iter()
                .map(|r| {
                    let r = r.clone();
                    s.spawn(move || {
                        let mut g = model.zeros_like();
                        let errs = batch_gradient(model, &batch[r.clone()], &targets[r], batch.len(), &mut g)?;
                        Ok((g, errs))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
        });
        let mut errors = Vec::with_capacity(batch.len());
        for res in results {
            let (g, errs) = res?;
            for (dst, src) in grad.tensors_mut().into_iter().zip(g.tensors()) {
                for (a, b) in dst.iter_mut().zip(src) {
                    *a += b;
                }
            }
            errors.extend(errs);
        }
        Ok(errors)
    }
}

/// Sequential below two threads, sliced otherwise.
pub fn engine(threads: usize) -> Box<dyn BatchGradient + Sync> {
    if threads <= 1 {
        Box::new(wikiwealth_core::nn::Sequential)
    } else {
        Box::new(Threaded { threads })
    }
}
