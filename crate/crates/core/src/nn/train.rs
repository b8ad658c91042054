//! Mini-batch training with Adam on the mean squared error.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Example, ForwardCache, Regressor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    /// Share of the training set held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub seed: u64,
    /// Text features are inputs, never parameters. Only `true` is accepted.
    pub freeze_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            patience: 20,
            validation_fraction: 0.1,
            seed: 0,
            freeze_embeddings: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("adam betas must lie in [0, 1) and epsilon be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        if !self.freeze_embeddings {
            return bad("embedding fine-tuning is not supported");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, targets: Vec<f64>) -> Result<Self> {
        if examples.len() != targets.len() {
            return Err(Error::LengthMismatch { left: examples.len(), right: targets.len() });
        }
        Ok(Dataset { examples, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Adam with bias correction, one moment pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(shapes: &[usize], config: &TrainConfig) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.step += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.epsilon);
            }
        }
    }
}

/// Computes one batch's gradient. Implementations may split the batch
/// across threads as long as the result does not depend on the split.
pub trait BatchGradient {
    /// Accumulates the gradient of the batch mean squared error into
    /// `grad` and returns each example's squared error.
    fn gradient(&self, model: &Regressor, batch: &[&Example], targets: &[f64], grad: &mut Regressor) -> Result<Vec<f64>>;
}

/// Whole batch in one forward/backward pass on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchGradient for Sequential {
    fn gradient(&self, model: &Regressor, batch: &[&Example], targets: &[f64], grad: &mut Regressor) -> Result<Vec<f64>> {
        batch_gradient(model, batch, targets, batch.len(), grad)
    }
}

/// Gradient of `sum((pred - y)^2) / scale` over the given examples.
pub fn batch_gradient(
    model: &Regressor,
    batch: &[&Example],
    targets: &[f64],
    scale: usize,
    grad: &mut Regressor,
) -> Result<Vec<f64>> {
    let mut cache = ForwardCache::default();
    let preds = model.forward_batch(batch, &mut cache)?;
    let errors: Vec<f64> = preds.iter().zip(targets).map(|(p, y)| p - y).collect();
    let d_out: Vec<f64> = errors.iter().map(|e| 2.0 * e / scale as f64).collect();
    model.backward(&cache, &d_out, grad);
    Ok(errors.iter().map(|e| e * e).collect())
}

pub fn mse(model: &Regressor, data: &Dataset, indices: &[usize], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    for chunk in indices.chunks(batch_size.max(1)) {
        let xs: Vec<&Example> = chunk.iter().map(|&i| &data.examples[i]).collect();
        let preds = model.predict(&xs)?;
        total += chunk.iter().zip(&preds).map(|(&i, p)| (p - data.targets[i]) * (p - data.targets[i])).sum::<f64>();
    }
    Ok(total / indices.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Mean training squared error of each epoch.
    pub loss_trace: Vec<f64>,
    pub validation_trace: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// Seeded hold-out split, returned as `(train, validation)` index lists.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let held = libm::floor(n as f64 * fraction) as usize;
    if held == 0 || held >= n {
        return (idx, Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    idx.shuffle(&mut rng);
    let mut val = idx.split_off(n - held);
    idx.sort_unstable();
    val.sort_unstable();
    (idx, val)
}

pub fn train(model: &mut Regressor, data: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
    train_with(model, data, config, &Sequential)
}

pub fn train_with<G: BatchGradient + ?Sized>(
    model: &mut Regressor,
    data: &Dataset,
    config: &TrainConfig,
    engine: &G,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train_idx, val_idx) = validation_split(data.len(), config.validation_fraction, config.seed);
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(&shapes, config);
    let mut grad = model.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order = train_idx.clone();
    let mut sq_err = vec![0.0; data.len()];
    let mut report = TrainReport::default();
    let mut best: Option<(f64, Regressor)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let xs: Vec<&Example> = chunk.iter().map(|&i| &data.examples[i]).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| data.targets[i]).collect();
            for t in grad.tensors_mut() {
                t.fill(0.0);
            }
            let errs = engine.gradient(model, &xs, &ys, &mut grad)?;
            for (&i, e) in chunk.iter().zip(errs) {
                sq_err[i] = e;
            }
            let g = grad.tensors();
            adam.update(&mut model.tensors_mut(), &g);
        }
        // summed in index order so the trace does not depend on the shuffle
        let loss = train_idx.iter().map(|&i| sq_err[i]).sum::<f64>() / train_idx.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.loss_trace.push(loss);

        if val_idx.is_empty() {
            continue;
        }
        let val = mse(model, data, &val_idx, config.batch_size)?;
        if !val.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        report.validation_trace.push(val);
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, model.clone()));
            report.best_epoch = epoch;
        } else if epoch - report.best_epoch >= config.patience {
            break;
        }
    }
    match best {
        Some((_, params)) => *model = params,
        None => report.best_epoch = report.loss_trace.len() - 1,
    }
    Ok(report)
}
