use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::{batch_gradient, TrainConfig};
use super::*;
use crate::error::Error;

fn small_arch() -> Architecture {
    Architecture {
        mlp_hidden: vec![(12, Activation::Relu), (8, Activation::Relu), (6, Activation::Sigmoid)],
        conv_channels: vec![3, 4, 4, 5],
        image_embedding: 10,
        image_head: vec![8, 6],
        trunk: vec![12, 10, 8, 6],
    }
}

fn random_example(rng: &mut ChaCha8Rng, text: usize, image: Option<(usize, usize)>) -> Example {
    Example {
        text: (0..text).map(|_| rng.random_range(-1.0..1.0)).collect(),
        image: image.map(|(h, w)| ImageTensor { height: h, width: w, pixels: (0..h * w).map(|_| rng.random_range(0.0..2.0)).collect() }),
    }
}

fn loss(model: &Regressor, xs: &[&Example], ys: &[f64]) -> f64 {
    let p = model.predict(xs).unwrap();
    p.iter().zip(ys).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / xs.len() as f64
}

/// Compares every tensor's analytic gradient with central differences on
/// `per_tensor` random coordinates.
fn check_gradients(model: &Regressor, xs: &[&Example], ys: &[f64], per_tensor: usize, seed: u64) {
    let mut grad = model.zeros_like();
    batch_gradient(model, xs, ys, xs.len(), &mut grad).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<_> = model.named_tensors().into_iter().map(|(n, t)| (n, t.len())).collect();
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.to_vec()).collect();
    let h = 1e-4;
    for (k, (name, len)) in names.iter().enumerate() {
        for _ in 0..per_tensor.min(*len) {
            let i = rng.random_range(0..*len);
            let mut plus = model.clone();
            plus.tensors_mut()[k][i] += h;
            let mut minus = model.clone();
            minus.tensors_mut()[k][i] -= h;
            let numeric = (loss(&plus, xs, ys) - loss(&minus, xs, ys)) / (2.0 * h);
            let a = analytic[k][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "{name}[{i}]: analytic {a} numeric {numeric}");
        }
    }
}

#[test]
fn mlp_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = Regressor::Mlp(MlpRegressor::new(7, &small_arch(), 5));
    let xs: Vec<Example> = (0..4).map(|_| random_example(&mut rng, 7, None)).collect();
    let refs: Vec<&Example> = xs.iter().collect();
    check_gradients(&model, &refs, &[0.5, -1.0, 2.0, 0.0], 20, 2);
}

#[test]
fn cnn_and_fusion_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = Regressor::MultiModal(MultiModalModel::new(5, &small_arch(), 10));
    let xs: Vec<Example> = (0..3).map(|_| random_example(&mut rng, 5, Some((8, 8)))).collect();
    let refs: Vec<&Example> = xs.iter().collect();
    check_gradients(&model, &refs, &[1.0, -0.5, 0.25], 20, 4);
}

#[test]
fn odd_sized_image_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let model = Regressor::MultiModal(MultiModalModel::new(0, &small_arch(), 2));
    let xs: Vec<Example> = (0..2).map(|_| random_example(&mut rng, 0, Some((7, 5)))).collect();
    let refs: Vec<&Example> = xs.iter().collect();
    check_gradients(&model, &refs, &[0.3, 0.9], 10, 5);
}

#[test]
fn encoder_output_width() {
    let model = MultiModalModel::new(0, &Architecture::default(), 0);
    for (h, w) in [(8, 8), (16, 16), (31, 20)] {
        let img = ImageTensor { height: h, width: w, pixels: vec![0.5; h * w] };
        assert_eq!(model.encoder.encode(&img).unwrap().len(), 512);
    }
}

#[test]
fn zero_model_predicts_zero() {
    let mut model = Regressor::Mlp(MlpRegressor::new(4, &Architecture::default(), 0));
    for t in model.tensors_mut() {
        t.fill(0.0);
    }
    let x = Example { text: vec![3.0, -1.0, 2.0, 7.0], image: None };
    assert_eq!(model.forward(&x).unwrap(), 0.0);
}

#[test]
fn zero_upstream_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = Regressor::MultiModal(MultiModalModel::new(3, &small_arch(), 1));
    let x = random_example(&mut rng, 3, Some((8, 8)));
    let mut cache = ForwardCache::default();
    model.forward_batch(&[&x], &mut cache).unwrap();
    let mut grad = model.zeros_like();
    model.backward(&cache, &[0.0], &mut grad);
    assert!(grad.tensors().iter().all(|t| t.iter().all(|&g| g == 0.0)));
}

#[test]
fn predict_batching() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = Regressor::MultiModal(MultiModalModel::new(4, &small_arch(), 3));
    let xs: Vec<Example> = (0..6).map(|_| random_example(&mut rng, 4, Some((9, 9)))).collect();
    let refs: Vec<&Example> = xs.iter().collect();
    assert!(model.predict(&[]).unwrap().is_empty());
    let all = model.predict(&refs).unwrap();
    let singles: Vec<f64> = refs.iter().map(|x| model.forward(x).unwrap()).collect();
    assert_eq!(all, singles);
    let reversed: Vec<&Example> = refs.iter().rev().copied().collect();
    let mut back = model.predict(&reversed).unwrap();
    back.reverse();
    assert_eq!(back, all);
    assert_eq!(model.predict(&refs).unwrap(), all);
}

#[test]
fn dimension_checks() {
    let model = Regressor::Mlp(MlpRegressor::new(4, &small_arch(), 0));
    let x = Example { text: vec![1.0; 3], image: None };
    assert_eq!(model.forward(&x).unwrap_err(), Error::DimensionMismatch { expected: 4, got: 3 });
    let mm = Regressor::MultiModal(MultiModalModel::new(3, &small_arch(), 0));
    assert!(matches!(mm.forward(&x), Err(Error::MissingImage(_))));
}

fn line_data(n: usize) -> Dataset {
    let xs: Vec<Example> = (0..n)
        .map(|i| Example { text: vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64], image: None })
        .collect();
    let ys = xs.iter().map(|x| 3.0 * x.text[0] + 1.0).collect();
    Dataset::new(xs, ys).unwrap()
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let data = line_data(20);
    let start = Regressor::Mlp(MlpRegressor::new(1, &small_arch(), 4));
    let mut model = start.clone();
    let cfg = TrainConfig { learning_rate: 0.0, epochs: 5, validation_fraction: 0.0, batch_size: 6, ..Default::default() };
    let report = train(&mut model, &data, &cfg).unwrap();
    assert_eq!(model, start);
    assert_eq!(report.loss_trace.len(), 5);
    assert!(report.loss_trace.iter().all(|l| *l == report.loss_trace[0]));
}

#[test]
fn fits_a_line() {
    let data = line_data(64);
    let mut model = Regressor::Mlp(MlpRegressor::new(1, &Architecture::default(), 7));
    let cfg = TrainConfig { epochs: 300, validation_fraction: 0.0, ..Default::default() };
    let report = train(&mut model, &data, &cfg).unwrap();
    let idx: Vec<usize> = (0..data.len()).collect();
    let final_mse = train::mse(&model, &data, &idx, 32).unwrap();
    assert!(final_mse < 1e-2, "mse {final_mse}, trace tail {:?}", &report.loss_trace[report.loss_trace.len() - 3..]);
}

#[test]
fn training_is_deterministic() {
    let data = line_data(30);
    let cfg = TrainConfig { epochs: 15, ..Default::default() };
    let run = || {
        let mut m = Regressor::Mlp(MlpRegressor::new(1, &small_arch(), 1));
        let r = train(&mut m, &data, &cfg).unwrap();
        (m, r)
    };
    assert_eq!(run(), run());
}

#[test]
fn inputs_are_not_mutated() {
    let data = line_data(20);
    let before = data.clone();
    let mut m = Regressor::Mlp(MlpRegressor::new(1, &small_arch(), 1));
    train(&mut m, &data, &TrainConfig { epochs: 3, ..Default::default() }).unwrap();
    assert_eq!(data, before);
}

#[test]
fn divergence_is_reported() {
    let mut data = line_data(10);
    data.targets[3] = f64::INFINITY;
    let mut m = Regressor::Mlp(MlpRegressor::new(1, &small_arch(), 1));
    let err = train(&mut m, &data, &TrainConfig { validation_fraction: 0.0, ..Default::default() }).unwrap_err();
    assert_eq!(err, Error::Diverged { epoch: 0 });
}

#[test]
fn layer_list_round_trip() {
    for model in [
        Regressor::Mlp(MlpRegressor::new(6, &small_arch(), 0)),
        Regressor::MultiModal(MultiModalModel::new(6, &small_arch(), 0)),
        Regressor::MultiModal(MultiModalModel::new(0, &small_arch(), 0)),
    ] {
        let rebuilt = Regressor::from_layers(&model.layers()).unwrap();
        assert_eq!(rebuilt, model.zeros_like());
    }
}

