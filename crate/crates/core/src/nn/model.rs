//! Regressors: the text MLP and the image/text fusion network.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    global_average_pool, global_average_pool_backward, max_pool_backward, max_pool_forward, Activation, Conv2d,
    Dense, MapShape,
};
use crate::error::{Error, Result};

/// Layer widths. Every list is configurable; defaults follow the reference
/// architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub mlp_hidden: Vec<(usize, Activation)>,
    pub conv_channels: Vec<usize>,
    pub image_embedding: usize,
    pub image_head: Vec<usize>,
    pub trunk: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            mlp_hidden: vec![(512, Activation::Relu), (256, Activation::Relu), (64, Activation::Sigmoid)],
            conv_channels: vec![16, 32, 64, 128],
            image_embedding: 512,
            image_head: vec![384, 256],
            trunk: vec![1024, 512, 256, 64],
        }
    }
}

/// Single-channel image as fed to the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

/// One regression input. `text` may be empty for image-only models.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub text: Vec<f64>,
    pub image: Option<ImageTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor {
    /// Hidden layers followed by the linear output layer.
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnEncoder {
    pub convs: Vec<Conv2d>,
    pub projection: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalModel {
    /// Width of the text block; 0 gives an image-only model.
    pub text_dim: usize,
    pub encoder: CnnEncoder,
    pub head: Vec<Dense>,
    /// Fusion layers followed by the linear output layer.
    pub trunk: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Mlp(MlpRegressor),
    MultiModal(MultiModalModel),
}

fn dense_stack(rng: &mut ChaCha8Rng, input: usize, hidden: &[(usize, Activation)], output: Option<usize>) -> Vec<Dense> {
    let mut layers = Vec::new();
    let mut width = input;
    for &(w, act) in hidden {
        layers.push(Dense::init(width, w, act, rng));
        width = w;
    }
    if let Some(o) = output {
        layers.push(Dense::init(width, o, Activation::Identity, rng));
    }
    layers
}

impl MlpRegressor {
    pub fn new(input: usize, arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MlpRegressor { layers: dense_stack(&mut rng, input, &arch.mlp_hidden, Some(1)) }
    }
}

impl CnnEncoder {
    fn new(rng: &mut ChaCha8Rng, arch: &Architecture) -> Self {
        let mut convs = Vec::new();
        let mut c = 1;
        for &out in &arch.conv_channels {
            convs.push(Conv2d::init(c, out, rng));
            c = out;
        }
        let projection = Dense::init(c, arch.image_embedding, Activation::Identity, rng);
        CnnEncoder { convs, projection }
    }

    pub fn output_dim(&self) -> usize {
        self.projection.outputs
    }

    /// Encodes one image into the embedding vector.
    pub fn encode(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        let mut cache = EncoderCache::default();
        let pooled = self.features(image, &mut cache)?;
        let mut out = Vec::new();
        self.projection.forward(&pooled, 1, &mut out);
        Ok(out)
    }

    /// Conv blocks and global average pooling, before the projection.
    fn features(&self, image: &ImageTensor, cache: &mut EncoderCache) -> Result<Vec<f64>> {
        if image.height == 0 || image.width == 0 || image.pixels.len() != image.height * image.width {
            return Err(Error::InvalidImage(alloc::format!(
                "{}x{} image with {} pixels",
                image.height,
                image.width,
                image.pixels.len()
            )));
        }
        let mut shape = MapShape { channels: 1, height: image.height, width: image.width };
        cache.blocks.clear();
        let mut input = image.pixels.clone();
        for conv in &self.convs {
            let mut block = BlockCache { input_shape: shape, ..BlockCache::default() };
            let conv_shape = conv.forward(&input, shape, &mut block.activated);
            shape = max_pool_forward(&block.activated, conv_shape, &mut block.pooled, &mut block.argmax);
            block.input = input;
            input = block.pooled.clone();
            cache.blocks.push(block);
        }
        cache.final_shape = shape;
        Ok(global_average_pool(&input, shape))
    }

    fn backward_features(&self, cache: &EncoderCache, d_pooled: &[f64], grad: &mut CnnEncoder) {
        let mut d = Vec::new();
        global_average_pool_backward(d_pooled, cache.final_shape, &mut d);
        let mut d_act = Vec::new();
        let mut d_in = Vec::new();
        for (i, (conv, block)) in self.convs.iter().zip(&cache.blocks).enumerate().rev() {
            max_pool_backward(&d, &block.argmax, block.activated.len(), &mut d_act);
            let want_dx = i > 0;
            conv.backward(
                &block.input,
                block.input_shape,
                &block.activated,
                &mut d_act,
                &mut grad.convs[i],
                want_dx.then_some(&mut d_in),
            );
            core::mem::swap(&mut d, &mut d_in);
        }
    }
}

#[derive(Debug, Clone, Default)]
struct BlockCache {
    input: Vec<f64>,
    input_shape: MapShape,
    activated: Vec<f64>,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct EncoderCache {
    blocks: Vec<BlockCache>,
    final_shape: MapShape,
}

impl MultiModalModel {
    pub fn new(text_dim: usize, arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = CnnEncoder::new(&mut rng, arch);
        let head_spec: Vec<_> = arch.image_head.iter().map(|&w| (w, Activation::Relu)).collect();
        let head = dense_stack(&mut rng, encoder.output_dim(), &head_spec, None);
        let head_out = head.last().map_or(encoder.output_dim(), |l| l.outputs);
        let trunk_spec: Vec<_> = arch.trunk.iter().map(|&w| (w, Activation::Relu)).collect();
        let trunk = dense_stack(&mut rng, text_dim + head_out, &trunk_spec, Some(1));
        MultiModalModel { text_dim, encoder, head, trunk }
    }

    pub fn image_width(&self) -> usize {
        self.head.last().map_or(self.encoder.output_dim(), |l| l.outputs)
    }
}

/// Activations kept from a batched forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    batch: usize,
    encoders: Vec<EncoderCache>,
    /// Stacked pooled image features, then the input of every dense layer in
    /// order, and finally the prediction column.
    image_stack: Vec<Vec<f64>>,
    main_stack: Vec<Vec<f64>>,
}

fn run_stack<'a>(layers: impl IntoIterator<Item = &'a Dense>, input: Vec<f64>, batch: usize, keep: &mut Vec<Vec<f64>>) {
    keep.clear();
    keep.push(input);
    for layer in layers {
        let mut y = Vec::new();
        layer.forward(keep.last().unwrap(), batch, &mut y);
        keep.push(y);
    }
}

/// Returns the gradient with respect to the stack input if `want_input`.
fn back_stack(
    layers: &[&Dense],
    grads: &mut [&mut Dense],
    acts: &[Vec<f64>],
    mut d: Vec<f64>,
    batch: usize,
    want_input: bool,
) -> Vec<f64> {
    for i in (0..layers.len()).rev() {
        let mut dx = Vec::new();
        let need = i > 0 || want_input;
        layers[i].backward(&acts[i], &acts[i + 1], &mut d, batch, grads[i], need.then_some(&mut dx));
        d = dx;
    }
    d
}

impl Regressor {
    pub fn input_dim(&self) -> usize {
        match self {
            Regressor::Mlp(m) => m.layers[0].inputs,
            Regressor::MultiModal(m) => m.text_dim,
        }
    }

    pub fn uses_images(&self) -> bool {
        matches!(self, Regressor::MultiModal(_))
    }

    fn check(&self, x: &Example) -> Result<()> {
        if x.text.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.text.len() });
        }
        if self.uses_images() && x.image.is_none() {
            return Err(Error::MissingImage(String::from("model requires an image input")));
        }
        Ok(())
    }

    pub fn forward_batch(&self, batch: &[&Example], cache: &mut ForwardCache) -> Result<Vec<f64>> {
        for x in batch {
            self.check(x)?;
        }
        let n = batch.len();
        cache.batch = n;
        match self {
            Regressor::Mlp(m) => {
                let input: Vec<f64> = batch.iter().flat_map(|x| x.text.iter().copied()).collect();
                run_stack(&m.layers, input, n, &mut cache.main_stack);
            }
            Regressor::MultiModal(m) => {
                cache.encoders.resize_with(n, EncoderCache::default);
                let mut pooled = Vec::new();
                for (x, enc) in batch.iter().zip(cache.encoders.iter_mut()) {
                    pooled.extend(m.encoder.features(x.image.as_ref().unwrap(), enc)?);
                }
                let chain = core::iter::once(&m.encoder.projection).chain(&m.head);
                run_stack(chain, pooled, n, &mut cache.image_stack);
                let img = cache.image_stack.last().unwrap();
                let iw = m.image_width();
                let mut fused = Vec::with_capacity(n * (m.text_dim + iw));
                for (b, x) in batch.iter().enumerate() {
                    fused.extend_from_slice(&x.text);
                    fused.extend_from_slice(&img[b * iw..(b + 1) * iw]);
                }
                run_stack(&m.trunk, fused, n, &mut cache.main_stack);
            }
        }
        Ok(cache.main_stack.last().unwrap().clone())
    }

    /// Accumulates parameter gradients into `grad` given `d_out`, the loss
    /// gradient for each prediction of the cached batch.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut Regressor) {
        let n = cache.batch;
        match (self, grad) {
            (Regressor::Mlp(m), Regressor::Mlp(g)) => {
                let layers: Vec<&Dense> = m.layers.iter().collect();
                let mut grads: Vec<&mut Dense> = g.layers.iter_mut().collect();
                back_stack(&layers, &mut grads, &cache.main_stack, d_out.to_vec(), n, false);
            }
            (Regressor::MultiModal(m), Regressor::MultiModal(g)) => {
                let trunk: Vec<&Dense> = m.trunk.iter().collect();
                let mut trunk_grad: Vec<&mut Dense> = g.trunk.iter_mut().collect();
                let d_fused = back_stack(&trunk, &mut trunk_grad, &cache.main_stack, d_out.to_vec(), n, true);
                let iw = m.image_width();
                let width = m.text_dim + iw;
                let d_img: Vec<f64> = (0..n)
                    .flat_map(|b| d_fused[b * width + m.text_dim..(b + 1) * width].iter().copied())
                    .collect();
                let chain: Vec<&Dense> = core::iter::once(&m.encoder.projection).chain(&m.head).collect();
                let mut chain_grad: Vec<&mut Dense> =
                    core::iter::once(&mut g.encoder.projection).chain(g.head.iter_mut()).collect();
                let d_pooled = back_stack(&chain, &mut chain_grad, &cache.image_stack, d_img, n, true);
                let c = m.encoder.projection.inputs;
                for b in 0..n {
                    m.encoder.backward_features(&cache.encoders[b], &d_pooled[b * c..(b + 1) * c], &mut g.encoder);
                }
            }
            _ => panic!("gradient buffer does not match model"),
        }
    }

    pub fn predict(&self, inputs: &[&Example]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        self.forward_batch(inputs, &mut ForwardCache::default())
    }

    pub fn forward(&self, x: &Example) -> Result<f64> {
        Ok(self.predict(&[x])?[0])
    }

    /// Same architecture with every parameter zero.
    pub fn zeros_like(&self) -> Regressor {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named parameter tensors in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        fn dense<'a>(out: &mut Vec<(String, &'a [f64])>, prefix: &str, layers: &'a [Dense]) {
            for (i, l) in layers.iter().enumerate() {
                out.push((alloc::format!("{prefix}{i}.weight"), &l.weights[..]));
                out.push((alloc::format!("{prefix}{i}.bias"), &l.bias[..]));
            }
        }
        let mut out: Vec<(String, &[f64])> = Vec::new();
        match self {
            Regressor::Mlp(m) => dense(&mut out, "mlp", &m.layers),
            Regressor::MultiModal(m) => {
                for (i, c) in m.encoder.convs.iter().enumerate() {
                    out.push((alloc::format!("conv{i}.weight"), &c.weights[..]));
                    out.push((alloc::format!("conv{i}.bias"), &c.bias[..]));
                }
                dense(&mut out, "proj", core::slice::from_ref(&m.encoder.projection));
                dense(&mut out, "head", &m.head);
                dense(&mut out, "trunk", &m.trunk);
            }
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        match self {
            Regressor::Mlp(m) => {
                for l in &mut m.layers {
                    out.push(&mut l.weights);
                    out.push(&mut l.bias);
                }
            }
            Regressor::MultiModal(m) => {
                for c in &mut m.encoder.convs {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                out.push(&mut m.encoder.projection.weights);
                out.push(&mut m.encoder.projection.bias);
                for l in m.head.iter_mut().chain(m.trunk.iter_mut()) {
                    out.push(&mut l.weights);
                    out.push(&mut l.bias);
                }
            }
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Ordered layer list used by checkpoints to rebuild the model.
    pub fn layers(&self) -> Vec<LayerDesc> {
        let dense = |section, l: &Dense| LayerDesc {
            section,
            inputs: l.inputs,
            outputs: l.outputs,
            activation: l.activation,
        };
        match self {
            Regressor::Mlp(m) => m.layers.iter().map(|l| dense(Section::Mlp, l)).collect(),
            Regressor::MultiModal(m) => {
                let mut out: Vec<LayerDesc> = m
                    .encoder
                    .convs
                    .iter()
                    .map(|c| LayerDesc {
                        section: Section::Conv,
                        inputs: c.in_channels,
                        outputs: c.out_channels,
                        activation: Activation::Relu,
                    })
                    .collect();
                out.push(dense(Section::Projection, &m.encoder.projection));
                out.extend(m.head.iter().map(|l| dense(Section::Head, l)));
                out.extend(m.trunk.iter().map(|l| dense(Section::Trunk, l)));
                out
            }
        }
    }

    /// Zero-initialised model with the given layer list.
    pub fn from_layers(layers: &[LayerDesc]) -> Result<Regressor> {
        let bad = |msg: &str| Error::InvalidSpec(String::from(msg));
        let dense = |d: &LayerDesc| Dense::zeros(d.inputs, d.outputs, d.activation);
        if layers.is_empty() {
            return Err(bad("no layers"));
        }
        let model = if layers.iter().all(|l| l.section == Section::Mlp) {
            Regressor::Mlp(MlpRegressor { layers: layers.iter().map(dense).collect() })
        } else {
            let of = |s: Section| layers.iter().filter(move |l| l.section == s);
            let convs: Vec<Conv2d> = of(Section::Conv).map(|d| Conv2d::zeros(d.inputs, d.outputs)).collect();
            let projection = of(Section::Projection).next().map(dense).ok_or_else(|| bad("missing projection"))?;
            let head: Vec<Dense> = of(Section::Head).map(dense).collect();
            let trunk: Vec<Dense> = of(Section::Trunk).map(dense).collect();
            let image = head.last().map_or(projection.outputs, |l| l.outputs);
            let first = trunk.first().ok_or_else(|| bad("missing trunk"))?;
            let text_dim = first.inputs.checked_sub(image).ok_or_else(|| bad("trunk narrower than image branch"))?;
            Regressor::MultiModal(MultiModalModel {
                text_dim,
                encoder: CnnEncoder { convs, projection },
                head,
                trunk,
            })
        };
        if model.layers() != layers {
            return Err(bad("layer list out of order"));
        }
        model.validate_shapes()?;
        Ok(model)
    }

    fn validate_shapes(&self) -> Result<()> {
        let chain = |layers: &[Dense]| layers.windows(2).all(|w| w[0].outputs == w[1].inputs);
        let ok = match self {
            Regressor::Mlp(m) => chain(&m.layers) && m.layers.last().is_some_and(|l| l.outputs == 1),
            Regressor::MultiModal(m) => {
                let convs_ok = m.encoder.convs.first().is_none_or(|c| c.in_channels == 1)
                    && m.encoder.convs.windows(2).all(|w| w[0].out_channels == w[1].in_channels)
                    && m.encoder.convs.last().map_or(1, |c| c.out_channels) == m.encoder.projection.inputs;
                let head_ok = m.head.first().is_none_or(|h| h.inputs == m.encoder.projection.outputs) && chain(&m.head);
                convs_ok && head_ok && chain(&m.trunk) && m.trunk.last().is_some_and(|l| l.outputs == 1)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(String::from("layer shapes do not chain")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    Mlp,
    Conv,
    Projection,
    Head,
    Trunk,
}

impl Section {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [Section::Mlp, Section::Conv, Section::Projection, Section::Head, Section::Trunk]
            .get(code as usize)
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDesc {
    pub section: Section,
    /// Input width, or input channels for convolutions.
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}
