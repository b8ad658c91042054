//! Layer kernels. Dense layers work on row-major batches; convolution and
//! pooling work on one `channels × height × width` sample at a time.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Dot product with independent partial sums so the loop vectorises.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Fully connected layer, weights stored `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense { inputs, outputs, activation, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// He-uniform for relu, Glorot-uniform otherwise; zero bias.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = match activation {
            Activation::Relu => libm::sqrt(6.0 / inputs.max(1) as f64),
            _ => libm::sqrt(6.0 / (inputs + outputs).max(1) as f64),
        };
        let mut layer = Self::zeros(inputs, outputs, activation);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn forward(&self, x: &[f64], batch: usize, y: &mut Vec<f64>) {
        y.clear();
        y.resize(batch * self.outputs, 0.0);
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            for b in 0..batch {
                let z = self.bias[o] + dot(row, &x[b * self.inputs..(b + 1) * self.inputs]);
                y[b * self.outputs + o] = self.activation.apply(z);
            }
        }
    }

    /// `dy` holds the loss gradient w.r.t. this layer's outputs and is
    /// overwritten with the pre-activation gradient. Parameter gradients
    /// accumulate into `grad`; the input gradient is written to `dx` if given.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &mut [f64], batch: usize, grad: &mut Dense, dx: Option<&mut Vec<f64>>) {
        for (d, &out) in dy.iter_mut().zip(y) {
            *d *= self.activation.derivative_at_output(out);
        }
        for o in 0..self.outputs {
            let grow = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for b in 0..batch {
                let g = dy[b * self.outputs + o];
                if g != 0.0 {
                    axpy(g, &x[b * self.inputs..(b + 1) * self.inputs], grow);
                }
                grad.bias[o] += g;
            }
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.resize(batch * self.inputs, 0.0);
            for o in 0..self.outputs {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                for b in 0..batch {
                    let g = dy[b * self.outputs + o];
                    if g != 0.0 {
                        axpy(g, row, &mut dx[b * self.inputs..(b + 1) * self.inputs]);
                    }
                }
            }
        }
    }
}

/// Shape of a single-sample feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MapShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl MapShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn plane(&self) -> usize {
        self.height * self.width
    }
}

/// 3×3 convolution, stride 1, zero padding 1, followed by relu.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `out × in × 3 × 3`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

const K: usize = 3;

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Conv2d {
            in_channels,
            out_channels,
            weights: vec![0.0; out_channels * in_channels * K * K],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn init<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (in_channels * K * K) as f64);
        let mut layer = Self::zeros(in_channels, out_channels);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    fn kernel(&self, co: usize, ci: usize) -> &[f64] {
        let at = (co * self.in_channels + ci) * K * K;
        &self.weights[at..at + K * K]
    }

    /// Returns the post-relu output map.
    pub fn forward(&self, x: &[f64], shape: MapShape, out: &mut Vec<f64>) -> MapShape {
        let (h, w) = (shape.height, shape.width);
        let plane = shape.plane();
        out.clear();
        out.resize(self.out_channels * plane, 0.0);
        for co in 0..self.out_channels {
            let dst = &mut out[co * plane..(co + 1) * plane];
            dst.iter_mut().for_each(|v| *v = self.bias[co]);
            for ci in 0..self.in_channels {
                let src = &x[ci * plane..(ci + 1) * plane];
                let kern = self.kernel(co, ci);
                for ky in 0..K {
                    for kx in 0..K {
                        let wv = kern[ky * K + kx];
                        for_each_tap(h, w, ky, kx, |oy, ox0, iy, ix0, len| {
                            axpy(wv, &src[iy * w + ix0..iy * w + ix0 + len], &mut dst[oy * w + ox0..oy * w + ox0 + len]);
                        });
                    }
                }
            }
            dst.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        MapShape { channels: self.out_channels, height: h, width: w }
    }

    /// `dy` is the gradient w.r.t. the post-relu output `y` and is masked in
    /// place. Accumulates parameter gradients and writes `dx`.
    pub fn backward(&self, x: &[f64], shape: MapShape, y: &[f64], dy: &mut [f64], grad: &mut Conv2d, dx: Option<&mut Vec<f64>>) {
        let (h, w) = (shape.height, shape.width);
        let plane = shape.plane();
        for (d, &out) in dy.iter_mut().zip(y) {
            if out <= 0.0 {
                *d = 0.0;
            }
        }
        for co in 0..self.out_channels {
            let g = &dy[co * plane..(co + 1) * plane];
            grad.bias[co] += g.iter().sum::<f64>();
            for ci in 0..self.in_channels {
                let src = &x[ci * plane..(ci + 1) * plane];
                let at = (co * self.in_channels + ci) * K * K;
                for ky in 0..K {
                    for kx in 0..K {
                        let mut acc = 0.0;
                        for_each_tap(h, w, ky, kx, |oy, ox0, iy, ix0, len| {
                            acc += dot(&g[oy * w + ox0..oy * w + ox0 + len], &src[iy * w + ix0..iy * w + ix0 + len]);
                        });
                        grad.weights[at + ky * K + kx] += acc;
                    }
                }
            }
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.resize(self.in_channels * plane, 0.0);
            for co in 0..self.out_channels {
                let g = &dy[co * plane..(co + 1) * plane];
                for ci in 0..self.in_channels {
                    let kern = self.kernel(co, ci);
                    let dst = &mut dx[ci * plane..(ci + 1) * plane];
                    for ky in 0..K {
                        for kx in 0..K {
                            let wv = kern[ky * K + kx];
                            for_each_tap(h, w, ky, kx, |oy, ox0, iy, ix0, len| {
                                axpy(wv, &g[oy * w + ox0..oy * w + ox0 + len], &mut dst[iy * w + ix0..iy * w + ix0 + len]);
                            });
                        }
                    }
                }
            }
        }
    }
}

/// Visits the output rows touched by kernel tap `(ky, kx)`: output pixel
/// `(oy, ox)` reads input `(oy + ky - 1, ox + kx - 1)` when in bounds.
#[inline]
fn for_each_tap(h: usize, w: usize, ky: usize, kx: usize, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
    let ox0 = if kx == 0 { 1 } else { 0 };
    let ox1 = if kx == 2 { w - 1 } else { w };
    if ox1 <= ox0 {
        return;
    }
    let oy0 = if ky == 0 { 1 } else { 0 };
    let oy1 = if ky == 2 { h.saturating_sub(1) } else { h };
    for oy in oy0..oy1 {
        let iy = oy + ky - 1;
        f(oy, ox0, iy, ox0 + kx - 1, ox1 - ox0);
    }
}

/// 2×2 max pooling, stride 2. Odd edges form partial windows, so a 1×1
/// map stays 1×1.
pub fn max_pool_forward(x: &[f64], shape: MapShape, out: &mut Vec<f64>, argmax: &mut Vec<usize>) -> MapShape {
    let (h, w) = (shape.height, shape.width);
    let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
    out.clear();
    argmax.clear();
    for c in 0..shape.channels {
        let base = c * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + 2 * oy * w + 2 * ox;
                for iy in 2 * oy..(2 * oy + 2).min(h) {
                    for ix in 2 * ox..(2 * ox + 2).min(w) {
                        let at = base + iy * w + ix;
                        if x[at] > x[best] {
                            best = at;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    MapShape { channels: shape.channels, height: ho, width: wo }
}

pub fn max_pool_backward(dy: &[f64], argmax: &[usize], input_len: usize, dx: &mut Vec<f64>) {
    dx.clear();
    dx.resize(input_len, 0.0);
    for (&g, &at) in dy.iter().zip(argmax) {
        dx[at] += g;
    }
}

pub fn global_average_pool(x: &[f64], shape: MapShape) -> Vec<f64> {
    let plane = shape.plane();
    (0..shape.channels).map(|c| x[c * plane..(c + 1) * plane].iter().sum::<f64>() / plane as f64).collect()
}

pub fn global_average_pool_backward(dy: &[f64], shape: MapShape, dx: &mut Vec<f64>) {
    let plane = shape.plane();
    dx.clear();
    for &g in dy {
        dx.extend(core::iter::repeat_n(g / plane as f64, plane));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn identity_kernel_is_copy() {
        let mut conv = Conv2d::zeros(1, 1);
        conv.weights[4] = 1.0;
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut y = Vec::new();
        conv.forward(&x, MapShape { channels: 1, height: 3, width: 4 }, &mut y);
        assert_eq!(y, x);
    }

    #[test]
    fn shifted_kernel_pads_with_zero() {
        // tap (0,0) reads the up-left neighbour
        let mut conv = Conv2d::zeros(1, 1);
        conv.weights[0] = 1.0;
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let mut y = Vec::new();
        conv.forward(&x, MapShape { channels: 1, height: 2, width: 2 }, &mut y);
        assert_eq!(y, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn pooling_odd_sizes() {
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let (mut y, mut arg) = (Vec::new(), Vec::new());
        let s = max_pool_forward(&x, MapShape { channels: 1, height: 3, width: 3 }, &mut y, &mut arg);
        assert_eq!((s.height, s.width), (2, 2));
        assert_eq!(y, vec![4.0, 5.0, 7.0, 8.0]);
        let s = max_pool_forward(&[3.0], MapShape { channels: 1, height: 1, width: 1 }, &mut y, &mut arg);
        assert_eq!((s.height, s.width, y[0]), (1, 1, 3.0));
    }
}
