//! Layer kernels. Each kind has a forward and a backward routine operating
//! on whole NHWC tensors; the graph executor in `graph.rs` wires them up.

use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor, BN_EPS, BN_MOMENTUM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv3x3S1,
    Conv3x3S2,
    Upsample2xNearest,
    LeakyRelu { alpha: f64 },
    BatchNorm,
    MaxPool2x,
    ConcatChannels,
    Sigmoid,
}

impl LayerKind {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Conv3x3S1 | LayerKind::Conv3x3S2 | LayerKind::BatchNorm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    pub fn conv(stride: usize, in_channels: usize, out_channels: usize) -> Self {
        let kind = if stride == 2 {
            LayerKind::Conv3x3S2
        } else {
            LayerKind::Conv3x3S1
        };
        Self {
            kind,
            in_channels,
            out_channels,
        }
    }

    /// Channel-preserving layer.
    pub fn pointwise(kind: LayerKind, channels: usize) -> Self {
        Self {
            kind,
            in_channels: channels,
            out_channels: channels,
        }
    }
}

/// Parameters and buffers a single layer may need.
#[derive(Debug, Clone, Default)]
pub struct LayerParams<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

/// Runs one layer outside of a graph. Train-mode batch norm updates the
/// running statistics held in `params`.
pub fn layer_forward<T: Scalar>(
    spec: &LayerSpec,
    params: &mut LayerParams<T>,
    inputs: &[&Tensor<T>],
    mode: Mode,
) -> Result<Tensor<T>> {
    let name = format!("{:?}", spec.kind);
    let x = inputs.first().ok_or_else(|| Error::contract(&name, "missing input"))?;
    if spec.kind == LayerKind::ConcatChannels {
        let y = inputs.get(1).ok_or_else(|| Error::contract(&name, "concat needs two inputs"))?;
        if x.channels() + y.channels() != spec.out_channels {
            return Err(Error::contract(&name, "channel counts do not add up"));
        }
        return Tensor::concat_channels(x, y);
    }
    check_channels(&name, spec, x)?;
    Ok(match spec.kind {
        LayerKind::Conv3x3S1 | LayerKind::Conv3x3S2 => {
            conv3x3_forward(x, &params.weight, &params.bias, spec.out_channels, stride_of(spec.kind))
        }
        LayerKind::Upsample2xNearest => upsample_forward(x),
        LayerKind::LeakyRelu { alpha } => leaky_relu_forward(x, T::of(alpha)),
        LayerKind::Sigmoid => sigmoid_forward(x),
        LayerKind::MaxPool2x => {
            check_even(&name, x)?;
            maxpool_forward(x).0
        }
        LayerKind::BatchNorm => {
            let p = params;
            match mode {
                Mode::Train => {
                    let (y, _cache) = batchnorm_train(x, &p.gamma, &p.beta, &mut p.running_mean, &mut p.running_var);
                    y
                }
                Mode::Eval => batchnorm_eval(x, &p.gamma, &p.beta, &p.running_mean, &p.running_var).0,
            }
        }
        LayerKind::ConcatChannels => unreachable!(),
    })
}

pub(crate) fn stride_of(kind: LayerKind) -> usize {
    if kind == LayerKind::Conv3x3S2 {
        2
    } else {
        1
    }
}

pub(crate) fn check_channels<T: Scalar>(name: &str, spec: &LayerSpec, x: &Tensor<T>) -> Result<()> {
    if x.channels() != spec.in_channels {
        return Err(Error::contract(
            name,
            format!("expected {} input channels, got shape {:?}", spec.in_channels, x.shape()),
        ));
    }
    Ok(())
}

pub(crate) fn check_even<T: Scalar>(name: &str, x: &Tensor<T>) -> Result<()> {
    if x.height() % 2 != 0 || x.width() % 2 != 0 {
        return Err(Error::contract(name, format!("odd spatial size {:?}", x.shape())));
    }
    Ok(())
}

fn conv_out(size: usize, stride: usize) -> usize {
    (size - 1) / stride + 1
}

/// Patch matrix of one batch item: rows are output pixels, columns are
/// `(ky, kx, c)` taps with zero padding of one pixel.
fn im2col<T: Scalar>(x: &Tensor<T>, item: usize, stride: usize, out: &mut [T]) {
    let [_, h, w, c] = x.shape();
    let (ho, wo) = (conv_out(h, stride), conv_out(w, stride));
    let src = x.item(item);
    let cols = 9 * c;
    debug_assert_eq!(out.len(), ho * wo * cols);
    for oy in 0..ho {
        for ox in 0..wo {
            let row = &mut out[(oy * wo + ox) * cols..(oy * wo + ox + 1) * cols];
            for ky in 0..3 {
                let iy = (oy * stride + ky) as isize - 1;
                for kx in 0..3 {
                    let ix = (ox * stride + kx) as isize - 1;
                    let dst = &mut row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c];
                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                        dst.fill(T::zero());
                    } else {
                        let off = (iy as usize * w + ix as usize) * c;
                        dst.copy_from_slice(&src[off..off + c]);
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Scalar>(cols_data: &[T], shape: [usize; 4], stride: usize, dst: &mut [T]) {
    let [_, h, w, c] = shape;
    let (ho, wo) = (conv_out(h, stride), conv_out(w, stride));
    let cols = 9 * c;
    for oy in 0..ho {
        for ox in 0..wo {
            let row = &cols_data[(oy * wo + ox) * cols..(oy * wo + ox + 1) * cols];
            for ky in 0..3 {
                let iy = (oy * stride + ky) as isize - 1;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = (ox * stride + kx) as isize - 1;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let off = (iy as usize * w + ix as usize) * c;
                    let src = &row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c];
                    for (d, &s) in dst[off..off + c].iter_mut().zip(src) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

/// 3x3 convolution, zero "same" padding. `weight` is `[3, 3, cin, cout]`.
pub fn conv3x3_forward<T: Scalar>(x: &Tensor<T>, weight: &[T], bias: &[T], cout: usize, stride: usize) -> Tensor<T> {
    let [n, h, w, c] = x.shape();
    let (ho, wo) = (conv_out(h, stride), conv_out(w, stride));
    let rows = ho * wo;
    let k = 9 * c;
    debug_assert_eq!(weight.len(), k * cout);
    let mut out = Tensor::zeros([n, ho, wo, cout]);
    let mut cols = vec![T::zero(); rows * k];
    for b in 0..n {
        im2col(x, b, stride, &mut cols);
        let dst = &mut out.data_mut()[b * rows * cout..(b + 1) * rows * cout];
        if cout == 1 {
            for (o, row) in dst.iter_mut().zip(cols.chunks_exact(k)) {
                *o = bias[0] + dot(row, weight);
            }
            continue;
        }
        for px in dst.chunks_exact_mut(cout) {
            px.copy_from_slice(bias);
        }
        T::gemm(rows, k, cout, T::one(), &cols, k as isize, 1, weight, cout as isize, 1, T::one(), dst, cout as isize, 1);
    }
    out
}

/// Dot product with eight independent partial sums (vectorizes without
/// reassociation freedom).
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`.
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (d, &s) in y.iter_mut().zip(x) {
        *d = *d + alpha * s;
    }
}

/// Returns `(dx, dweight, dbias)`.
pub fn conv3x3_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &[T],
    dy: &Tensor<T>,
    stride: usize,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let [n, _, _, c] = x.shape();
    let cout = dy.channels();
    let rows = dy.height() * dy.width();
    let k = 9 * c;
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = vec![T::zero(); k * cout];
    let mut db = vec![T::zero(); cout];
    let mut cols = vec![T::zero(); rows * k];
    let mut dcols = vec![T::zero(); rows * k];
    let per_in = x.height() * x.width() * c;
    for b in 0..n {
        let g = dy.item(b);
        for px in g.chunks_exact(cout) {
            for (acc, &v) in db.iter_mut().zip(px) {
                *acc = *acc + v;
            }
        }
        im2col(x, b, stride, &mut cols);
        if cout == 1 {
            for ((&gv, row), drow) in g.iter().zip(cols.chunks_exact(k)).zip(dcols.chunks_exact_mut(k)) {
                axpy(gv, row, &mut dw);
                for (d, &w) in drow.iter_mut().zip(weight) {
                    *d = gv * w;
                }
            }
        } else {
            // dW += cols^T * g
            T::gemm(k, rows, cout, T::one(), &cols, 1, k as isize, g, cout as isize, 1, T::one(), &mut dw, cout as isize, 1);
            // dcols = g * W^T
            T::gemm(rows, cout, k, T::one(), g, cout as isize, 1, weight, 1, cout as isize, T::zero(), &mut dcols, k as isize, 1);
        }
        col2im_add(&dcols, x.shape(), stride, &mut dx.data_mut()[b * per_in..(b + 1) * per_in]);
    }
    (dx, dw, db)
}

pub fn upsample_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, h, w, c] = x.shape();
    let mut out = Tensor::zeros([n, 2 * h, 2 * w, c]);
    let src = x.data();
    let dst = out.data_mut();
    for b in 0..n {
        for y in 0..2 * h {
            for xx in 0..2 * w {
                let s = ((b * h + y / 2) * w + xx / 2) * c;
                let d = ((b * 2 * h + y) * 2 * w + xx) * c;
                dst[d..d + c].copy_from_slice(&src[s..s + c]);
            }
        }
    }
    out
}

pub fn upsample_backward<T: Scalar>(dy: &Tensor<T>) -> Tensor<T> {
    let [n, h2, w2, c] = dy.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros([n, h, w, c]);
    let src = dy.data();
    let dst = dx.data_mut();
    for b in 0..n {
        for y in 0..h2 {
            for xx in 0..w2 {
                let s = ((b * h2 + y) * w2 + xx) * c;
                let d = ((b * h + y / 2) * w + xx / 2) * c;
                for i in 0..c {
                    dst[d + i] = dst[d + i] + src[s + i];
                }
            }
        }
    }
    dx
}

pub fn leaky_relu_forward<T: Scalar>(x: &Tensor<T>, alpha: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { alpha * v })
}

pub fn leaky_relu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>, alpha: T) -> Tensor<T> {
    let mut dx = dy.clone();
    for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        if v <= T::zero() {
            *g = *g * alpha;
        }
    }
    dx
}

pub fn sigmoid_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Uses the forward output `y`.
pub fn sigmoid_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let mut dx = dy.clone();
    for (g, &s) in dx.data_mut().iter_mut().zip(y.data()) {
        *g = *g * s * (T::one() - s);
    }
    dx
}

/// 2x2 max pooling; also returns the flat input index of every maximum.
pub fn maxpool_forward<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let [n, h, w, c] = x.shape();
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, ho, wo, c]);
    let mut arg = vec![0u32; n * ho * wo * c];
    let src = x.data();
    let dst = out.data_mut();
    for b in 0..n {
        for oy in 0..ho {
            for ox in 0..wo {
                for ch in 0..c {
                    let mut best = usize::MAX;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let i = ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                            if best == usize::MAX || src[i] > src[best] {
                                best = i;
                            }
                        }
                    }
                    let o = ((b * ho + oy) * wo + ox) * c + ch;
                    dst[o] = src[best];
                    arg[o] = best as u32;
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward<T: Scalar>(in_shape: [usize; 4], argmax: &[u32], dy: &Tensor<T>) -> Tensor<T> {
    let mut dx = Tensor::zeros(in_shape);
    let dst = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(dy.data()) {
        dst[i as usize] = dst[i as usize] + g;
    }
    dx
}

/// Normalized activations and per-channel inverse std kept for backward.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<T>,
}

/// Train-mode batch norm over batch and space; updates running statistics.
pub fn batchnorm_train<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &mut [T],
    running_var: &mut [T],
) -> (Tensor<T>, BnCache<T>) {
    let c = x.channels();
    let count = x.len() / c;
    let mut sum = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for (s, &v) in sum.iter_mut().zip(px) {
            *s += v.f64();
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0f64; c];
    for px in x.data().chunks_exact(c) {
        for ((s, &v), m) in sq.iter_mut().zip(px).zip(&mean) {
            let d = v.f64() - m;
            *s += d * d;
        }
    }
    let var: Vec<f64> = sq.iter().map(|s| s / count as f64).collect();
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let unbias = if count > 1 {
        count as f64 / (count as f64 - 1.0)
    } else {
        1.0
    };
    for ch in 0..c {
        running_mean[ch] = T::of(BN_MOMENTUM * running_mean[ch].f64() + (1.0 - BN_MOMENTUM) * mean[ch]);
        running_var[ch] = T::of(BN_MOMENTUM * running_var[ch].f64() + (1.0 - BN_MOMENTUM) * var[ch] * unbias);
    }
    let mut xhat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    for ((px, hx), py) in x
        .data()
        .chunks_exact(c)
        .zip(xhat.data_mut().chunks_exact_mut(c))
        .zip(y.data_mut().chunks_exact_mut(c))
    {
        for ch in 0..c {
            let h = T::of((px[ch].f64() - mean[ch]) * inv_std[ch]);
            hx[ch] = h;
            py[ch] = gamma[ch] * h + beta[ch];
        }
    }
    let inv_std = inv_std.into_iter().map(T::of).collect();
    (y, BnCache { xhat, inv_std })
}

/// Eval-mode batch norm with running statistics.
pub fn batchnorm_eval<T: Scalar>(
    x: &Tensor<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
) -> (Tensor<T>, BnCache<T>) {
    let c = x.channels();
    let inv_std: Vec<T> = running_var.iter().map(|&v| T::of(1.0 / (v.f64() + BN_EPS).sqrt())).collect();
    let mut xhat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    for ((px, hx), py) in x
        .data()
        .chunks_exact(c)
        .zip(xhat.data_mut().chunks_exact_mut(c))
        .zip(y.data_mut().chunks_exact_mut(c))
    {
        for ch in 0..c {
            let h = (px[ch] - running_mean[ch]) * inv_std[ch];
            hx[ch] = h;
            py[ch] = gamma[ch] * h + beta[ch];
        }
    }
    (y, BnCache { xhat, inv_std })
}

/// Returns `(dx, dgamma, dbeta)`. `train` selects whether the batch
/// statistics depended on `x` (train) or were constants (eval).
pub fn batchnorm_backward<T: Scalar>(
    cache: &BnCache<T>,
    gamma: &[T],
    dy: &Tensor<T>,
    train: bool,
) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let c = dy.channels();
    let count = dy.len() / c;
    let mut dgamma = vec![0.0f64; c];
    let mut dbeta = vec![0.0f64; c];
    for (g, h) in dy.data().chunks_exact(c).zip(cache.xhat.data().chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += (g[ch] * h[ch]).f64();
            dbeta[ch] += g[ch].f64();
        }
    }
    let mut dx = Tensor::zeros(dy.shape());
    let n = count as f64;
    for ((g, h), d) in dy
        .data()
        .chunks_exact(c)
        .zip(cache.xhat.data().chunks_exact(c))
        .zip(dx.data_mut().chunks_exact_mut(c))
    {
        for ch in 0..c {
            let gx = gamma[ch].f64() * cache.inv_std[ch].f64();
            d[ch] = if train {
                // dxhat sums: sum(dy*gamma) = gamma*dbeta, sum(dy*gamma*xhat) = gamma*dgamma
                T::of(gx * (g[ch].f64() - dbeta[ch] / n - h[ch].f64() * dgamma[ch] / n))
            } else {
                T::of(gx * g[ch].f64())
            };
        }
    }
    (
        dx,
        dgamma.into_iter().map(T::of).collect(),
        dbeta.into_iter().map(T::of).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 4], seed: u64, scale: f64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()).unwrap()
    }

    #[test]
    fn stride_two_halves_space() {
        let x = Tensor::<f32>::zeros([1, 64, 64, 8]);
        let spec = LayerSpec::conv(2, 8, 16);
        let mut p = LayerParams {
            weight: vec![0.0; 9 * 8 * 16],
            bias: vec![0.0; 16],
            ..Default::default()
        };
        let y = layer_forward(&spec, &mut p, &[&x], Mode::Train).unwrap();
        assert_eq!(y.shape(), [1, 32, 32, 16]);
    }

    #[test]
    fn wrong_channels_named_in_error() {
        let x = Tensor::<f32>::zeros([1, 8, 8, 3]);
        let spec = LayerSpec::conv(1, 4, 4);
        let mut p = LayerParams::default();
        let err = layer_forward(&spec, &mut p, &[&x], Mode::Train).unwrap_err();
        assert!(matches!(err, Error::Contract { ref layer, .. } if layer.contains("Conv3x3S1")));
    }

    #[test]
    fn leaky_relu_definition() {
        let x = Tensor::from_vec([1, 1, 1, 2], vec![-1.0f64, 3.0]).unwrap();
        let y = leaky_relu_forward(&x, 0.2);
        assert!((y.data()[0] + 0.2).abs() < 1e-15);
        assert_eq!(y.data()[1], 3.0);
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let x = Tensor::from_vec([1, 1, 1, 1], vec![0.0f64]).unwrap();
        let y = sigmoid_forward(&x);
        let g = sigmoid_backward(&y, &Tensor::full([1, 1, 1, 1], 1.0));
        assert_eq!(g.data()[0], 0.25);
    }

    #[test]
    fn single_tap_conv_passes_gradient_through() {
        let x = random([2, 5, 5, 1], 1, 1.0);
        let mut w = vec![0.0; 9];
        w[4] = 1.0; // center tap
        let y = conv3x3_forward(&x, &w, &[0.0], 1, 1);
        assert_eq!(y, x);
        let dy = random([2, 5, 5, 1], 2, 1.0);
        let (dx, _, _) = conv3x3_backward(&x, &w, &dy, 1);
        assert_eq!(dx, dy);
    }

    #[test]
    fn batchnorm_train_standardizes() {
        let x = random([4, 6, 6, 3], 3, 5.0);
        let (y, _) = batchnorm_train(&x, &[1.0; 3], &[0.0; 3], &mut [0.0; 3], &mut [1.0; 3]);
        for ch in 0..3 {
            let v: Vec<f64> = y.data().iter().skip(ch).step_by(3).copied().collect();
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
            assert!(m.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-5, "var {var}");
        }
    }

    #[test]
    fn maxpool_then_upsample_constant_identity() {
        let x = Tensor::full([2, 8, 8, 3], 0.7f64);
        let (p, _) = maxpool_forward(&x);
        assert_eq!(upsample_forward(&p), x);
    }

    #[test]
    fn concat_split_roundtrip() {
        let a = random([2, 3, 3, 2], 4, 1.0);
        let b = random([2, 3, 3, 5], 5, 1.0);
        let c = Tensor::concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), [2, 3, 3, 7]);
        let (a2, b2) = c.split_channels(2);
        assert_eq!((a2, b2), (a, b));
    }
}
