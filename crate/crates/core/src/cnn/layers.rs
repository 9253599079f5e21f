//! Layer primitives: valid 2-D cross-correlation, ReLU, 2x2 max pooling,
//! inverted dropout, fully connected layers and softmax cross-entropy.
//!
//! Each op comes as a forward function plus an exact backward. Convolution
//! lowers each batch item to an im2col matrix and runs one GEMM per item.

use rand::Rng;

use super::gemm::{gemm, MatRef};
use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Convolution kernels `(out_ch, in_ch, k, k)` and one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize) -> Result<Self> {
        if kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd, got {kernel_size}"
            )));
        }
        Ok(ConvLayer {
            out_channels,
            in_channels,
            kernel_size,
            kernels: vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            bias: vec![0.0; out_channels],
        })
    }

    pub fn kernel_index(&self, o: usize, c: usize, u: usize, v: usize) -> usize {
        ((o * self.in_channels + c) * self.kernel_size + u) * self.kernel_size + v
    }

    /// Rows of the im2col matrix: `in_ch * k * k`.
    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let k = self.kernel_size;
        if h < k || w < k {
            return Err(Error::Shape(format!(
                "{h}x{w} input is smaller than the {k}x{k} kernel"
            )));
        }
        Ok((h - k + 1, w - k + 1))
    }

    fn check_input(&self, x: &Tensor4) -> Result<(usize, usize)> {
        let [_, c, h, w] = x.shape();
        if c != self.in_channels {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        self.output_hw(h, w)
    }
}

/// Lower one batch item to a `(in_ch*k*k) x (out_h*out_w)` matrix.
fn im2col(item: &[f64], c: usize, h: usize, w: usize, k: usize, cols: &mut [f64]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let p = oh * ow;
    for ch in 0..c {
        let plane = &item[ch * h * w..(ch + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = (ch * k + u) * k + v;
                let dst = &mut cols[row * p..(row + 1) * p];
                for i in 0..oh {
                    let src = &plane[(i + u) * w + v..(i + u) * w + v + ow];
                    dst[i * ow..(i + 1) * ow].copy_from_slice(src);
                }
            }
        }
    }
}

/// Scatter-add the inverse of [`im2col`].
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, k: usize, item: &mut [f64]) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let p = oh * ow;
    for ch in 0..c {
        let plane = &mut item[ch * h * w..(ch + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = (ch * k + u) * k + v;
                let src = &cols[row * p..(row + 1) * p];
                for i in 0..oh {
                    let dst = &mut plane[(i + u) * w + v..(i + u) * w + v + ow];
                    for (d, s) in dst.iter_mut().zip(&src[i * ow..(i + 1) * ow]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Forward pass that also returns the im2col matrices (one per batch item,
/// concatenated) for reuse by the backward pass.
pub(crate) fn conv2d_forward_cols(x: &Tensor4, layer: &ConvLayer) -> Result<(Tensor4, Vec<f64>)> {
    let (oh, ow) = layer.check_input(x)?;
    let [b, c, h, w] = x.shape();
    let (r, p, o) = (layer.patch_len(), oh * ow, layer.out_channels);
    let mut cols = vec![0.0; b * r * p];
    let mut out = Tensor4::zeros([b, o, oh, ow]);
    let kernels = MatRef::new(&layer.kernels, o, r);
    for bi in 0..b {
        let cols_b = &mut cols[bi * r * p..(bi + 1) * r * p];
        im2col(x.item(bi), c, h, w, layer.kernel_size, cols_b);
        let out_b = &mut out.data_mut()[bi * o * p..(bi + 1) * o * p];
        for (oc, plane) in out_b.chunks_exact_mut(p).enumerate() {
            plane.fill(layer.bias[oc]);
        }
        gemm(kernels, MatRef::new(cols_b, r, p), 1.0, out_b);
    }
    Ok((out, cols))
}

/// Valid (unpadded), stride-1 cross-correlation:
/// `out[b,o,i,j] = bias[o] + sum_{c,u,v} kernels[o,c,u,v] * x[b,c,i+u,j+v]`.
pub fn conv2d_forward(x: &Tensor4, layer: &ConvLayer) -> Result<Tensor4> {
    conv2d_forward_cols(x, layer).map(|(out, _)| out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub grad_input: Option<Tensor4>,
    pub grad_kernels: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

pub(crate) fn conv2d_backward_cols(
    input_shape: [usize; 4],
    cols: &[f64],
    layer: &ConvLayer,
    grad_out: &Tensor4,
    want_input_grad: bool,
) -> Result<ConvGrads> {
    let [b, c, h, w] = input_shape;
    let (oh, ow) = layer.output_hw(h, w)?;
    let o = layer.out_channels;
    if grad_out.shape() != [b, o, oh, ow] {
        return Err(Error::Shape(format!(
            "conv grad_out has shape {:?}, forward produced {:?}",
            grad_out.shape(),
            [b, o, oh, ow]
        )));
    }
    let (r, p) = (layer.patch_len(), oh * ow);
    let mut grad_kernels = vec![0.0; o * r];
    let mut grad_bias = vec![0.0; o];
    let mut grad_input = want_input_grad.then(|| Tensor4::zeros(input_shape));
    let mut grad_cols = vec![0.0; if want_input_grad { r * p } else { 0 }];
    let kernels = MatRef::new(&layer.kernels, o, r);

    for bi in 0..b {
        let go = &grad_out.data()[bi * o * p..(bi + 1) * o * p];
        let cols_b = &cols[bi * r * p..(bi + 1) * r * p];
        for (oc, plane) in go.chunks_exact(p).enumerate() {
            grad_bias[oc] += plane.iter().sum::<f64>();
        }
        gemm(
            MatRef::new(go, o, p),
            MatRef::new(cols_b, r, p).t(),
            1.0,
            &mut grad_kernels,
        );
        if let Some(gx) = grad_input.as_mut() {
            gemm(kernels.t(), MatRef::new(go, o, p), 0.0, &mut grad_cols);
            let n = c * h * w;
            col2im(
                &grad_cols,
                c,
                h,
                w,
                layer.kernel_size,
                &mut gx.data_mut()[bi * n..(bi + 1) * n],
            );
        }
    }
    Ok(ConvGrads {
        grad_input,
        grad_kernels,
        grad_bias,
    })
}

/// Exact gradients of [`conv2d_forward`] with respect to input, kernels and bias.
pub fn conv2d_backward(x: &Tensor4, layer: &ConvLayer, grad_out: &Tensor4) -> Result<ConvGrads> {
    let (_, cols) = conv2d_forward_cols(x, layer)?;
    conv2d_backward_cols(x.shape(), &cols, layer, grad_out, true)
}

pub fn relu(x: &Tensor4) -> Tensor4 {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor4::from_vec(x.shape(), data).expect("same shape")
}

/// Passes the gradient where `x > 0`, zero elsewhere (including `x == 0`).
pub fn relu_backward(x: &Tensor4, grad_out: &Tensor4) -> Result<Tensor4> {
    if x.shape() != grad_out.shape() {
        return Err(Error::Shape(
            "relu grad_out shape differs from input".into(),
        ));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor4::from_vec(x.shape(), data)
}

/// Flat index into the pooled input of each output's maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRecord {
    pub input_shape: [usize; 4],
    pub argmax: Vec<usize>,
}

/// 2x2 max pooling with stride 2. A trailing odd row or column is dropped.
/// Ties resolve to the first element in row-major window order.
pub fn maxpool2_forward(x: &Tensor4) -> Result<(Tensor4, PoolRecord)> {
    let [b, c, h, w] = x.shape();
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("cannot 2x2-pool a {h}x{w} map")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([b, c, oh, ow]);
    let mut argmax = Vec::with_capacity(b * c * oh * ow);
    let src = x.data();
    let mut k = 0;
    for plane in 0..b * c {
        let base = plane * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + 2 * i * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + di) * w + 2 * j + dj;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out.data_mut()[k] = src[best];
                argmax.push(best);
                k += 1;
            }
        }
    }
    Ok((
        out,
        PoolRecord {
            input_shape: x.shape(),
            argmax,
        },
    ))
}

pub fn maxpool2_backward(record: &PoolRecord, grad_out: &Tensor4) -> Result<Tensor4> {
    if grad_out.len() != record.argmax.len() {
        return Err(Error::Shape(
            "pool grad_out does not match forward output".into(),
        ));
    }
    let mut grad = Tensor4::zeros(record.input_shape);
    for (&idx, &g) in record.argmax.iter().zip(grad_out.data()) {
        grad.data_mut()[idx] += g;
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; the returned mask holds
/// those multipliers. Eval mode is the identity.
pub fn dropout<R: Rng + ?Sized>(
    x: &Tensor4,
    rate: f64,
    rng: &mut R,
    mode: Mode,
) -> Result<(Tensor4, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep_scale
            }
        })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((Tensor4::from_vec(x.shape(), data)?, Some(mask)))
}

pub fn dropout_backward(mask: Option<&[f64]>, grad_out: &Tensor4) -> Tensor4 {
    match mask {
        None => grad_out.clone(),
        Some(mask) => {
            let data = grad_out
                .data()
                .iter()
                .zip(mask)
                .map(|(g, m)| g * m)
                .collect();
            Tensor4::from_vec(grad_out.shape(), data).expect("same shape")
        }
    }
}

/// Fully connected layer with weights `(fan_out, fan_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        DenseLayer {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        if x.item_len() != self.fan_in {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs per item, got {}",
                self.fan_in,
                x.item_len()
            )));
        }
        Ok(())
    }
}

/// `out = W x + b` per batch item. Input items of any shape are read flat.
pub fn dense_forward(x: &Tensor4, layer: &DenseLayer) -> Result<Tensor4> {
    layer.check_input(x)?;
    let b = x.batch();
    let mut out = Vec::with_capacity(b * layer.fan_out);
    for _ in 0..b {
        out.extend_from_slice(&layer.bias);
    }
    gemm(
        MatRef::new(x.data(), b, layer.fan_in),
        MatRef::new(&layer.weights, layer.fan_out, layer.fan_in).t(),
        1.0,
        &mut out,
    );
    Tensor4::from_rows(b, layer.fan_out, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    /// Same shape as the forward input.
    pub grad_input: Tensor4,
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

pub fn dense_backward(x: &Tensor4, layer: &DenseLayer, grad_out: &Tensor4) -> Result<DenseGrads> {
    layer.check_input(x)?;
    let b = x.batch();
    if grad_out.shape() != [b, layer.fan_out, 1, 1] {
        return Err(Error::Shape(format!(
            "dense grad_out has shape {:?}, expected {:?}",
            grad_out.shape(),
            [b, layer.fan_out, 1, 1]
        )));
    }
    let go = MatRef::new(grad_out.data(), b, layer.fan_out);
    let mut grad_weights = vec![0.0; layer.fan_out * layer.fan_in];
    gemm(
        go.t(),
        MatRef::new(x.data(), b, layer.fan_in),
        0.0,
        &mut grad_weights,
    );
    let mut grad_bias = vec![0.0; layer.fan_out];
    for row in grad_out.data().chunks_exact(layer.fan_out) {
        for (gb, g) in grad_bias.iter_mut().zip(row) {
            *gb += g;
        }
    }
    let mut gx = vec![0.0; b * layer.fan_in];
    gemm(
        go,
        MatRef::new(&layer.weights, layer.fan_out, layer.fan_in),
        0.0,
        &mut gx,
    );
    Ok(DenseGrads {
        grad_input: Tensor4::from_vec(x.shape(), gx)?,
        grad_weights,
        grad_bias,
    })
}

/// Row-wise softmax of a `batch x classes` matrix, max-subtracted.
pub fn softmax(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(row.iter().map(|&z| (z - max).exp()));
        let sum: f64 = out[start..].iter().sum();
        for p in &mut out[start..] {
            *p /= sum;
        }
    }
    out
}

/// Mean categorical cross-entropy over the batch and its gradient
/// `(softmax - onehot) / batch` with respect to the logits.
pub fn softmax_xent(logits: &Tensor4, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    let b = logits.batch();
    let c = logits.item_len();
    if labels.len() != b {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {b}",
            labels.len()
        )));
    }
    if c < 2 {
        return Err(Error::Shape(format!("need at least 2 classes, got {c}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(b * c);
    for (row, &label) in logits.data().chunks_exact(c).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        loss += log_sum - (row[label] - max);
        for (j, &z) in row.iter().enumerate() {
            let p = (z - max - log_sum).exp();
            let target = if j == label { 1.0 } else { 0.0 };
            grad.push((p - target) / b as f64);
        }
    }
    Ok((loss / b as f64, grad))
}

/// Index of the largest logit per row; lowest index wins ties.
pub fn argmax_rows(logits: &[f64], classes: usize) -> Vec<usize> {
    logits
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
