use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    argmax_rows, conv2d_backward_cols, conv2d_forward_cols, dense_backward, dense_forward, dropout,
    dropout_backward, maxpool2_backward, maxpool2_forward, relu, relu_backward, softmax_xent,
    ConvLayer, DenseLayer, Mode, PoolRecord,
};
use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Input side lengths the two-stage architecture is built for.
pub const SUPPORTED_INPUT_SIZES: [usize; 3] = [28, 56, 64];

/// One gradient buffer per parameter tensor, in [`Network::params`] order.
pub type Gradients = Vec<Vec<f64>>;

/// Hyperparameters of the `C1(k)-2-C2(k)-2-H-c` network.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub input_size: usize,
    pub conv_filters: [usize; 2],
    pub kernel_size: usize,
    pub hidden: usize,
    pub num_classes: usize,
    pub conv_dropout: f64,
    pub hidden_dropout: f64,
}

impl ArchSpec {
    pub fn new(input_size: usize, kernel_size: usize, num_classes: usize) -> Self {
        ArchSpec {
            input_size,
            conv_filters: [32, 32],
            kernel_size,
            hidden: 128,
            num_classes,
            conv_dropout: 0.25,
            hidden_dropout: 0.5,
        }
    }

    /// Architecture in the `C1(size)-S1-C2(size)-S2-H-O` notation.
    pub fn template(&self) -> String {
        format!(
            "{c1}({k})-2-{c2}({k})-2-{h}-{o}",
            c1 = self.conv_filters[0],
            c2 = self.conv_filters[1],
            k = self.kernel_size,
            h = self.hidden,
            o = self.num_classes
        )
    }

    /// Spatial sizes after conv1, pool1, conv2, pool2.
    pub fn stage_sizes(&self) -> Result<[usize; 4]> {
        let k = self.kernel_size;
        let c1 = self.input_size.checked_sub(k - 1).filter(|&s| s >= 2);
        let p1 = c1.map(|s| s / 2);
        let c2 = p1.and_then(|s| s.checked_sub(k - 1)).filter(|&s| s >= 2);
        match (c1, p1, c2) {
            (Some(c1), Some(p1), Some(c2)) => Ok([c1, p1, c2, c2 / 2]),
            _ => Err(Error::Shape(format!(
                "input {0}x{0} is too small for two {k}x{k} conv stages",
                self.input_size
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_INPUT_SIZES.contains(&self.input_size) {
            return Err(Error::InvalidArgument(format!(
                "input size must be one of {SUPPORTED_INPUT_SIZES:?}, got {}",
                self.input_size
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        self.stage_sizes().map(|_| ())
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let s = self.stage_sizes()?[3];
        Ok(self.conv_filters[1] * s * s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(ConvLayer),
    Relu,
    MaxPool2,
    Dropout(f64),
    Flatten,
    Dense(DenseLayer),
}

impl Layer {
    fn output_shape(&self, [c, h, w]: [usize; 3]) -> Result<[usize; 3]> {
        match self {
            Layer::Conv(conv) => {
                if c != conv.in_channels {
                    return Err(Error::Shape(format!(
                        "conv expects {} channels, previous layer gives {c}",
                        conv.in_channels
                    )));
                }
                let (oh, ow) = conv.output_hw(h, w)?;
                Ok([conv.out_channels, oh, ow])
            }
            Layer::Relu => Ok([c, h, w]),
            Layer::Dropout(rate) => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::InvalidArgument(format!(
                        "dropout rate must be in [0, 1), got {rate}"
                    )));
                }
                Ok([c, h, w])
            }
            Layer::MaxPool2 => {
                if h < 2 || w < 2 {
                    return Err(Error::Shape(format!("cannot pool a {h}x{w} map")));
                }
                Ok([c, h / 2, w / 2])
            }
            Layer::Flatten => Ok([c * h * w, 1, 1]),
            Layer::Dense(d) => {
                if c * h * w != d.fan_in {
                    return Err(Error::Shape(format!(
                        "dense expects {} inputs, previous layer gives {}",
                        d.fan_in,
                        c * h * w
                    )));
                }
                Ok([d.fan_out, 1, 1])
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Cache {
    Conv {
        input_shape: [usize; 4],
        cols: Vec<f64>,
    },
    Relu {
        input: Tensor4,
    },
    Pool(PoolRecord),
    Dropout(Option<Vec<f64>>),
    Flatten {
        shape: [usize; 4],
    },
    Dense {
        input: Tensor4,
    },
}

fn run_layers(
    layers: &[Layer],
    x: &Tensor4,
    mode: Mode,
    mut rng: Option<&mut ChaCha8Rng>,
    mut caches: Option<&mut Vec<Cache>>,
) -> Result<Tensor4> {
    let mut cur = x.clone();
    for layer in layers {
        let (next, cache) = match layer {
            Layer::Conv(conv) => {
                let (out, cols) = conv2d_forward_cols(&cur, conv)?;
                let cache = Cache::Conv {
                    input_shape: cur.shape(),
                    cols,
                };
                (out, cache)
            }
            Layer::Relu => (relu(&cur), Cache::Relu { input: cur }),
            Layer::MaxPool2 => {
                let (out, rec) = maxpool2_forward(&cur)?;
                (out, Cache::Pool(rec))
            }
            Layer::Dropout(rate) => match (mode, rng.as_deref_mut()) {
                (Mode::Train, Some(rng)) => {
                    let (out, mask) = dropout(&cur, *rate, rng, mode)?;
                    (out, Cache::Dropout(mask))
                }
                _ => (cur, Cache::Dropout(None)),
            },
            Layer::Flatten => {
                let shape = cur.shape();
                let n = cur.item_len();
                (cur.reshape([shape[0], n, 1, 1])?, Cache::Flatten { shape })
            }
            Layer::Dense(dense) => {
                let out = dense_forward(&cur, dense)?;
                (out, Cache::Dense { input: cur })
            }
        };
        if let Some(caches) = caches.as_deref_mut() {
            caches.push(cache);
        }
        cur = next;
    }
    Ok(cur)
}

/// Ordered layer stack ending in class logits; softmax lives in the loss.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    input_shape: [usize; 3],
    mode: Mode,
    dropout_rng: ChaCha8Rng,
    caches: Vec<Cache>,
    last_logits: Option<Tensor4>,
}

fn glorot_fill(rng: &mut ChaCha8Rng, values: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in values {
        *v = rng.random_range(-limit..limit);
    }
}

fn dropout_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

impl Network {
    /// Wrap an arbitrary layer stack, checking that shapes chain from
    /// `input_shape = (channels, height, width)`.
    pub fn new(layers: Vec<Layer>, input_shape: [usize; 3], seed: u64) -> Result<Self> {
        let mut shape = input_shape;
        for layer in &layers {
            shape = layer.output_shape(shape)?;
        }
        if shape[1] != 1 || shape[2] != 1 {
            return Err(Error::Shape(format!(
                "network must end in a flat class vector, ends in {shape:?}"
            )));
        }
        Ok(Network {
            layers,
            input_shape,
            mode: Mode::Train,
            dropout_rng: dropout_stream(seed),
            caches: Vec::new(),
            last_logits: None,
        })
    }

    /// conv -> relu -> pool -> dropout -> conv -> relu -> pool -> dropout ->
    /// flatten -> dense -> relu -> dropout -> dense, Glorot-uniform weights and
    /// zero biases drawn from `seed`.
    pub fn from_spec(spec: &ArchSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let k = spec.kernel_size;
        let [f1, f2] = spec.conv_filters;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut conv1 = ConvLayer::zeros(f1, 1, k)?;
        glorot_fill(&mut rng, &mut conv1.kernels, k * k, f1 * k * k);
        let mut conv2 = ConvLayer::zeros(f2, f1, k)?;
        glorot_fill(&mut rng, &mut conv2.kernels, f1 * k * k, f2 * k * k);
        let flat = spec.flatten_len()?;
        let mut hidden = DenseLayer::zeros(flat, spec.hidden);
        glorot_fill(&mut rng, &mut hidden.weights, flat, spec.hidden);
        let mut output = DenseLayer::zeros(spec.hidden, spec.num_classes);
        glorot_fill(&mut rng, &mut output.weights, spec.hidden, spec.num_classes);

        let layers = vec![
            Layer::Conv(conv1),
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Dropout(spec.conv_dropout),
            Layer::Conv(conv2),
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Dropout(spec.conv_dropout),
            Layer::Flatten,
            Layer::Dense(hidden),
            Layer::Relu,
            Layer::Dropout(spec.hidden_dropout),
            Layer::Dense(output),
        ];
        Network::new(layers, [1, spec.input_size, spec.input_size], seed)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Reseed the dropout mask stream.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.dropout_rng = dropout_stream(seed);
    }

    pub fn num_classes(&self) -> usize {
        let mut shape = self.input_shape;
        for layer in &self.layers {
            shape = layer
                .output_shape(shape)
                .expect("validated at construction");
        }
        shape[0]
    }

    /// `C1(k)-2-C2(k)-2-H-O` description derived from the layer stack.
    pub fn architecture_string(&self) -> String {
        let mut parts = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => parts.push(format!("{}({})", c.out_channels, c.kernel_size)),
                Layer::MaxPool2 => parts.push("2".into()),
                Layer::Dense(d) => parts.push(d.fan_out.to_string()),
                _ => {}
            }
        }
        parts.join("-")
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        let [_, c, h, w] = x.shape();
        if [c, h, w] != self.input_shape {
            return Err(Error::Shape(format!(
                "network expects inputs of shape {:?}, got {:?}",
                self.input_shape,
                [c, h, w]
            )));
        }
        Ok(())
    }

    /// Forward pass in the current mode, keeping what backward needs.
    pub fn forward(&mut self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let logits = run_layers(
            &self.layers,
            x,
            self.mode,
            Some(&mut self.dropout_rng),
            Some(&mut caches),
        )?;
        self.caches = caches;
        self.last_logits = Some(logits.clone());
        Ok(logits)
    }

    /// Eval-mode logits without touching any state.
    pub fn logits(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        run_layers(&self.layers, x, Mode::Eval, None, None)
    }

    pub fn predict(&self, x: &Tensor4) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok(argmax_rows(logits.data(), logits.item_len()))
    }

    /// Eval-mode logits plus the piecewise-linear region the input falls in:
    /// the sign of every ReLU input and the winner of every pooling window.
    /// Parameter settings with equal patterns lie on the same linear piece.
    pub fn logits_with_pattern(&self, x: &Tensor4) -> Result<(Tensor4, Vec<usize>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let logits = run_layers(&self.layers, x, Mode::Eval, None, Some(&mut caches))?;
        let mut pattern = Vec::new();
        for cache in &caches {
            match cache {
                Cache::Relu { input } => {
                    pattern.extend(input.data().iter().map(|&v| usize::from(v > 0.0)))
                }
                Cache::Pool(record) => pattern.extend_from_slice(&record.argmax),
                _ => {}
            }
        }
        Ok((logits, pattern))
    }

    /// Mean cross-entropy of eval-mode logits.
    pub fn loss(&self, x: &Tensor4, labels: &[usize]) -> Result<f64> {
        softmax_xent(&self.logits(x)?, labels).map(|(l, _)| l)
    }

    /// Back-propagate the cross-entropy of the last [`Network::forward`] call.
    /// Returns the batch loss and one gradient per parameter tensor.
    pub fn backward(&mut self, labels: &[usize]) -> Result<(f64, Gradients)> {
        let logits = self
            .last_logits
            .as_ref()
            .ok_or_else(|| Error::Shape("backward called before forward".into()))?;
        let (loss, grad) = softmax_xent(logits, labels)?;
        let mut grad = Tensor4::from_vec(logits.shape(), grad)?;
        let mut grads_rev: Vec<Vec<f64>> = Vec::new();

        for (i, (layer, cache)) in self.layers.iter().zip(&self.caches).enumerate().rev() {
            let first = i == 0;
            grad = match (layer, cache) {
                (Layer::Conv(conv), Cache::Conv { input_shape, cols }) => {
                    let g = conv2d_backward_cols(*input_shape, cols, conv, &grad, !first)?;
                    grads_rev.push(g.grad_bias);
                    grads_rev.push(g.grad_kernels);
                    match g.grad_input {
                        Some(gx) => gx,
                        None => break,
                    }
                }
                (Layer::Relu, Cache::Relu { input }) => relu_backward(input, &grad)?,
                (Layer::MaxPool2, Cache::Pool(rec)) => maxpool2_backward(rec, &grad)?,
                (Layer::Dropout(_), Cache::Dropout(mask)) => {
                    dropout_backward(mask.as_deref(), &grad)
                }
                (Layer::Flatten, Cache::Flatten { shape }) => grad.reshape(*shape)?,
                (Layer::Dense(dense), Cache::Dense { input }) => {
                    let g = dense_backward(input, dense, &grad)?;
                    grads_rev.push(g.grad_bias);
                    grads_rev.push(g.grad_weights);
                    g.grad_input
                }
                _ => return Err(Error::Shape("layer cache out of sync".into())),
            };
        }
        grads_rev.reverse();
        Ok((loss, grads_rev))
    }

    /// Parameter tensors in layer order: weights then bias for each
    /// conv/dense layer.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&c.kernels[..]);
                    out.push(&c.bias[..]);
                }
                Layer::Dense(d) => {
                    out.push(&d.weights[..]);
                    out.push(&d.bias[..]);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&mut c.kernels[..]);
                    out.push(&mut c.bias[..]);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weights[..]);
                    out.push(&mut d.bias[..]);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    let k = c.kernel_size;
                    out.push(vec![c.out_channels, c.in_channels, k, k]);
                    out.push(vec![c.out_channels]);
                }
                Layer::Dense(d) => {
                    out.push(vec![d.fan_out, d.fan_in]);
                    out.push(vec![d.fan_out]);
                }
                _ => {}
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params().into_iter().map(<[f64]>::to_vec).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != snapshot.len() {
            return Err(Error::Shape("snapshot tensor count differs".into()));
        }
        for (p, s) in params.iter_mut().zip(snapshot) {
            if p.len() != s.len() {
                return Err(Error::Shape("snapshot tensor size differs".into()));
            }
            p.copy_from_slice(s);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }
}
