//! Binary checkpoint format.
//!
//! ```text
//! "RPTS"  u16 version
//! u32 channels, u32 height, u32 width, u32 layer count
//! per layer:  u8 tag, u32 ndims, ndims x u32 dims, parameters
//!             conv  (1): dims [out, in, k, k], kernels f64 x prod, bias f64 x out
//!             relu  (2), pool (3), flatten (5): no dims, no parameters
//!             dropout (4): no dims, rate f64
//!             dense (6): dims [out, in], weights f64 x prod, bias f64 x out
//! u8 optimizer present
//!   u8 kind (0 sgd, 1 adam), f64 lr, f64 beta1, f64 beta2, f64 epsilon, u64 step,
//!   u32 tensor count, per tensor: u32 ndims, dims, first moment f64 x prod,
//!   second moment f64 x prod (sgd stores dims only)
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::layers::{ConvLayer, DenseLayer};
use super::network::{Layer, Network};
use super::optim::{OptimizerKind, OptimizerState};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RPTS";
pub const FORMAT_VERSION: u16 = 1;

const TAG_CONV: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_POOL: u8 = 3;
const TAG_DROPOUT: u8 = 4;
const TAG_FLATTEN: u8 = 5;
const TAG_DENSE: u8 = 6;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    fn dims(&mut self, dims: &[usize]) {
        self.u32(dims.len());
        for &d in dims {
            self.u32(d);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
    fn dims(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()?;
        if n > 8 {
            return Err(Error::Checkpoint(format!("implausible rank {n}")));
        }
        (0..n).map(|_| self.u32()).collect()
    }
}

fn expect_dims(tag: &str, dims: &[usize], rank: usize) -> Result<()> {
    if dims.len() != rank {
        return Err(Error::Checkpoint(format!(
            "{tag} record has {} dims, expected {rank}",
            dims.len()
        )));
    }
    Ok(())
}

pub fn to_bytes(net: &Network, optimizer: Option<&OptimizerState>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u16(FORMAT_VERSION);
    let [c, h, wd] = net.input_shape();
    w.u32(c);
    w.u32(h);
    w.u32(wd);
    w.u32(net.layers().len());
    for layer in net.layers() {
        match layer {
            Layer::Conv(conv) => {
                w.u8(TAG_CONV);
                let k = conv.kernel_size;
                w.dims(&[conv.out_channels, conv.in_channels, k, k]);
                w.f64s(&conv.kernels);
                w.f64s(&conv.bias);
            }
            Layer::Relu => {
                w.u8(TAG_RELU);
                w.dims(&[]);
            }
            Layer::MaxPool2 => {
                w.u8(TAG_POOL);
                w.dims(&[]);
            }
            Layer::Dropout(rate) => {
                w.u8(TAG_DROPOUT);
                w.dims(&[]);
                w.f64(*rate);
            }
            Layer::Flatten => {
                w.u8(TAG_FLATTEN);
                w.dims(&[]);
            }
            Layer::Dense(d) => {
                w.u8(TAG_DENSE);
                w.dims(&[d.fan_out, d.fan_in]);
                w.f64s(&d.weights);
                w.f64s(&d.bias);
            }
        }
    }
    match optimizer {
        None => w.u8(0),
        Some(opt) => {
            w.u8(1);
            w.u8(match opt.kind {
                OptimizerKind::Sgd => 0,
                OptimizerKind::Adam => 1,
            });
            w.f64(opt.learning_rate);
            w.f64(opt.beta1);
            w.f64(opt.beta2);
            w.f64(opt.epsilon);
            w.u64(opt.step);
            w.u32(opt.shapes.len());
            for (i, shape) in opt.shapes.iter().enumerate() {
                w.dims(shape);
                if opt.kind == OptimizerKind::Adam {
                    w.f64s(&opt.first_moment[i]);
                    w.f64s(&opt.second_moment[i]);
                }
            }
        }
    }
    w.0
}

/// Decode a checkpoint. The dropout stream of the returned network is seeded
/// with `dropout_seed`; it does not affect eval-mode outputs.
pub fn from_bytes(bytes: &[u8], dropout_seed: u64) -> Result<(Network, Option<OptimizerState>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint(
            "bad magic, not an RPTS checkpoint".into(),
        ));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let input_shape = [r.u32()?, r.u32()?, r.u32()?];
    let n_layers = r.u32()?;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let tag = r.u8()?;
        let dims = r.dims()?;
        let layer = match tag {
            TAG_CONV => {
                expect_dims("conv", &dims, 4)?;
                let (o, i, k) = (dims[0], dims[1], dims[2]);
                if dims[3] != k {
                    return Err(Error::Checkpoint("non-square conv kernel".into()));
                }
                let mut conv = ConvLayer::zeros(o, i, k)?;
                conv.kernels = r.f64s(o * i * k * k)?;
                conv.bias = r.f64s(o)?;
                Layer::Conv(conv)
            }
            TAG_RELU | TAG_POOL | TAG_FLATTEN | TAG_DROPOUT => {
                expect_dims("parameterless", &dims, 0)?;
                match tag {
                    TAG_RELU => Layer::Relu,
                    TAG_POOL => Layer::MaxPool2,
                    TAG_FLATTEN => Layer::Flatten,
                    _ => Layer::Dropout(r.f64()?),
                }
            }
            TAG_DENSE => {
                expect_dims("dense", &dims, 2)?;
                let mut dense = DenseLayer::zeros(dims[1], dims[0]);
                dense.weights = r.f64s(dims[0] * dims[1])?;
                dense.bias = r.f64s(dims[0])?;
                Layer::Dense(dense)
            }
            other => return Err(Error::Checkpoint(format!("unknown layer tag {other}"))),
        };
        layers.push(layer);
    }
    let net = Network::new(layers, input_shape, dropout_seed)?;

    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let kind = match r.u8()? {
                0 => OptimizerKind::Sgd,
                1 => OptimizerKind::Adam,
                other => return Err(Error::Checkpoint(format!("unknown optimizer kind {other}"))),
            };
            let learning_rate = r.f64()?;
            let mut opt = OptimizerState::new(kind, learning_rate, Vec::new());
            opt.beta1 = r.f64()?;
            opt.beta2 = r.f64()?;
            opt.epsilon = r.f64()?;
            opt.step = r.u64()?;
            let n = r.u32()?;
            for _ in 0..n {
                let shape = r.dims()?;
                let len: usize = shape.iter().product();
                if kind == OptimizerKind::Adam {
                    opt.first_moment.push(r.f64s(len)?);
                    opt.second_moment.push(r.f64s(len)?);
                }
                opt.shapes.push(shape);
            }
            if opt.shapes != net.param_shapes() {
                return Err(Error::Checkpoint(
                    "optimizer moments do not match the network parameters".into(),
                ));
            }
            Some(opt)
        }
        other => return Err(Error::Checkpoint(format!("bad optimizer flag {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after optimizer state",
            bytes.len() - r.pos
        )));
    }
    Ok((net, optimizer))
}

pub fn save(path: &Path, net: &Network, optimizer: Option<&OptimizerState>) -> Result<()> {
    fs::write(path, to_bytes(net, optimizer)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(Network, Option<OptimizerState>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, 0)
}
