//! Recurrence-plot encoding: delay embedding, pairwise state distances, and
//! conversion of the distance matrix into a gray-level image.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ucr::Dataset;

/// Phase-space dimension and delay (in samples).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingParams {
    pub m: usize,
    pub tau: usize,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams { m: 3, tau: 4 }
    }
}

impl EmbeddingParams {
    pub fn new(m: usize, tau: usize) -> Result<Self> {
        if m == 0 || tau == 0 {
            return Err(Error::InvalidArgument(format!(
                "embedding needs m >= 1 and tau >= 1, got m={m}, tau={tau}"
            )));
        }
        Ok(EmbeddingParams { m, tau })
    }

    /// Number of states produced from a series of length `len`, if at least 2.
    pub fn num_states(&self, len: usize) -> Option<usize> {
        let span = (self.m - 1) * self.tau;
        len.checked_sub(span).filter(|&k| k >= 2)
    }

    /// Shortest series this embedding accepts.
    pub fn min_length(&self) -> usize {
        (self.m - 1) * self.tau + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    L1,
    #[default]
    L2,
    Linf,
}

impl Norm {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => diffs.fold(0.0, f64::max),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" => Ok(Norm::L1),
            "l2" | "euclidean" => Ok(Norm::L2),
            "linf" | "max" | "chebyshev" => Ok(Norm::Linf),
            other => Err(Error::InvalidArgument(format!("unknown norm {other:?}"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        })
    }
}

/// Delay-embedded states, `K x m`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<f64>,
    dim: usize,
}

impl Trajectory {
    pub fn num_states(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn from_states(states: Vec<Vec<f64>>) -> Result<Self> {
        let dim = states.first().map_or(0, Vec::len);
        if dim == 0 || states.iter().any(|s| s.len() != dim) {
            return Err(Error::Shape(
                "trajectory states must share a non-zero dimension".into(),
            ));
        }
        Ok(Trajectory {
            states: states.concat(),
            dim,
        })
    }
}

/// State `i` is `(x_i, x_{i+tau}, ..., x_{i+(m-1)tau})`; there are
/// `K = l - (m-1)tau` of them.
pub fn embed(values: &[f64], params: EmbeddingParams) -> Result<Trajectory> {
    let k = params
        .num_states(values.len())
        .ok_or(Error::SeriesTooShort {
            len: values.len(),
            m: params.m,
            tau: params.tau,
            required: params.min_length(),
        })?;
    let mut states = Vec::with_capacity(k * params.m);
    for i in 0..k {
        states.extend((0..params.m).map(|d| values[i + d * params.tau]));
    }
    Ok(Trajectory {
        states,
        dim: params.m,
    })
}

/// Square matrix of pairwise state distances (or 0/1 recurrences after
/// [`threshold`]).
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceMatrix {
    size: usize,
    values: Vec<f64>,
}

impl RecurrenceMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn scaled(&self, alpha: f64) -> RecurrenceMatrix {
        RecurrenceMatrix {
            size: self.size,
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }
}

/// Pairwise distances between all states. Only the upper triangle is
/// computed; the lower triangle is mirrored so symmetry is exact.
pub fn recurrence_matrix(traj: &Trajectory, norm: Norm) -> Result<RecurrenceMatrix> {
    let k = traj.num_states();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "recurrence matrix needs at least 2 states, got {k}"
        )));
    }
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d = norm.distance(traj.state(i), traj.state(j));
            values[i * k + j] = d;
            values[j * k + i] = d;
        }
    }
    Ok(RecurrenceMatrix { size: k, values })
}

/// Heaviside thresholding: 1 where the distance is at most `epsilon`, else 0.
pub fn threshold(r: &RecurrenceMatrix, epsilon: f64) -> Result<RecurrenceMatrix> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "threshold epsilon must be >= 0, got {epsilon}"
        )));
    }
    Ok(RecurrenceMatrix {
        size: r.size,
        values: r
            .values
            .iter()
            .map(|&d| if epsilon - d >= 0.0 { 1.0 } else { 0.0 })
            .collect(),
    })
}

/// Row-major gray image with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        GrayImage {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            pixels: self.pixels.iter().map(|p| 1.0 - p).collect(),
            ..self.clone()
        }
    }

    /// Min-max normalize arbitrary values into a `[0, 1]` image. A constant
    /// input maps to all zeros.
    pub fn normalized(height: usize, width: usize, values: &[f64]) -> GrayImage {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        GrayImage {
            height,
            width,
            pixels: scale_into_unit(values, lo, hi),
        }
    }

    /// 8-bit payload, `round(255 * v)` with halves rounded up.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (255.0 * v.clamp(0.0, 1.0) + 0.5).floor() as u8)
            .collect()
    }
}

fn scale_into_unit(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&d| ((d - lo) / range).clamp(0.0, 1.0))
        .collect()
}

/// Per-plot min-max scaling, `(d - min) / (max - min)`; all zeros when the
/// matrix is constant.
pub fn to_gray_image(r: &RecurrenceMatrix) -> GrayImage {
    let (lo, hi) = r.min_max();
    to_gray_image_with_range(r, lo, hi)
}

/// Min-max scaling against an externally supplied range (used for
/// dataset-global normalization). Values outside the range are clamped.
pub fn to_gray_image_with_range(r: &RecurrenceMatrix, lo: f64, hi: f64) -> GrayImage {
    GrayImage {
        height: r.size,
        width: r.size,
        pixels: scale_into_unit(&r.values, lo, hi),
    }
}

/// Map output coordinate `dst` to a source interval `[i0, i1]` and the weight
/// of `i1`, using half-pixel centers clamped to the border.
fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, pos - i0 as f64)
}

/// Bilinear resize to `target x target` with half-pixel-centered coordinates.
pub fn resize(img: &GrayImage, target: usize) -> Result<GrayImage> {
    if target == 0 || img.height == 0 || img.width == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot resize {}x{} image to {target}x{target}",
            img.height, img.width
        )));
    }
    if img.height == target && img.width == target {
        return Ok(img.clone());
    }

    // Horizontal pass, then vertical.
    let cols: Vec<_> = (0..target)
        .map(|x| source_coord(x, img.width, target))
        .collect();
    let mut tmp = vec![0.0; img.height * target];
    for row in 0..img.height {
        let src = &img.pixels[row * img.width..(row + 1) * img.width];
        for (x, &(c0, c1, w)) in cols.iter().enumerate() {
            tmp[row * target + x] = src[c0] * (1.0 - w) + src[c1] * w;
        }
    }

    let mut pixels = vec![0.0; target * target];
    for y in 0..target {
        let (r0, r1, w) = source_coord(y, img.height, target);
        for x in 0..target {
            let v = tmp[r0 * target + x] * (1.0 - w) + tmp[r1 * target + x] * w;
            pixels[y * target + x] = v;
        }
    }
    Ok(GrayImage {
        height: target,
        width: target,
        pixels,
    })
}

/// Encode as an 8-bit grayscale PNG into memory.
pub fn encode_png(img: &GrayImage) -> std::result::Result<Vec<u8>, png::EncodingError> {
    let mut buf = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut buf, img.width as u32, img.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&img.to_bytes())?;
        writer.finish()?;
    }
    Ok(buf)
}

pub fn write_png(img: &GrayImage, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let bytes = encode_png(img).map_err(|e| Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    std::io::Write::write_all(&mut out, &bytes).map_err(|e| Error::io(path, e))?;
    std::io::Write::flush(&mut out).map_err(|e| Error::io(path, e))
}

/// How recurrence matrices are mapped onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    #[default]
    PerPlot,
    /// One min/max over every matrix of the dataset being encoded.
    Global,
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "per-plot" | "plot" | "local" => Ok(Scaling::PerPlot),
            "global" | "dataset" => Ok(Scaling::Global),
            other => Err(Error::InvalidArgument(format!("unknown scaling {other:?}"))),
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaling::PerPlot => "per-plot",
            Scaling::Global => "global",
        })
    }
}

/// Everything needed to turn a raw series into a CNN input image.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub embedding: EmbeddingParams,
    pub norm: Norm,
    /// Output side length; `None` keeps the native `K x K` size.
    pub size: Option<usize>,
    /// Bright = close instead of bright = far.
    pub invert: bool,
    /// Binarize with this epsilon instead of keeping gray levels.
    pub threshold: Option<f64>,
    pub scaling: Scaling,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            embedding: EmbeddingParams::default(),
            norm: Norm::L2,
            size: Some(28),
            invert: false,
            threshold: None,
            scaling: Scaling::PerPlot,
        }
    }
}

impl EncodeConfig {
    fn finish(&self, r: &RecurrenceMatrix, range: Option<(f64, f64)>) -> Result<GrayImage> {
        let img = match self.threshold {
            Some(eps) => {
                let bin = threshold(r, eps)?;
                GrayImage {
                    height: bin.size,
                    width: bin.size,
                    pixels: bin.values,
                }
            }
            None => match range {
                Some((lo, hi)) => to_gray_image_with_range(r, lo, hi),
                None => to_gray_image(r),
            },
        };
        let img = if self.invert { img.inverted() } else { img };
        match self.size {
            Some(size) => resize(&img, size),
            None => Ok(img),
        }
    }
}

/// Full pipeline for one series under per-plot scaling.
pub fn encode_series(values: &[f64], config: &EncodeConfig) -> Result<GrayImage> {
    let traj = embed(values, config.embedding)?;
    let r = recurrence_matrix(&traj, config.norm)?;
    config.finish(&r, None)
}

/// Encode every series of a dataset, in order. Series are processed in
/// parallel; failures name the offending series index.
pub fn encode_dataset(dataset: &Dataset, config: &EncodeConfig) -> Result<Vec<GrayImage>> {
    let wrap = |index: usize| {
        move |e: Error| Error::Encode {
            index,
            source: Box::new(e),
        }
    };
    match config.scaling {
        Scaling::PerPlot => dataset
            .series
            .par_iter()
            .enumerate()
            .map(|(i, s)| encode_series(&s.values, config).map_err(wrap(i)))
            .collect(),
        Scaling::Global => {
            let matrices: Vec<RecurrenceMatrix> = dataset
                .series
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    embed(&s.values, config.embedding)
                        .and_then(|t| recurrence_matrix(&t, config.norm))
                        .map_err(wrap(i))
                })
                .collect::<Result<_>>()?;
            let range = matrices
                .iter()
                .map(RecurrenceMatrix::min_max)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                });
            matrices
                .par_iter()
                .enumerate()
                .map(|(i, r)| config.finish(r, Some(range)).map_err(wrap(i)))
                .collect()
        }
    }
}
