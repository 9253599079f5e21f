//! Independent reference implementations and fixtures shared by the
//! integration tests. Everything here is written with plain loops and no
//! reuse of library internals so that agreement is meaningful.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rptsc_core::cnn::gradcheck::relative_error;
use rptsc_core::cnn::Tensor4;
use rptsc_core::ucr::{find_archive_pair, load_train_test, Dataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4], lo: f64, hi: f64) -> Tensor4 {
    let n = shape.iter().product();
    Tensor4::from_vec(shape, uniform_vec(rng, n, lo, hi)).unwrap()
}

/// Valid stride-1 cross-correlation, six nested loops.
pub fn conv_oracle(
    x: &[f64],
    [b, c, h, w]: [usize; 4],
    kernels: &[f64],
    bias: &[f64],
    out_ch: usize,
    k: usize,
) -> Vec<f64> {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = vec![0.0; b * out_ch * oh * ow];
    for n in 0..b {
        for o in 0..out_ch {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = bias[o];
                    for ci in 0..c {
                        for u in 0..k {
                            for v in 0..k {
                                let xv = x[((n * c + ci) * h + i + u) * w + j + v];
                                let kv = kernels[((o * c + ci) * k + u) * k + v];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[((n * out_ch + o) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    out
}

/// 2x2 stride-2 max pooling by scanning each window for its maximum value.
pub fn maxpool_oracle(x: &[f64], [b, c, h, w]: [usize; 4]) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(b * c * oh * ow);
    for plane in 0..b * c {
        for i in 0..oh {
            for j in 0..ow {
                let window = [
                    x[plane * h * w + (2 * i) * w + 2 * j],
                    x[plane * h * w + (2 * i) * w + 2 * j + 1],
                    x[plane * h * w + (2 * i + 1) * w + 2 * j],
                    x[plane * h * w + (2 * i + 1) * w + 2 * j + 1],
                ];
                out.push(window.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
    out
}

/// Bilinear sample of a `h x w` image at every pixel of a `t x t` grid, each
/// output computed independently from its four neighbours.
pub fn resize_oracle(pixels: &[f64], h: usize, w: usize, t: usize) -> Vec<f64> {
    let coord = |d: usize, src: usize| -> (usize, usize, f64) {
        let mut p = (d as f64 + 0.5) * (src as f64 / t as f64) - 0.5;
        if p < 0.0 {
            p = 0.0;
        }
        if p > (src - 1) as f64 {
            p = (src - 1) as f64;
        }
        let lo = p.floor() as usize;
        let hi = if lo + 1 < src { lo + 1 } else { lo };
        (lo, hi, p - lo as f64)
    };
    let mut out = vec![0.0; t * t];
    for y in 0..t {
        let (y0, y1, fy) = coord(y, h);
        for x in 0..t {
            let (x0, x1, fx) = coord(x, w);
            let top = pixels[y0 * w + x0] * (1.0 - fx) + pixels[y0 * w + x1] * fx;
            let bottom = pixels[y1 * w + x0] * (1.0 - fx) + pixels[y1 * w + x1] * fx;
            out[y * t + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    out
}

/// Full `(n+1) x (m+1)` cumulative-cost table with an explicit band test.
pub fn dtw_table_oracle(a: &[f64], b: &[f64], window: Option<usize>) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![f64::INFINITY; m + 1]; n + 1];
    d[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            if let Some(w) = window {
                if i.abs_diff(j) > w {
                    continue;
                }
            }
            let cost = (a[i - 1] - b[j - 1]).powi(2);
            d[i][j] = cost + d[i - 1][j].min(d[i][j - 1]).min(d[i - 1][j - 1]);
        }
    }
    d[n][m]
}

/// Minimum cost over every monotone warping path, enumerated recursively.
pub fn dtw_path_oracle(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let here = (a[i] - b[j]).powi(2);
        if i + 1 == a.len() && j + 1 == b.len() {
            return here;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(walk(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(walk(a, b, i, j + 1));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(walk(a, b, i + 1, j + 1));
        }
        here + best
    }
    walk(a, b, 0, 0)
}

/// Pairwise Euclidean distances between delay vectors built by direct
/// indexing of the raw series.
pub fn rp_oracle(x: &[f64], m: usize, tau: usize) -> (usize, Vec<f64>) {
    let k = x.len() - (m - 1) * tau;
    let mut r = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for d in 0..m {
                let diff = x[i + d * tau] - x[j + d * tau];
                s += diff * diff;
            }
            r[i * k + j] = s.sqrt();
        }
    }
    (k, r)
}

/// Central-difference step for single-layer checks. The layers are linear or
/// piecewise linear in every argument, so truncation error is zero away from
/// kinks and a moderate step keeps cancellation noise small.
pub const FD_STEP: f64 = 1e-4;
pub const LAYER_TOLERANCE: f64 = 1e-6;

/// `sum(out * probe)`, the scalar whose gradient with respect to `out` is
/// `probe`.
pub fn dot(out: &Tensor4, probe: &[f64]) -> f64 {
    out.data().iter().zip(probe).map(|(a, b)| a * b).sum()
}

/// Worst relative error between `analytic` and central differences of `f`
/// with respect to each entry of `params`.
pub fn fd_worst(params: &mut [f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let original = params[i];
        params[i] = original + FD_STEP;
        let plus = f(params);
        params[i] = original - FD_STEP;
        let minus = f(params);
        params[i] = original;
        worst = worst.max(relative_error(
            analytic[i],
            (plus - minus) / (2.0 * FD_STEP),
        ));
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Directory holding UCR `<name>_TRAIN` / `<name>_TEST` files: `$RPTSC_DATA`
/// when set, else the bundled `data/ucr`.
pub fn data_dir() -> PathBuf {
    std::env::var_os("RPTSC_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ucr"))
}

pub fn load_archive(name: &str) -> Option<(Dataset, Dataset)> {
    let (train, test) = find_archive_pair(&data_dir(), name)?;
    Some(load_train_test(&train, &test).expect("archive files parse"))
}

/// Algorithms of the published comparison table, in column order.
pub const TABLE_ALGORITHMS: [&str; 8] = [
    "1-NN DTW", "Shapelet", "BoP", "SAX-VSM", "TFRP", "MCNN", "GAF-MTF", "ours",
];

/// The published error-rate table: 20 datasets by 8 algorithms, `None` for
/// cells shown as "-".
pub fn published_table() -> Vec<Vec<Option<f64>>> {
    const M: f64 = f64::NAN;
    let rows: [[f64; 8]; 20] = [
        [0.31, 0.44, 0.46, M, 0.43, 0.19, 0.30, 0.26],
        [0.39, 0.51, 0.43, 0.38, 0.20, 0.23, 0.37, 0.28],
        [0.36, 0.44, 0.43, 0.033, 0.36, 0.36, 0.23, 0.08],
        [0.003, 0.05, 0.01, 0.02, M, 0.002, 0.009, 0.005],
        [0.0, 0.06, 0.03, 0.0, 0.03, 0.036, 0.0, 0.0],
        [0.23, 0.22, 0.14, 0.14, 0.17, M, 0.09, 0.0],
        [0.19, 0.40, 0.21, 0.20, 0.29, 0.23, 0.23, 0.19],
        [0.17, 0.09, 0.023, 0.0, 0.21, 0.0, 0.06, 0.0],
        [0.17, 0.19, 0.074, 0.017, 0.12, 0.05, 0.114, 0.085],
        [0.093, 0.061, 0.027, 0.007, 0.02, 0.0, 0.08, 0.0],
        [0.13, 0.29, 0.16, 0.19, 0.04, 0.16, 0.11, 0.0],
        [0.27, 0.40, 0.46, 0.30, 0.31, 0.21, 0.26, 0.26],
        [0.16, 0.21, 0.13, 0.10, 0.13, 0.13, 0.2, 0.11],
        [0.40, 0.35, 0.23, 0.107, 0.07, 0.27, 0.35, 0.29],
        [0.20, 0.27, 0.19, 0.25, 0.04, 0.066, 0.06, 0.06],
        [0.007, 0.08, 0.03, 0.25, M, 0.003, 0.007, 0.0],
        [0.0, 0.002, 0.0, 0.0, M, 0.0, 0.0, 0.0],
        [0.0, 0.11, 0.12, 0.004, M, 0.002, 0.09, 0.17],
        [0.02, 0.004, 0.003, 0.0006, 0.002, 0.002, 0.0, 0.0],
        [0.16, 0.24, 0.17, 0.16, 0.14, 0.11, 0.19, 0.0],
    ];
    rows.iter()
        .map(|r| r.iter().map(|&v| (!v.is_nan()).then_some(v)).collect())
        .collect()
}
