//! Central finite-difference check of back-propagated gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{softmax_xent, Mode};
use super::network::Network;
use super::tensor::Tensor4;
use crate::error::Result;

/// Gradients smaller than this are compared in absolute rather than relative
/// terms.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Worst error per parameter tensor, in [`Network::params`] order.
    pub per_tensor: Vec<f64>,
    pub checked: usize,
    /// Sampled entries left out because `p +- epsilon` crosses a ReLU or
    /// max-pool boundary, where the loss is not differentiable and central
    /// differences are meaningless.
    pub skipped_at_kinks: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compare back-propagated gradients of the mean cross-entropy with central
/// differences `(L(p + eps) - L(p - eps)) / 2eps` for up to `per_tensor`
/// randomly chosen entries of every parameter tensor. Dropout is disabled
/// for the duration of the check and the previous mode restored afterwards.
/// Entries whose perturbation changes any ReLU sign or pooling winner are
/// counted in [`GradCheckReport::skipped_at_kinks`] instead of compared.
///
/// Large `epsilon` inflates the reported error through truncation; that is a
/// property of the diagnostic, not a failure.
pub fn gradient_check(
    net: &mut Network,
    batch: &Tensor4,
    labels: &[usize],
    epsilon: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let previous = net.mode();
    net.set_mode(Mode::Eval);
    let result = check_inner(net, batch, labels, epsilon, per_tensor, seed);
    net.set_mode(previous);
    result
}

fn check_inner(
    net: &mut Network,
    batch: &Tensor4,
    labels: &[usize],
    epsilon: f64,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    net.forward(batch)?;
    let (_, grads) = net.backward(labels)?;
    let (_, base_pattern) = net.logits_with_pattern(batch)?;
    let loss_and_pattern = |net: &Network| -> Result<(f64, Vec<usize>)> {
        let (logits, pattern) = net.logits_with_pattern(batch)?;
        Ok((softmax_xent(&logits, labels)?.0, pattern))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per = Vec::with_capacity(grads.len());
    let mut checked = 0;
    let mut skipped_at_kinks = 0;

    for (t, grad) in grads.iter().enumerate() {
        let n = grad.len();
        let picks = sample(&mut rng, n, per_tensor.min(n)).into_vec();
        let mut worst: f64 = 0.0;
        for i in picks {
            let original = net.params()[t][i];
            net.params_mut()[t][i] = original + epsilon;
            let (plus, plus_pattern) = loss_and_pattern(net)?;
            net.params_mut()[t][i] = original - epsilon;
            let (minus, minus_pattern) = loss_and_pattern(net)?;
            net.params_mut()[t][i] = original;
            if plus_pattern != base_pattern || minus_pattern != base_pattern {
                skipped_at_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(grad[i], numeric));
            checked += 1;
        }
        per.push(worst);
    }
    Ok(GradCheckReport {
        max_relative_error: per.iter().copied().fold(0.0, f64::max),
        per_tensor: per,
        checked,
        skipped_at_kinks,
    })
}
