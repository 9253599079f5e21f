use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const ADAM_LEARNING_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer {other:?}"
            ))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

/// `p <- p - lr * g`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], learning_rate: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= learning_rate * g;
    }
}

/// One bias-corrected Adam update of a single tensor. `t` is the step number
/// after incrementing (1 on the first call).
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
}

/// Optimizer hyperparameters plus per-tensor moment buffers. The buffers
/// mirror the shapes of the network parameters they were created for.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub shapes: Vec<Vec<usize>>,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, shapes: Vec<Vec<usize>>) -> Self {
        let (first_moment, second_moment) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = shapes
                    .iter()
                    .map(|s| vec![0.0; s.iter().product()])
                    .collect();
                (zeros.clone(), zeros)
            }
        };
        OptimizerState {
            kind,
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            step: 0,
            shapes,
            first_moment,
            second_moment,
        }
    }

    pub fn sgd(learning_rate: f64, shapes: Vec<Vec<usize>>) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate, shapes)
    }

    pub fn adam(learning_rate: f64, shapes: Vec<Vec<usize>>) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, shapes)
    }

    /// Apply one update to every parameter tensor and advance the step counter.
    pub fn apply(&mut self, mut params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.shapes.len() || grads.len() != self.shapes.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.shapes.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            let n: usize = self.shapes[i].iter().product();
            if p.len() != n || g.len() != n {
                return Err(Error::Shape(format!(
                    "tensor {i}: expected {n} values, got {} params / {} grads",
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    sgd_step(p, g, self.learning_rate);
                }
            }
            OptimizerKind::Adam => {
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    adam_step(
                        p,
                        g,
                        &mut self.first_moment[i],
                        &mut self.second_moment[i],
                        self.step,
                        self.learning_rate,
                        self.beta1,
                        self.beta2,
                        self.epsilon,
                    );
                }
            }
        }
        Ok(())
    }
}
