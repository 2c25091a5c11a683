//! Sigmoid-output linear regressor trained with full-batch Adam on MSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kept strictly inside (0, 1) even where the exact value rounds to an endpoint.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: TrainConfig,
    pub final_mse: f64,
}

impl Regressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }
}

/// Mean squared error of `sigmoid(w·x + b)` against `y` and its gradient
/// with respect to `(w, b)`.
pub fn mse_and_gradient(
    weights: &[f64],
    bias: f64,
    x: &[Vec<f64>],
    y: &[f64],
) -> (f64, Vec<f64>, f64) {
    let m = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, &target) in x.iter().zip(y) {
        let p = sigmoid(weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + bias);
        let err = p - target;
        loss += err * err;
        let dz = 2.0 * err * p * (1.0 - p) / m;
        for (g, v) in gw.iter_mut().zip(row) {
            *g += dz * v;
        }
        gb += dz;
    }
    (loss / m, gw, gb)
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Zero-initialised full-batch Adam. Deterministic: the seed is recorded only.
pub fn train_regressor(x: &[Vec<f64>], y: &[f64], config: &TrainConfig) -> Result<Regressor> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::input(format!(
            "{} feature rows for {} targets",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::input("feature rows have different lengths"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite feature value"));
    }
    if y.iter().any(|t| !t.is_finite()) {
        return Err(Error::input("non-finite or missing target"));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::input(format!(
            "learning rate {} must be positive",
            config.learning_rate
        )));
    }

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let (mut mw, mut vw) = (vec![0.0; dim], vec![0.0; dim]);
    let (mut mb, mut vb) = (0.0, 0.0);
    let lr = config.learning_rate;
    for t in 1..=config.epochs {
        let (_, gw, gb) = mse_and_gradient(&w, b, x, y);
        let c1 = 1.0 - BETA1.powi(t as i32);
        let c2 = 1.0 - BETA2.powi(t as i32);
        for i in 0..dim {
            mw[i] = BETA1 * mw[i] + (1.0 - BETA1) * gw[i];
            vw[i] = BETA2 * vw[i] + (1.0 - BETA2) * gw[i] * gw[i];
            w[i] -= lr * (mw[i] / c1) / ((vw[i] / c2).sqrt() + EPS);
        }
        mb = BETA1 * mb + (1.0 - BETA1) * gb;
        vb = BETA2 * vb + (1.0 - BETA2) * gb * gb;
        b -= lr * (mb / c1) / ((vb / c2).sqrt() + EPS);
    }
    let (final_mse, _, _) = mse_and_gradient(&w, b, x, y);
    if !final_mse.is_finite() || !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "training diverged after {} epochs",
            config.epochs
        )));
    }
    Ok(Regressor {
        weights: w,
        bias: b,
        config: config.clone(),
        final_mse,
    })
}
