//! Logistic regression by full-batch gradient descent.
//!
//! Objective: mean log-loss plus `l2 / 2 · ‖w‖²`; the bias is not penalized.

use super::{dot, LearnerSpec, LinearModel, Standardizer};

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Regularized loss with its gradient `(loss, ∂w, ∂b)`; `targets` are 0/1.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    xs: &[Vec<f64>],
    targets: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (x, &t) in xs.iter().zip(targets) {
        let z = dot(weights, x) + bias;
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v;
        }
        gb += r;
    }
    loss /= n;
    loss += 0.5 * l2 * dot(weights, weights);
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (loss, gw, gb / n)
}

pub(super) fn fit(spec: &LearnerSpec, xs: &[Vec<f64>], positive: &[bool]) -> LinearModel {
    let lr = spec.param("learning_rate");
    let epochs = spec.param("epochs") as usize;
    let l2 = spec.param("l2");
    let scaler = Standardizer::fit(xs);
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| scaler.transform(x)).collect();
    let targets: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
    let mut weights = vec![0.0; zs[0].len()];
    let mut bias = 0.0;
    for _ in 0..epochs {
        let (_, gw, gb) = loss_and_gradient(&weights, bias, &zs, &targets, l2);
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= lr * g;
        }
        bias -= lr * gb;
    }
    LinearModel {
        scaler,
        weights,
        bias,
    }
}
