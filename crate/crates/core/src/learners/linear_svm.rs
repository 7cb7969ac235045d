//! Linear SVM trained with full-batch subgradient descent.
//!
//! Minimizes `mean(max(0, 1 − y·f(x))) + λ/2 · ‖w‖²` with `λ = 1 / (C·n)`,
//! i.e. the usual primal `½‖w‖² + C·Σ hinge` rescaled by `1 / (C·n)`.

use super::{dot, LearnerSpec, LinearModel, Standardizer};

pub(super) fn fit(spec: &LearnerSpec, xs: &[Vec<f64>], positive: &[bool]) -> LinearModel {
    let lr = spec.param("learning_rate");
    let epochs = spec.param("epochs") as usize;
    let c = spec.param("C");
    let scaler = Standardizer::fit(xs);
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| scaler.transform(x)).collect();
    let signs: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let n = zs.len() as f64;
    let lambda = 1.0 / (c * n);
    let mut weights = vec![0.0; zs[0].len()];
    let mut bias = 0.0;
    for _ in 0..epochs {
        let mut gw: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
        let mut gb = 0.0;
        for (z, &y) in zs.iter().zip(&signs) {
            if y * (dot(&weights, z) + bias) < 1.0 {
                for (g, v) in gw.iter_mut().zip(z) {
                    *g -= y * v / n;
                }
                gb -= y / n;
            }
        }
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
