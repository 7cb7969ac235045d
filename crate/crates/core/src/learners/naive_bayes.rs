//! Gaussian naive Bayes.

use super::LearnerSpec;
use crate::model::LabelId;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianNb {
    pub log_priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

fn column_variances(xs: &[&Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dim = xs[0].len();
    let n = xs.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in xs {
        for (m, v) in mean.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for x in xs {
        for ((s, v), m) in var.iter_mut().zip(x.iter()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

/// Variances are floored by `var_smoothing × (largest feature variance)`;
/// when every feature is constant the floor is `var_smoothing` itself.
pub(super) fn fit(spec: &LearnerSpec, xs: &[Vec<f64>], ys: &[LabelId], classes: &[LabelId]) -> GaussianNb {
    let all: Vec<&Vec<f64>> = xs.iter().collect();
    let (_, total_var) = column_variances(&all);
    let max_var = total_var.iter().cloned().fold(0.0, f64::max);
    let smoothing = spec.param("var_smoothing");
    let epsilon = if max_var > 0.0 { smoothing * max_var } else { smoothing };
    let n = xs.len() as f64;
    let mut log_priors = Vec::new();
    let mut means = Vec::new();
    let mut variances = Vec::new();
    for &c in classes {
        let rows: Vec<&Vec<f64>> = xs
            .iter()
            .zip(ys)
            .filter(|(_, &y)| y == c)
            .map(|(x, _)| x)
            .collect();
        let (mean, var) = column_variances(&rows);
        log_priors.push((rows.len() as f64 / n).ln());
        means.push(mean);
        variances.push(var.into_iter().map(|v| v + epsilon).collect());
    }
    GaussianNb {
        log_priors,
        means,
        variances,
    }
}

impl GaussianNb {
    /// `log P(c) + log p(x | c)` for each class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        let two_pi = 2.0 * std::f64::consts::PI;
        self.log_priors
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((lp, mean), var)| {
                let ll: f64 = x
                    .iter()
                    .zip(mean)
                    .zip(var)
                    .map(|((v, m), s)| -0.5 * (two_pi * s).ln() - (v - m) * (v - m) / (2.0 * s))
                    .sum();
                lp + ll
            })
            .collect()
    }

    pub(super) fn is_finite(&self) -> bool {
        self.log_priors.iter().all(|v| v.is_finite())
            && self.means.iter().flatten().all(|v| v.is_finite())
            && self.variances.iter().flatten().all(|v| v.is_finite() && *v > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use crate::learners::{fit, LearnerKind, LearnerSpec};

    #[test]
    fn two_point_nearest_mean() {
        let xs = vec![vec![0.0, 0.0], vec![10.0, 10.0]];
        let m = fit(&LearnerSpec::new(LearnerKind::Gnb), &xs, &[0, 1]).unwrap();
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 0);
        assert_eq!(m.predict(&[9.0, 9.0]).unwrap(), 1);
    }

    #[test]
    fn huge_smoothing_falls_back_to_prior() {
        let xs = vec![
            vec![0.0, 0.0],
            vec![0.5, 0.2],
            vec![0.1, 0.4],
            vec![10.0, 10.0],
        ];
        let ys = [0, 0, 0, 1];
        let spec = LearnerSpec::new(LearnerKind::Gnb).with("var_smoothing", 1e12);
        let m = fit(&spec, &xs, &ys).unwrap();
        for probe in [[10.0, 10.0], [9.5, 9.9], [-3.0, 20.0]] {
            assert_eq!(m.predict(&probe).unwrap(), 0);
        }
        let sharp = fit(&LearnerSpec::new(LearnerKind::Gnb), &xs, &ys).unwrap();
        assert_eq!(sharp.predict(&[10.0, 10.0]).unwrap(), 1);
    }

    #[test]
    fn constant_features_do_not_divide_by_zero() {
        let xs = vec![vec![1.0], vec![1.0], vec![1.0]];
        let m = fit(&LearnerSpec::new(LearnerKind::Gnb), &xs, &[0, 1, 1]).unwrap();
        assert_eq!(m.predict(&[1.0]).unwrap(), 1);
    }
}
