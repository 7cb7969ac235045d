//! Gaussian-kernel SVM solved in the dual with simplified SMO.
//!
//! For each multiplier violating the KKT conditions by more than `tol`, a
//! partner index is drawn at random (seeded); if that pair cannot move, the
//! remaining indices are tried in order starting from the drawn one. Fitting
//! stops after `max_passes` consecutive sweeps without an update, or after
//! `max_iter` sweeps in total. The bias is then re-derived from the KKT
//! conditions; if that exposes violators, sweeping resumes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LearnerSpec, Standardizer};

/// Smallest multiplier change that counts as an update.
const MIN_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct RbfSvm {
    pub scaler: Standardizer,
    pub gamma: f64,
    /// Standardized support vectors (multipliers > 0 only).
    pub support: Vec<Vec<f64>>,
    /// `α_i · y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl RbfSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * rbf(self.gamma, s, &z))
            .sum::<f64>()
            + self.bias
    }

    pub(super) fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.coef.iter().all(|c| c.is_finite())
    }
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Dense Gram matrix, row-major.
pub fn kernel_matrix(gamma: f64, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(gamma, &xs[i], &xs[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Sweeps over the training set.
    pub sweeps: usize,
    /// Dual objective after each accepted pair update (when recorded).
    pub dual_trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
    pub max_iter: usize,
    pub seed: u64,
}

/// `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij`.
pub fn dual_objective(alpha: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let mut quad = 0.0;
    for i in 0..alpha.len() {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..alpha.len() {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn output(alpha: &[f64], y: &[f64], k_row: &[f64], bias: f64) -> f64 {
    alpha
        .iter()
        .zip(y)
        .zip(k_row)
        .filter(|((a, _), _)| **a != 0.0)
        .map(|((a, yy), kv)| a * yy * kv)
        .sum::<f64>()
        + bias
}

/// Largest KKT violation of `(alpha, bias)`, measured as in the SMO
/// selection rule: `y·E < 0` with `α < C`, or `y·E > 0` with `α > 0`.
pub fn max_kkt_violation(alpha: &[f64], bias: f64, y: &[f64], k: &[Vec<f64>], c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..alpha.len() {
        let r = y[i] * (output(alpha, y, &k[i], bias) - y[i]);
        if alpha[i] < c && r < 0.0 {
            worst = worst.max(-r);
        }
        if alpha[i] > 0.0 && r > 0.0 {
            worst = worst.max(r);
        }
    }
    worst
}

/// Moves multipliers within rounding distance of a bound onto it, so that
/// "free" means strictly inside `(0, C)`.
fn snap(a: f64, c: f64) -> f64 {
    let eps = 1e-12 * c;
    if a < eps {
        0.0
    } else if a > c - eps {
        c
    } else {
        a
    }
}

/// Bias satisfying the KKT conditions for fixed multipliers: the mean over
/// free multipliers, otherwise the midpoint of the interval allowed by the
/// bound ones.
pub fn kkt_bias(alpha: &[f64], y: &[f64], k: &[Vec<f64>], c: f64) -> f64 {
    let gap = |i: usize| y[i] - output(alpha, y, &k[i], 0.0);
    let free: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0.0 && alpha[i] < c).collect();
    if !free.is_empty() {
        return free.iter().map(|&i| gap(i)).sum::<f64>() / free.len() as f64;
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..alpha.len() {
        let g = gap(i);
        if (alpha[i] == 0.0) == (y[i] > 0.0) {
            lo = lo.max(g);
        } else {
            hi = hi.min(g);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo + hi) / 2.0,
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Runs SMO on a precomputed kernel with labels `y ∈ {−1, +1}`.
pub fn smo(k: &[Vec<f64>], y: &[f64], params: SmoParams, record_trace: bool) -> SmoSolution {
    let n = y.len();
    let c = params.c;
    let tol = params.tol;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut alpha = vec![0.0; n];
    let mut bias = 0.0;
    let mut passes = 0;
    let mut sweeps = 0;
    let mut trace = Vec::new();

    // Attempts a joint step on (i, j); returns true when the pair moved.
    let mut take_step = |i: usize, j: usize, e_i: f64, alpha: &mut Vec<f64>, bias: &mut f64| -> bool {
        if i == j {
            return false;
        }
        let e_j = output(alpha, y, &k[j], *bias) - y[j];
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        if lo >= hi {
            return false;
        }
        let eta = 2.0 * k[i][j] - k[i][i] - k[j][j];
        if eta >= 0.0 {
            return false;
        }
        let aj = snap((aj_old - y[j] * (e_i - e_j) / eta).clamp(lo, hi), c);
        if (aj - aj_old).abs() < MIN_STEP {
            return false;
        }
        let ai = snap((ai_old + y[i] * y[j] * (aj_old - aj)).clamp(0.0, c), c);
        let b1 = *bias - e_i - y[i] * (ai - ai_old) * k[i][i] - y[j] * (aj - aj_old) * k[i][j];
        let b2 = *bias - e_j - y[i] * (ai - ai_old) * k[i][j] - y[j] * (aj - aj_old) * k[j][j];
        *bias = if ai > 0.0 && ai < c {
            b1
        } else if aj > 0.0 && aj < c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        alpha[i] = ai;
        alpha[j] = aj;
        if record_trace {
            trace.push(dual_objective(alpha, y, k));
        }
        true
    };

    loop {
        let mut updated = false;
        while passes < params.max_passes && sweeps < params.max_iter {
            let mut changed = 0;
            for i in 0..n {
                let e_i = output(&alpha, y, &k[i], bias) - y[i];
                let r = y[i] * e_i;
                if !((r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0)) {
                    continue;
                }
                let start = {
                    let j = rng.random_range(0..n - 1);
                    if j >= i {
                        j + 1
                    } else {
                        j
                    }
                };
                let moved = (0..n)
                    .map(|off| (start + off) % n)
                    .any(|j| take_step(i, j, e_i, &mut alpha, &mut bias));
                if moved {
                    changed += 1;
                }
            }
            sweeps += 1;
            passes = if changed == 0 { passes + 1 } else { 0 };
            updated |= changed > 0;
        }
        // The running bias goes stale when every multiplier sits at a bound.
        bias = kkt_bias(&alpha, y, k, c);
        if !updated || sweeps >= params.max_iter || max_kkt_violation(&alpha, bias, y, k, c) <= tol {
            break;
        }
        passes = 0;
    }
    SmoSolution {
        alpha,
        bias,
        sweeps,
        dual_trace: trace,
    }
}

pub(super) fn resolve_gamma(spec: &LearnerSpec, dim: usize) -> f64 {
    let g = spec.param("gamma");
    if g.is_nan() {
        1.0 / dim as f64
    } else {
        g
    }
}

pub(super) fn smo_params(spec: &LearnerSpec) -> SmoParams {
    SmoParams {
        c: spec.param("C"),
        tol: spec.param("tol"),
        max_passes: spec.param("max_passes") as usize,
        max_iter: spec.param("max_iter") as usize,
        seed: spec.seed,
    }
}

pub(super) fn fit(spec: &LearnerSpec, xs: &[Vec<f64>], positive: &[bool]) -> RbfSvm {
    let scaler = Standardizer::fit(xs);
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| scaler.transform(x)).collect();
    let gamma = resolve_gamma(spec, zs[0].len());
    let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let k = kernel_matrix(gamma, &zs);
    let sol = smo(&k, &y, smo_params(spec), false);
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for ((z, a), yy) in zs.into_iter().zip(&sol.alpha).zip(&y) {
        if *a > 0.0 {
            support.push(z);
            coef.push(a * yy);
        }
    }
    RbfSvm {
        scaler,
        gamma,
        support,
        coef,
        bias: sol.bias,
    }
}
