//! Binary L2-regularized hinge-loss SVM trained by dual coordinate descent.
//!
//! The bias is handled as an extra feature fixed to 1, so the minimized
//! objective is
//!
//! `½(‖w‖² + b²) + C Σᵢ max(0, 1 - yᵢ(w·xᵢ + b))`.
//!
//! Training stops when the duality gap falls below `tolerance` times the
//! primal objective, or after `max_epochs` passes (then `converged` is
//! false).

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Matrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub regularization: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            regularization: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub epochs: usize,
    pub converged: bool,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Primal objective of `(w, b)` on `(x, y)`.
pub fn hinge_objective(x: &Matrix, y: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let loss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(xi, yi)| (1.0 - yi * (dot(w, xi) + b)).max(0.0))
        .sum();
    0.5 * (dot(w, w) + b * b) + c * loss
}

/// Epochs between duality-gap checks while the active set is shrunk.
const GAP_INTERVAL: usize = 8;

/// Trains on rows `x` with labels `y ∈ {-1, +1}`.
///
/// Coordinates stuck at a bound whose gradient points outward are dropped
/// from the active set (shrinking) and restored once the remaining ones are
/// optimal.
pub fn fit_hinge(x: &Matrix, y: &[f64], params: &SvmParams) -> LinearModel {
    let n = x.rows();
    let d = x.cols();
    let c = params.regularization;
    let diag: Vec<f64> = x.iter_rows().map(|r| dot(r, r) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut active: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut objective = hinge_objective(x, y, &w, b, c);
    let mut epochs = 0;
    let mut converged = false;
    let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);
    // Projected-gradient spread below which the active set counts as solved.
    let mut pg_tolerance = 0.1;

    while epochs < params.max_epochs {
        epochs += 1;
        active.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut k = 0;
        while k < active.len() {
            let i = active[k];
            let xi = x.row(i);
            let yi = y[i];
            let g = yi * (dot(&w, xi) + b) - 1.0;
            let a = alpha[i];
            let projected = if a == 0.0 {
                if g > upper {
                    active.swap_remove(k);
                    continue;
                }
                g.min(0.0)
            } else if a == c {
                if g < lower {
                    active.swap_remove(k);
                    continue;
                }
                g.max(0.0)
            } else {
                g
            };
            k += 1;
            pg_max = pg_max.max(projected);
            pg_min = pg_min.min(projected);
            if projected.abs() <= 1e-12 {
                continue;
            }
            let next = (a - g / diag[i]).clamp(0.0, c);
            let step = (next - a) * yi;
            if step != 0.0 {
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += step * xj;
                }
                b += step;
            }
            alpha[i] = next;
        }
        let full = active.len() == n;
        let solved = pg_max - pg_min <= pg_tolerance;
        if full || solved || epochs % GAP_INTERVAL == 0 || epochs == params.max_epochs {
            objective = hinge_objective(x, y, &w, b, c);
            let dual = alpha.iter().sum::<f64>() - 0.5 * (dot(&w, &w) + b * b);
            if objective - dual <= params.tolerance * objective.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if solved {
            if full {
                pg_tolerance *= 0.1;
            }
            active = (0..n).collect();
            upper = f64::INFINITY;
            lower = f64::NEG_INFINITY;
        } else {
            upper = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
            lower = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
        }
    }
    LinearModel {
        weights: w,
        bias: b,
        objective,
        epochs,
        converged,
    }
}

/// One-vs-rest binary classifier: `positives` labeled +1, `negatives` -1.
pub fn train_linear_ovr(positives: &Matrix, negatives: &Matrix, params: &SvmParams) -> Result<LinearModel> {
    if positives.rows() == 0 {
        return Err(Error::Empty("positive samples"));
    }
    if negatives.rows() == 0 {
        return Err(Error::Empty("negative samples"));
    }
    if positives.cols() != negatives.cols() {
        return Err(Error::DimensionMismatch {
            expected: positives.cols(),
            found: negatives.cols(),
        });
    }
    let mut x = positives.clone();
    for r in negatives.iter_rows() {
        x.push_row(r)?;
    }
    let mut y = vec![1.0; positives.rows()];
    y.extend(core::iter::repeat_n(-1.0, negatives.rows()));
    Ok(fit_hinge(&x, &y, params))
}
