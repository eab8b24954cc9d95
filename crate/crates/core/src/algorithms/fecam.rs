use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{best_index, shrink_covariance, AlgorithmConfig, Prototypes};
use crate::linalg::{l2_normalized, spd_inverse_regularized, Matrix, ScatterAccumulator};
use crate::stream::StepBatch;
use crate::{ClassId, Result};

/// Nearest prototype under a single shared, shrunk covariance
/// (Mahalanobis distance) on L2-normalized features.
///
/// Step 1 sets `Σ' = shrink(C₁, γ1_init, γ2_init)` where `C₁` is the pooled
/// within-class covariance of step 1. Each later batch contributes its own
/// pooled covariance, shrunk with the incremental gammas, as a
/// sample-weighted average: `Σ' ← (N·Σ' + n_b·shrink(C_b)) / (N + n_b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fecam {
    pub prototypes: Prototypes,
    pub covariance: Matrix,
    pub total: usize,
    pub gamma_incremental: (f64, f64),
    pub precision: Matrix,
}

impl Fecam {
    pub(super) fn init(step1: &StepBatch, config: &AlgorithmConfig) -> Result<Self> {
        let d = step1.dimension();
        let mut prototypes = Prototypes::new(d);
        let (cov, n) = batch_statistics(step1, &mut prototypes)?;
        let covariance = shrink_covariance(&cov, config.fecam_gamma1_initial, config.fecam_gamma2_initial);
        let precision = spd_inverse_regularized(&covariance);
        Ok(Self {
            prototypes,
            covariance,
            total: n,
            gamma_incremental: (config.fecam_gamma1_incremental, config.fecam_gamma2_incremental),
            precision,
        })
    }

    /// Builds a classifier straight from prototypes and a shared covariance.
    pub fn from_parts(prototypes: Prototypes, covariance: Matrix) -> Self {
        let precision = spd_inverse_regularized(&covariance);
        let total = prototypes.counts.iter().sum();
        Self {
            prototypes,
            covariance,
            total,
            gamma_incremental: (0.0, 0.0),
            precision,
        }
    }

    pub(super) fn update(&mut self, batch: &StepBatch) -> Result<()> {
        let (cov, n) = batch_statistics(batch, &mut self.prototypes)?;
        let (g1, g2) = self.gamma_incremental;
        let cov = shrink_covariance(&cov, g1, g2);
        let old = self.total as f64;
        let new = n as f64;
        let d = cov.rows();
        for i in 0..d {
            for j in 0..d {
                let v = (old * self.covariance.get(i, j) + new * cov.get(i, j)) / (old + new);
                self.covariance.set(i, j, v);
            }
        }
        self.total += n;
        self.precision = spd_inverse_regularized(&self.covariance);
        Ok(())
    }

    /// `(x-μ)ᵀ Σ'⁻¹ (x-μ)` for an already normalized `x`.
    pub fn mahalanobis(&self, x: &[f64], mean: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        let d = diff.len();
        let mut total = 0.0;
        for i in 0..d {
            let row = self.precision.row(i);
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * diff[j];
            }
            total += diff[i] * s;
        }
        total
    }

    pub fn predict_one(&self, x: &[f64]) -> ClassId {
        let x = l2_normalized(x);
        let p = &self.prototypes;
        let k = best_index(&p.ids, p.means.iter_rows().map(|m| self.mahalanobis(&x, m)), false);
        p.ids[k]
    }
}

/// Appends the normalized class means of `batch` to `prototypes` and returns
/// the batch's pooled within-class covariance with its row count.
fn batch_statistics(batch: &StepBatch, prototypes: &mut Prototypes) -> Result<(Matrix, usize)> {
    let d = batch.dimension();
    let ids = batch.class_ids();
    let mut acc = ScatterAccumulator::new(d);
    let mut means = vec![vec![0.0; d]; ids.len()];
    let mut counts = vec![0usize; ids.len()];
    for (x, label) in batch.samples() {
        let k = ids.binary_search(&label).expect("validated label");
        acc.push(&l2_normalized(x), &mut means[k], &mut counts[k]);
    }
    for ((id, mean), n) in ids.iter().zip(&means).zip(&counts) {
        prototypes.push(*id, mean, *n)?;
    }
    Ok((acc.covariance().clone(), acc.total()))
}
