use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{best_index, Prototypes};
use crate::linalg::{dot, spd_inverse_regularized, Matrix, ScatterAccumulator};
use crate::stream::StepBatch;
use crate::{ClassId, Result};

/// Streaming linear discriminant analysis.
///
/// Class means and one shared covariance are updated row by row. After each
/// step the covariance is shrunk towards the identity,
/// `Λ = ((1-ε)Σ + εI)⁻¹`, and the linear scores `w_c = Λμ_c`,
/// `b_c = -½ μ_cᵀΛμ_c` are cached for prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slda {
    pub prototypes: Prototypes,
    pub scatter: ScatterAccumulator,
    pub shrinkage: f64,
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Slda {
    pub(super) fn init(step1: &StepBatch, shrinkage: f64) -> Result<Self> {
        let d = step1.dimension();
        let mut s = Self {
            prototypes: Prototypes::new(d),
            scatter: ScatterAccumulator::new(d),
            shrinkage,
            weights: Matrix::with_cols(d),
            biases: Vec::new(),
        };
        s.update(step1)?;
        Ok(s)
    }

    pub(super) fn update(&mut self, batch: &StepBatch) -> Result<()> {
        let d = batch.dimension();
        let ids = batch.class_ids();
        let mut means = vec![vec![0.0; d]; ids.len()];
        let mut counts = vec![0usize; ids.len()];
        for (x, label) in batch.samples() {
            let k = ids.binary_search(&label).expect("validated label");
            self.scatter.push(x, &mut means[k], &mut counts[k]);
        }
        for ((id, mean), n) in ids.iter().zip(&means).zip(&counts) {
            self.prototypes.push(*id, mean, *n)?;
        }
        self.refresh();
        Ok(())
    }

    /// Shrunk covariance `(1-ε)Σ + εI`.
    pub fn shrunk_covariance(&self) -> Matrix {
        let sigma = self.scatter.covariance();
        let d = sigma.rows();
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let eye = if i == j { self.shrinkage } else { 0.0 };
                out.set(i, j, (1.0 - self.shrinkage) * sigma.get(i, j) + eye);
            }
        }
        out
    }

    fn refresh(&mut self) {
        let precision = spd_inverse_regularized(&self.shrunk_covariance());
        let mut weights = Matrix::with_cols(precision.cols());
        let mut biases = Vec::with_capacity(self.prototypes.len());
        for mu in self.prototypes.means.iter_rows() {
            let w = precision.mul_vec(mu);
            biases.push(-0.5 * dot(mu, &w));
            weights.push_row(&w).expect("dimension");
        }
        self.weights = weights;
        self.biases = biases;
    }

    pub(super) fn predict_one(&self, x: &[f64]) -> ClassId {
        let scores = self.weights.iter_rows().zip(&self.biases).map(|(w, b)| dot(w, x) + b);
        self.prototypes.ids[best_index(&self.prototypes.ids, scores, true)]
    }
}
