use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{best_index, fit_hinge, LinearModel, Prototypes, SvmParams};
use crate::linalg::{cosine_similarity, dot, Matrix};
use crate::stream::StepBatch;
use crate::{ClassId, Result};

/// Pseudo-feature replay: past classes are represented by features of a new
/// class translated onto the past prototype, `x̂ = x - μ_s + μ_p`, and a
/// one-vs-rest linear SVM per seen class is retrained on the new real
/// features plus the pseudo-features at every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fetril {
    pub prototypes: Prototypes,
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub params: SvmParams,
    /// Classifiers of the last step that stopped at the epoch cap.
    pub unconverged: usize,
}

/// Translates `rows` from the source class mean to `target`.
pub fn translate_features<'a>(
    rows: impl IntoIterator<Item = &'a [f64]>,
    source_mean: &[f64],
    target: &[f64],
) -> Matrix {
    let mut out = Matrix::with_cols(target.len());
    let shift: Vec<f64> = target.iter().zip(source_mean).map(|(t, s)| t - s).collect();
    for r in rows {
        let moved: Vec<f64> = r.iter().zip(&shift).map(|(x, s)| x + s).collect();
        out.push_row(&moved).expect("dimension");
    }
    out
}

impl Fetril {
    pub(super) fn init(step1: &StepBatch, params: SvmParams) -> Result<Self> {
        let d = step1.dimension();
        let mut prototypes = Prototypes::new(d);
        prototypes.append_batch(step1)?;
        let mut s = Self {
            prototypes,
            weights: Matrix::with_cols(d),
            biases: Vec::new(),
            params,
            unconverged: 0,
        };
        s.retrain(step1.features().clone(), step1.labels().to_vec());
        Ok(s)
    }

    pub(super) fn update(&mut self, batch: &StepBatch) -> Result<()> {
        let past = self.prototypes.len();
        let new_means = batch.class_means()?;
        let new_ids = batch.class_ids();

        let mut x = batch.features().clone();
        let mut labels = batch.labels().to_vec();
        for p in 0..past {
            let target = self.prototypes.means.row(p);
            let s = best_index(new_ids, new_means.iter_rows().map(|m| cosine_similarity(m, target)), true);
            let source = new_ids[s];
            let rows = batch.samples().filter(|(_, l)| *l == source).map(|(r, _)| r);
            let pseudo = translate_features(rows, new_means.row(s), target);
            for r in pseudo.iter_rows() {
                x.push_row(r)?;
                labels.push(self.prototypes.ids[p]);
            }
        }
        self.prototypes.append_batch(batch)?;
        self.retrain(x, labels);
        Ok(())
    }

    fn retrain(&mut self, x: Matrix, labels: Vec<ClassId>) {
        let mut weights = Matrix::with_cols(x.cols());
        let mut biases = Vec::with_capacity(self.prototypes.len());
        let mut unconverged = 0;
        for &id in &self.prototypes.ids {
            let y: Vec<f64> = labels.iter().map(|&l| if l == id { 1.0 } else { -1.0 }).collect();
            let params = SvmParams {
                seed: self.params.seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                ..self.params
            };
            let LinearModel {
                weights: w,
                bias,
                converged,
                ..
            } = fit_hinge(&x, &y, &params);
            if !converged {
                unconverged += 1;
            }
            weights.push_row(&w).expect("dimension");
            biases.push(bias);
        }
        self.weights = weights;
        self.biases = biases;
        self.unconverged = unconverged;
    }

    pub(super) fn predict_one(&self, x: &[f64]) -> ClassId {
        let scores = self.weights.iter_rows().zip(&self.biases).map(|(w, b)| dot(w, x) + b);
        self.prototypes.ids[best_index(&self.prototypes.ids, scores, true)]
    }
}
