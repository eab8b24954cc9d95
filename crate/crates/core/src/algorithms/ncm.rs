use serde::{Deserialize, Serialize};

use super::{best_index, Prototypes};
use crate::linalg::cosine_similarity;
use crate::stream::StepBatch;
use crate::{ClassId, Result};

/// Nearest class mean under cosine distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ncm {
    pub prototypes: Prototypes,
}

impl Ncm {
    pub(super) fn init(step1: &StepBatch) -> Result<Self> {
        let mut prototypes = Prototypes::new(step1.dimension());
        prototypes.append_batch(step1)?;
        Ok(Self { prototypes })
    }

    pub(super) fn update(&mut self, batch: &StepBatch) -> Result<()> {
        self.prototypes.append_batch(batch)
    }

    pub(super) fn predict_one(&self, x: &[f64]) -> ClassId {
        let p = &self.prototypes;
        let k = best_index(&p.ids, p.means.iter_rows().map(|m| 1.0 - cosine_similarity(x, m)), false);
        p.ids[k]
    }
}

#[cfg(test)]
mod tests {
    use alloc::vec;

    use crate::algorithms::{AlgorithmConfig, AlgorithmKind, Learner, LearnerState};
    use crate::linalg::Matrix;
    use crate::stream::StepBatch;

    #[test]
    fn stored_means_are_sample_means() {
        let m = Matrix::from_rows(3, &[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        let b = StepBatch::new(1, vec![3, 8], m, vec![3, 3, 8, 8]).unwrap();
        let l = Learner::init(&AlgorithmConfig::new(AlgorithmKind::Ncm), &b, 0).unwrap();
        let LearnerState::Ncm(s) = l.state() else { unreachable!() };
        assert_eq!(s.prototypes.means.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(s.prototypes.means.row(1), &[-1.0, 0.0, 0.0]);
        assert_eq!(s.prototypes.counts, vec![2, 2]);
        assert_eq!(l.predict_one(&[0.3, 0.9, 0.0]), 3);
        assert_eq!(l.predict_one(&[-0.3, 0.9, 0.0]), 8);
    }

    #[test]
    fn cosine_ignores_magnitude() {
        let m = Matrix::from_rows(2, &[[1.0, 0.0], [0.0, 10.0]]).unwrap();
        let b = StepBatch::new(1, vec![0, 1], m, vec![0, 1]).unwrap();
        let l = Learner::init(&AlgorithmConfig::new(AlgorithmKind::Ncm), &b, 0).unwrap();
        // Euclidean would pick class 0; the angle says class 1.
        assert_eq!(l.predict_one(&[0.5, 0.6]), 1);
    }
}
