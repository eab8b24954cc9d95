use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{best_index, AlgorithmConfig, OptimizerConfig, Prototypes};
use crate::linalg::{dot, l2_normalized, Matrix};
use crate::stream::StepBatch;
use crate::{ClassId, Result};

/// Balanced-softmax logit adjustment: `z_c + ln(n_c)`.
///
/// Training against adjusted logits compensates for the class-count
/// imbalance between emulated past classes and new classes; prediction uses
/// the raw logits.
pub fn balanced_logits(logits: &[f64], counts: &[f64]) -> Vec<f64> {
    logits.iter().zip(counts).map(|(z, n)| z + libm::log(*n)).collect()
}

/// Linear softmax head over L2-normalized features, trained with momentum
/// SGD under the balanced-softmax loss. Past classes are replayed only
/// through their stored prototypes, each replicated
/// `max(1, round(past_fraction · mean new-class count))` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBsm {
    pub prototypes: Prototypes,
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub optimizer: OptimizerConfig,
    pub past_fraction: f64,
    pub seed: u64,
    steps: u64,
}

impl LinearBsm {
    pub(super) fn init(step1: &StepBatch, config: &AlgorithmConfig, seed: u64) -> Result<Self> {
        let d = step1.dimension();
        let mut s = Self {
            prototypes: Prototypes::new(d),
            weights: Matrix::with_cols(d),
            biases: Vec::new(),
            optimizer: config.optimizer.clone(),
            past_fraction: config.bsm_past_fraction,
            seed,
            steps: 0,
        };
        s.learn(step1)?;
        Ok(s)
    }

    pub(super) fn update(&mut self, batch: &StepBatch) -> Result<()> {
        self.learn(batch)
    }

    fn learn(&mut self, batch: &StepBatch) -> Result<()> {
        let d = batch.dimension();
        let past = self.prototypes.len();
        let ids = batch.class_ids();

        let normalized: Vec<Vec<f64>> = batch.features().iter_rows().map(l2_normalized).collect();
        let norm_matrix = Matrix::from_rows(d, &normalized)?;
        let norm_batch = StepBatch::new(batch.step_index(), ids.to_vec(), norm_matrix, batch.labels().to_vec())?;
        let new_counts = norm_batch.class_counts();
        self.prototypes.append_batch(&norm_batch)?;
        for _ in ids {
            self.weights.push_row(&vec![0.0; d])?;
            self.biases.push(0.0);
        }

        let mean_new = new_counts.iter().sum::<usize>() as f64 / new_counts.len() as f64;
        let replicas = ((self.past_fraction * mean_new) + 0.5).max(1.0) as usize;

        // (row, class index) pairs; past prototypes are replicated
        let mut samples: Vec<(&[f64], usize)> = Vec::new();
        for p in 0..past {
            for _ in 0..replicas {
                samples.push((self.prototypes.means.row(p), p));
            }
        }
        for (x, label) in normalized.iter().zip(batch.labels()) {
            let k = ids.binary_search(label).expect("validated label");
            samples.push((x.as_slice(), past + k));
        }
        let mut counts = vec![replicas as f64; past];
        counts.extend(new_counts.iter().map(|&n| n as f64));
        let log_prior: Vec<f64> = counts.iter().map(|n| libm::log(*n)).collect();

        let epochs = if self.steps == 0 {
            self.optimizer.initial_epochs.unwrap_or_else(|| self.optimizer.fallback_epochs().0)
        } else {
            self.optimizer
                .incremental_epochs
                .unwrap_or_else(|| self.optimizer.fallback_epochs().1)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.steps);
        let (weights, biases) = sgd(
            &samples,
            &log_prior,
            self.weights.clone(),
            self.biases.clone(),
            &self.optimizer,
            epochs,
            &mut rng,
        );
        self.weights = weights;
        self.biases = biases;
        self.steps += 1;
        Ok(())
    }

    pub(super) fn predict_one(&self, x: &[f64]) -> ClassId {
        let x = l2_normalized(x);
        let scores = self.weights.iter_rows().zip(&self.biases).map(|(w, b)| dot(w, &x) + b);
        self.prototypes.ids[best_index(&self.prototypes.ids, scores, true)]
    }
}

impl OptimizerConfig {
    /// Epochs used when no scenario was resolved: the 90/60 family.
    pub(crate) fn fallback_epochs(&self) -> (usize, usize) {
        let scale = |e: usize| ((e as f64 * self.epoch_scale) + 0.5).max(1.0) as usize;
        (scale(90), scale(60))
    }
}

fn sgd(
    samples: &[(&[f64], usize)],
    log_prior: &[f64],
    mut weights: Matrix,
    mut biases: Vec<f64>,
    opt: &OptimizerConfig,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> (Matrix, Vec<f64>) {
    let classes = biases.len();
    let d = weights.cols();
    let mut vel_w = Matrix::zeros(classes, d);
    let mut vel_b = vec![0.0; classes];
    let mut grad_w = Matrix::zeros(classes, d);
    let mut grad_b = vec![0.0; classes];
    let mut probs = vec![0.0; classes];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let milestones = [epochs / 3, 2 * epochs / 3];

    for epoch in 0..epochs {
        let decays = milestones.iter().filter(|&&m| m > 0 && epoch >= m).count() as i32;
        let lr = opt.learning_rate * libm::pow(opt.decay_factor, decays as f64);
        order.shuffle(rng);
        for chunk in order.chunks(opt.batch_size) {
            grad_w.as_mut_slice().fill(0.0);
            grad_b.fill(0.0);
            for &i in chunk {
                let (x, y) = samples[i];
                let mut max = f64::NEG_INFINITY;
                for c in 0..classes {
                    let z = dot(weights.row(c), x) + biases[c] + log_prior[c];
                    probs[c] = z;
                    max = max.max(z);
                }
                let mut total = 0.0;
                for p in probs.iter_mut() {
                    *p = libm::exp(*p - max);
                    total += *p;
                }
                for (c, p) in probs.iter_mut().enumerate() {
                    *p /= total;
                    if c == y {
                        *p -= 1.0;
                    }
                }
                for c in 0..classes {
                    let g = probs[c];
                    if g == 0.0 {
                        continue;
                    }
                    for (gw, xv) in grad_w.row_mut(c).iter_mut().zip(x) {
                        *gw += g * xv;
                    }
                    grad_b[c] += g;
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            for c in 0..classes {
                let w = weights.row_mut(c);
                let v = vel_w.row_mut(c);
                let g = grad_w.row(c);
                for j in 0..d {
                    let step = g[j] * inv + opt.weight_decay * w[j];
                    v[j] = opt.momentum * v[j] + step;
                    w[j] -= lr * v[j];
                }
                let step = grad_b[c] * inv + opt.weight_decay * biases[c];
                vel_b[c] = opt.momentum * vel_b[c] + step;
                biases[c] -= lr * vel_b[c];
            }
        }
    }
    (weights, biases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_counts_shift_uniformly() {
        let z = [0.3, -1.2, 2.5, 2.5];
        let adj = balanced_logits(&z, &[7.0; 4]);
        let shift = libm::log(7.0);
        for (a, b) in adj.iter().zip(&z) {
            assert!((a - b - shift).abs() < 1e-15);
        }
    }

    #[test]
    fn rarer_class_is_boosted_during_training_only() {
        let adj = balanced_logits(&[1.0, 1.0], &[1.0, 100.0]);
        assert!(adj[1] > adj[0]);
    }

    #[test]
    fn head_grows_with_new_classes() {
        let m1 = Matrix::from_rows(2, &[[1.0, 0.0], [1.0, 0.1], [0.0, 1.0], [0.1, 1.0]]).unwrap();
        let s1 = StepBatch::new(1, vec![0, 1], m1, vec![0, 0, 1, 1]).unwrap();
        let cfg = AlgorithmConfig::new(crate::algorithms::AlgorithmKind::LinearBsm);
        let mut h = LinearBsm::init(&s1, &cfg, 3).unwrap();
        assert_eq!(h.weights.rows(), 2);
        let m2 = Matrix::from_rows(2, &[[-1.0, 0.0], [-1.0, -0.1]]).unwrap();
        h.update(&StepBatch::new(2, vec![9], m2, vec![9, 9]).unwrap()).unwrap();
        assert_eq!(h.weights.rows(), 3);
        assert_eq!(h.predict_one(&[-1.0, 0.05]), 9);
    }
}
