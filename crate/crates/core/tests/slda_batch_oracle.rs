//! Streaming SLDA against a single-batch LDA computed with nalgebra.

use cilrec_core::algorithms::{AlgorithmConfig, AlgorithmKind, Learner, LearnerState};
use cilrec_core::linalg::Matrix;
use cilrec_core::stream::StepBatch;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Case {
    d: usize,
    rows: Vec<(Vec<f64>, u32)>,
    classes: usize,
}

fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let d = rng.random_range(1..=8);
    let classes = rng.random_range(2..=6);
    let budget = 200 / classes;
    let mut rows = Vec::new();
    for c in 0..classes {
        let center: Vec<f64> = (0..d).map(|_| 3.0 * normal(rng)).collect();
        let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
        for _ in 0..rng.random_range(2..=budget) {
            let x = (0..d)
                .map(|j| center[j] + scale[j] * normal(rng))
                .collect();
            rows.push((x, c as u32));
        }
    }
    Case { d, rows, classes }
}

/// Random partition of the classes into steps, rows shuffled inside each.
fn random_steps(case: &Case, rng: &mut ChaCha8Rng) -> Vec<StepBatch> {
    let mut order: Vec<u32> = (0..case.classes as u32).collect();
    order.shuffle(rng);
    let mut cuts = vec![0, order.len()];
    for k in 1..order.len() {
        if rng.random_bool(0.5) {
            cuts.push(k);
        }
    }
    cuts.sort_unstable();
    cuts.dedup();
    let mut steps = Vec::new();
    for (i, w) in cuts.windows(2).enumerate() {
        let mut ids: Vec<u32> = order[w[0]..w[1]].to_vec();
        ids.sort_unstable();
        let mut rows: Vec<&(Vec<f64>, u32)> = case.rows.iter().filter(|(_, l)| ids.contains(l)).collect();
        rows.shuffle(rng);
        let feats = Matrix::from_rows(case.d, &rows.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>()).unwrap();
        let labels = rows.iter().map(|(_, l)| *l).collect();
        steps.push(StepBatch::new(i + 1, ids, feats, labels).unwrap());
    }
    steps
}

struct BatchLda {
    means: Vec<DVector<f64>>,
    covariance: DMatrix<f64>,
    weights: Vec<DVector<f64>>,
    biases: Vec<f64>,
}

fn batch_lda(case: &Case, shrinkage: f64) -> BatchLda {
    let d = case.d;
    let n = case.rows.len() as f64;
    let mut means = vec![DVector::zeros(d); case.classes];
    let mut counts = vec![0.0; case.classes];
    for (x, l) in &case.rows {
        means[*l as usize] += DVector::from_column_slice(x);
        counts[*l as usize] += 1.0;
    }
    for (m, c) in means.iter_mut().zip(&counts) {
        *m /= *c;
    }
    let mut cov = DMatrix::zeros(d, d);
    for (x, l) in &case.rows {
        let diff = DVector::from_column_slice(x) - &means[*l as usize];
        cov += &diff * diff.transpose();
    }
    cov /= n;
    let shrunk = &cov * (1.0 - shrinkage) + DMatrix::identity(d, d) * shrinkage;
    let precision = shrunk.try_inverse().expect("shrunk covariance is invertible");
    let weights: Vec<DVector<f64>> = means.iter().map(|m| &precision * m).collect();
    let biases = means.iter().zip(&weights).map(|(m, w)| -0.5 * m.dot(w)).collect();
    BatchLda {
        means,
        covariance: cov,
        weights,
        biases,
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[test]
fn streaming_slda_matches_single_batch_lda() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = AlgorithmConfig::new(AlgorithmKind::Slda);
    for case_no in 0..50 {
        let case = random_case(&mut rng);
        let steps = random_steps(&case, &mut rng);
        let mut learner = Learner::init(&cfg, &steps[0], 0).unwrap();
        for s in &steps[1..] {
            learner.update(s).unwrap();
        }
        let LearnerState::Slda(slda) = learner.state() else { unreachable!() };
        let oracle = batch_lda(&case, cfg.slda_shrinkage);

        let cov: Vec<f64> = slda.scatter.covariance().as_slice().to_vec();
        let ocov: Vec<f64> = oracle.covariance.transpose().as_slice().to_vec();
        assert!(rel(&cov, &ocov) < 1e-6, "case {case_no}: covariance");

        for (k, id) in slda.prototypes.ids.iter().enumerate() {
            let c = *id as usize;
            assert!(rel(slda.prototypes.means.row(k), oracle.means[c].as_slice()) < 1e-6, "case {case_no}: mean");
            assert!(rel(slda.weights.row(k), oracle.weights[c].as_slice()) < 1e-6, "case {case_no}: weights");
            assert!(rel(&[slda.biases[k]], &[oracle.biases[c]]) < 1e-6, "case {case_no}: bias");
        }

        // Decision boundaries: same labels on random queries with a clear
        // margin under the oracle scores.
        for _ in 0..100 {
            let x: Vec<f64> = (0..case.d).map(|_| 4.0 * normal(&mut rng)).collect();
            let xv = DVector::from_column_slice(&x);
            let mut scores: Vec<(f64, u32)> = (0..case.classes)
                .map(|c| (oracle.weights[c].dot(&xv) + oracle.biases[c], c as u32))
                .collect();
            scores.sort_by(|a, b| b.0.total_cmp(&a.0));
            let margin = scores[0].0 - scores[1].0;
            if margin > 1e-6 * scores[0].0.abs().max(1.0) {
                assert_eq!(learner.predict_one(&x), scores[0].1, "case {case_no}: boundary");
            }
        }
    }
}
