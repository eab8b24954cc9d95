use cilrec_core::algorithms::{
    balanced_logits, fit_hinge, hinge_objective, shrink_covariance, Fecam, Prototypes, SvmParams,
};
use cilrec_core::linalg::{dot, l2_normalized, squared_distance, Matrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    // Gram matrix of a possibly rank-deficient factor.
    let rank = rng.random_range(1..=d);
    let f: Vec<f64> = (0..d * rank).map(|_| normal(rng)).collect();
    let mut s = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let v: f64 = (0..rank).map(|k| f[i * rank + k] * f[j * rank + k]).sum();
            s.set(i, j, v);
        }
    }
    s
}

fn min_eigenvalue(m: &Matrix) -> f64 {
    let n = m.rows();
    let dm = DMatrix::from_row_slice(n, n, m.as_slice());
    dm.symmetric_eigenvalues().min()
}

#[test]
fn diagonal_loading_makes_psd_matrices_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let d = rng.random_range(1..=12);
        let s = random_psd(&mut rng, d);
        let shrunk = shrink_covariance(&s, 10.0, 0.0);
        assert!(min_eigenvalue(&shrunk) > 0.0);
    }
}

#[test]
fn equal_diagonal_and_offdiagonal_loading_can_be_singular() {
    // S = J (all ones): v1 = v2 = 1, so γ1 = γ2 = 10 gives 11·J, rank one.
    let d = 4;
    let mut s = Matrix::zeros(d, d);
    s.as_mut_slice().fill(1.0);
    let shrunk = shrink_covariance(&s, 10.0, 10.0);
    assert!(min_eigenvalue(&shrunk).abs() < 1e-9);
}

#[test]
fn fecam_with_isotropic_covariance_is_euclidean_ncm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..10 {
        let d = rng.random_range(2..=16);
        let classes = rng.random_range(2..=20);
        let mut protos = Prototypes::new(d);
        for c in 0..classes {
            let m: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            protos.push(c as u32, &l2_normalized(&m), 1).unwrap();
        }
        let scale = [1.0, 4.0, 0.25][trial % 3];
        let mut cov = Matrix::identity(d);
        for i in 0..d {
            cov.set(i, i, scale);
        }
        let fecam = Fecam::from_parts(protos.clone(), cov);
        for _ in 0..100 {
            let q: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            let qn = l2_normalized(&q);
            let mut best = 0;
            for k in 1..classes {
                if squared_distance(&qn, protos.means.row(k)) < squared_distance(&qn, protos.means.row(best)) {
                    best = k;
                }
            }
            assert_eq!(fecam.predict_one(&q), protos.ids[best]);
        }
    }
}

#[test]
fn balanced_softmax_with_equal_counts_keeps_the_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let n = rng.random_range(2..=50);
        let z: Vec<f64> = (0..n).map(|_| 5.0 * normal(&mut rng)).collect();
        let count = rng.random_range(1..=5000) as f64;
        let adj = balanced_logits(&z, &vec![count; n]);
        let arg = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        assert_eq!(arg(&z), arg(&adj));
    }
}

/// Sub-gradient descent (best iterate kept) on the same primal objective.
fn subgradient_oracle(x: &Matrix, y: &[f64], c: f64, iters: usize) -> (Vec<f64>, f64) {
    let d = x.cols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (w.clone(), b, hinge_objective(x, y, &w, b, c));
    for t in 1..=iters {
        let mut gw = w.clone();
        let mut gb = b;
        for (xi, yi) in x.iter_rows().zip(y) {
            if yi * (dot(&w, xi) + b) < 1.0 {
                for (g, v) in gw.iter_mut().zip(xi) {
                    *g -= c * yi * v;
                }
                gb -= c * yi;
            }
        }
        let lr = 1.0 / (1.0 + t as f64);
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= lr * g;
        }
        b -= lr * gb;
        let obj = hinge_objective(x, y, &w, b, c);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
    }
    let mut out = best.0;
    out.push(best.1);
    (out, best.2)
}

#[test]
fn dual_coordinate_descent_reaches_the_primal_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(6..=30);
        let mut x = Matrix::with_cols(d);
        let mut y = Vec::new();
        for _ in 0..n {
            let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let row: Vec<f64> = (0..d).map(|_| normal(&mut rng) + 0.8 * label).collect();
            x.push_row(&row).unwrap();
            y.push(label);
        }
        let m = fit_hinge(&x, &y, &SvmParams::default());
        assert!(m.converged);
        let (_, oracle) = subgradient_oracle(&x, &y, 1.0, 20_000);
        // The stopping rule bounds the primal excess by the tolerance.
        assert!(m.objective <= oracle * (1.0 + 1e-4));
        assert!((oracle - m.objective) / oracle < 1e-3, "{} vs {}", m.objective, oracle);
    }
}
