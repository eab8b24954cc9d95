use crate::linalg::Matrix;

/// Covariance shrinkage with separate diagonal and off-diagonal loading:
///
/// `S' = S + γ1·v1·I + γ2·v2·(𝟙 - I)`
///
/// where `v1` is the mean absolute diagonal entry and `v2` the mean absolute
/// off-diagonal entry of `S`. Symmetric input stays exactly symmetric.
pub fn shrink_covariance(s: &Matrix, gamma1: f64, gamma2: f64) -> Matrix {
    let d = s.rows();
    debug_assert_eq!(d, s.cols());
    let mut diag = 0.0;
    let mut off = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                diag += s.get(i, j).abs();
            } else {
                off += s.get(i, j).abs();
            }
        }
    }
    let v1 = if d == 0 { 0.0 } else { diag / d as f64 };
    let v2 = if d < 2 { 0.0 } else { off / (d * (d - 1)) as f64 };
    let on_diag = gamma1 * v1;
    let off_diag = gamma2 * v2;
    let mut out = s.clone();
    for i in 0..d {
        for j in 0..d {
            let add = if i == j { on_diag } else { off_diag };
            out.set(i, j, s.get(i, j) + add);
        }
    }
    out
}
