//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, SymmetricEigen};

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Relative asymmetry `‖m − mᵀ‖_F / max(‖m‖_F, tiny)`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sorted_sym_eigen(m: &Matrix) -> (Matrix, Vec<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vectors, values)
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut vals: Vec<f64> = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// `P · diag(values) · Pᵀ`.
pub fn from_eigenbasis(vectors: &Matrix, values: &[f64]) -> Matrix {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    symmetrize(&(scaled * vectors.transpose()))
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Cutoff below which singular values count as zero: `max(rows, cols) · ε · σ_max`.
pub fn rcond_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Moore–Penrose pseudo-inverse with the standard rcond rule.
///
/// The matrix is first reduced by Householder QR and the SVD is taken of the
/// triangular factor. nalgebra's SVD occasionally returns inaccurate triplets
/// for symmetric rank-deficient inputs, so the factorization is checked by
/// reconstruction and retried on the transpose when it fails.
pub fn pinv(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    if rows < cols {
        return pinv(&m.transpose()).transpose();
    }
    let qr = m.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let r_pinv = svd_pinv(&r, rows, cols)
        .or_else(|| svd_pinv(&r.transpose(), rows, cols).map(|p| p.transpose()))
        .unwrap_or_else(|| svd_pinv_unchecked(&r, rows, cols));
    r_pinv * q.transpose()
}

fn svd_pinv(m: &Matrix, rows: usize, cols: usize) -> Option<Matrix> {
    let svd = m.clone().svd(true, true);
    let recon = svd.clone().recompose().ok()?;
    let scale = m.norm().max(f64::MIN_POSITIVE);
    if (recon - m).norm() > 1e3 * f64::EPSILON * scale * (m.nrows() as f64) {
        return None;
    }
    Some(pinv_from_svd(svd, rows, cols))
}

fn svd_pinv_unchecked(m: &Matrix, rows: usize, cols: usize) -> Matrix {
    pinv_from_svd(m.clone().svd(true, true), rows, cols)
}

fn pinv_from_svd(
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rows: usize,
    cols: usize,
) -> Matrix {
    let sigma_max = svd.singular_values.max();
    let cutoff = rcond_cutoff(rows, cols, sigma_max);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut out = Matrix::zeros(v_t.ncols(), u.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += (v_t.row(i).transpose() * u.column(i).transpose()) / s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_eigen_is_descending_and_reconstructs() {
        let m = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let (p, vals) = sorted_sym_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = from_eigenbasis(&p, &vals);
        assert!((rebuilt - m).norm() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_one_diagonal() {
        let m = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0]));
        let p = pinv(&m);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(p[(1, 1)], 0.0);
    }
}
