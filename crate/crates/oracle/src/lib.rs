//! Reference computations used only by tests.
//!
//! Everything here is deliberately naive: explicit matrix powers, Gauss–Jordan
//! inverses and a one-sided Jacobi SVD, so that results do not share code
//! paths with the library under test.

use hrelm::regcore::{self, HrConfig, HrMode, RegProblem};
use hrelm::Matrix;

/// Gauss–Jordan inverse with partial pivoting. `None` if a pivot vanishes.
pub fn gauss_inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "square matrix required");
    let mut a = m.clone();
    let mut inv = Matrix::identity(n, n);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))?;
        if a[(pivot, col)].abs() < 1e-300 {
            return None;
        }
        a.swap_rows(col, pivot);
        inv.swap_rows(col, pivot);
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        a[(i, j)] -= f * a[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// One-sided Jacobi SVD: returns `(U, σ, V)` with `m = U diag(σ) Vᵀ`, σ unsorted.
pub fn jacobi_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (rows, cols) = m.shape();
    let mut u = m.clone();
    let mut v = Matrix::identity(cols, cols);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = u.column(p).norm_squared();
                let beta: f64 = u.column(q).norm_squared();
                let gamma: f64 = u.column(p).dot(&u.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (a, b) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * a - s * b;
                    u[(i, q)] = s * a + c * b;
                }
                for i in 0..cols {
                    let (a, b) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * a - s * b;
                    v[(i, q)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..cols).map(|j| u.column(j).norm()).collect();
    for (j, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            u.column_mut(j).scale_mut(1.0 / s);
        }
    }
    (u, sigma, v)
}

/// Pseudo-inverse from [`jacobi_svd`], dropping `σ ≤ max(r,c)·ε·σ_max`.
pub fn pinv(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows < cols {
        return pinv(&m.transpose()).transpose();
    }
    let (u, sigma, v) = jacobi_svd(m);
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = rows.max(cols) as f64 * f64::EPSILON * smax;
    let mut out = Matrix::zeros(cols, rows);
    for (j, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += v.column(j) * u.column(j).transpose() / s;
        }
    }
    out
}

/// `Σ_{i=0}^{c} Fⁱ` with every power formed explicitly.
pub fn neumann_sum(f: &Matrix, c: usize) -> Matrix {
    let n = f.nrows();
    let mut total = Matrix::zeros(n, n);
    for i in 0..=c {
        let mut power = Matrix::identity(n, n);
        for _ in 0..i {
            power = &power * f;
        }
        total += power;
    }
    total
}

/// HR estimate from its defining formula with explicit inverses and powers.
pub fn hr_explicit(
    gram: &Matrix,
    cross: &Matrix,
    r: &Matrix,
    c: usize,
    mode: HrMode,
) -> Option<Matrix> {
    let a_inv = gauss_inverse(&(gram + r))?;
    let f = match mode {
        HrMode::Standard => r * &a_inv,
        HrMode::Swapped => gram * &a_inv,
    };
    Some(a_inv * neumann_sum(&f, c) * cross)
}

/// Ridge solution `(G + μ̄I)⁻¹ HᵀY`.
pub fn ridge(gram: &Matrix, cross: &Matrix, mu_bar: f64) -> Option<Matrix> {
    let n = gram.nrows();
    Some(gauss_inverse(&(gram + Matrix::identity(n, n) * mu_bar))? * cross)
}

/// Stacks minibatches row-wise.
pub fn stack(batches: &[(Matrix, Matrix)]) -> (Matrix, Matrix) {
    let rows: usize = batches.iter().map(|(h, _)| h.nrows()).sum();
    let (l, k) = (batches[0].0.ncols(), batches[0].1.ncols());
    let mut h = Matrix::zeros(rows, l);
    let mut y = Matrix::zeros(rows, k);
    let mut at = 0;
    for (bh, by) in batches {
        h.view_mut((at, 0), (bh.nrows(), l)).copy_from(bh);
        y.view_mut((at, 0), (by.nrows(), k)).copy_from(by);
        at += bh.nrows();
    }
    (h, y)
}

/// Batch HR solution on the row-stacked hidden matrices.
pub fn stacked_solve(
    batches: &[(Matrix, Matrix)],
    r: &Matrix,
    config: &HrConfig,
) -> Result<Matrix, regcore::RegError> {
    let (h, y) = stack(batches);
    let problem = RegProblem::from_design(&h, &y)?;
    Ok(regcore::hr_solve_with(&problem, r, config)?.0)
}

/// Information-form recursion `A ← A + HᵀH`, `β ← A⁻¹(A_prev β + HᵀY)`,
/// starting from `(A₀⁻¹, β₀)`, with explicit inverses at every step.
pub fn information_recursion(
    a0_inv: &Matrix,
    beta0: &Matrix,
    batches: &[(Matrix, Matrix)],
) -> Option<(Matrix, Matrix)> {
    let mut a = gauss_inverse(a0_inv)?;
    let mut beta = beta0.clone();
    for (h, y) in batches {
        let next = &a + h.transpose() * h;
        let next_inv = gauss_inverse(&next)?;
        beta = &next_inv * (&a * &beta + h.transpose() * y);
        a = next;
    }
    Some((gauss_inverse(&a)?, beta))
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
