//! High-order regularization (HR) of the normal equations `HᵀH β = HᵀY`.
//!
//! With a regularization matrix `R` the regularization factor is
//! `F(R) = R (HᵀH + R)⁻¹` (standard mode) or `F(R) = HᵀH (HᵀH + R)⁻¹`
//! (swapped mode, for rank-deficient Gram matrices). Truncating the Neumann
//! series of `(I − F)⁻¹` after `c + 1` terms gives the HR estimate
//!
//! ```text
//! β̂ = (HᵀH + R)⁻¹ Σ_{i=0}^{c} Fⁱ(R) HᵀY
//! ```
//!
//! which reduces to ridge regression for `c = 0`. This module also provides
//! the approximation residual, the a-priori error bounds, the condition
//! number criterion `Obj(R) = ‖F_ar(R)‖₂ · Cond(R)` and the eigenbasis
//! strategies used to pick `R`.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};

/// Eigenvalues of the Gram matrix in `[−PSD_CLAMP·λ_max, 0)` are treated as zero.
pub const PSD_CLAMP: f64 = 1e-10;
/// `HᵀH + R` is singular when `λ_min ≤ SINGULAR_SUM·λ_max`.
pub const SINGULAR_SUM: f64 = 1e-12;
/// The Gram matrix is singular for standard-mode residuals when `λ_n ≤ SINGULAR_GRAM·λ₁`.
pub const SINGULAR_GRAM: f64 = 1e-12;
const POWER_ITERATIONS: usize = 50;
const POWER_TOLERANCE: f64 = 1e-10;
const COMMUTE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("HᵀH + R is numerically singular (λ_min = {min_eig:e}, λ_max = {max_eig:e})")]
    SingularSum { min_eig: f64, max_eig: f64 },
    #[error("spectral radius of F(R) is {radius}, must stay below {tolerance}")]
    SpectralViolation { radius: f64, tolerance: f64 },
    #[error("Gram matrix is singular (λ_n = {min_eig:e}, λ₁ = {max_eig:e})")]
    SingularGram { min_eig: f64, max_eig: f64 },
    #[error("invalid regularization strategy: {0}")]
    InvalidStrategy(String),
    #[error("matrix is not positive semidefinite (eigenvalue {min_eig:e})")]
    NonPsd { min_eig: f64 },
    #[error("swapped mode needs a positive definite R (λ_min = {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("{0} is only defined in standard mode")]
    StandardModeOnly(&'static str),
}

pub type Result<T, E = RegError> = std::result::Result<T, E>;

/// Eigendecomposition `HᵀH = P diag(λ) Pᵀ` with `λ₁ ≥ … ≥ λ_n ≥ 0`.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub vectors: Matrix,
    pub values: Vec<f64>,
}

impl EigenDecomp {
    fn of_psd(m: &Matrix) -> Result<Self> {
        let (vectors, mut values) = linalg::sorted_sym_eigen(m);
        let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
        for v in values.iter_mut() {
            if *v < 0.0 {
                if *v < -PSD_CLAMP * lambda_max || lambda_max == 0.0 && *v < -PSD_CLAMP {
                    return Err(RegError::NonPsd { min_eig: *v });
                }
                *v = 0.0;
            }
        }
        Ok(Self { vectors, values })
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Numerical rank under the `n · ε · λ₁` rule.
    pub fn rank(&self) -> usize {
        let n = self.values.len();
        let cutoff = linalg::rcond_cutoff(n, n, self.lambda_max());
        self.values
            .iter()
            .filter(|&&v| v > cutoff && v > 0.0)
            .count()
    }
}

/// The algebraic object HR works on: `HᵀH` and `HᵀY`.
#[derive(Debug, Clone)]
pub struct RegProblem {
    gram: Matrix,
    cross: Matrix,
    eig: OnceLock<Result<EigenDecomp>>,
}

impl RegProblem {
    /// Builds a problem from a Gram matrix and the cross matrix. The Gram
    /// matrix is symmetrized.
    pub fn new(gram: Matrix, cross: Matrix) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(RegError::DimensionMismatch(format!(
                "gram is {}x{}, expected square",
                gram.nrows(),
                gram.ncols()
            )));
        }
        if cross.nrows() != gram.nrows() {
            return Err(RegError::DimensionMismatch(format!(
                "cross has {} rows, gram is {}x{}",
                cross.nrows(),
                gram.nrows(),
                gram.ncols()
            )));
        }
        Ok(Self {
            gram: linalg::symmetrize(&gram),
            cross,
            eig: OnceLock::new(),
        })
    }

    /// `RegProblem(HᵀH, HᵀY)` from a design matrix and targets.
    pub fn from_design(h: &Matrix, y: &Matrix) -> Result<Self> {
        if h.nrows() != y.nrows() {
            return Err(RegError::DimensionMismatch(format!(
                "design has {} rows, targets have {}",
                h.nrows(),
                y.nrows()
            )));
        }
        Self::new(h.transpose() * h, h.transpose() * y)
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn cross(&self) -> &Matrix {
        &self.cross
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Cached eigendecomposition of the Gram matrix.
    pub fn eig(&self) -> Result<&EigenDecomp> {
        self.eig
            .get_or_init(|| EigenDecomp::of_psd(&self.gram))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn rank(&self) -> Result<usize> {
        Ok(self.eig()?.rank())
    }

    /// `(HᵀH)⁻¹`, or `SingularGram` when `λ_n ≤ 1e-12·λ₁`.
    pub fn gram_inverse(&self) -> Result<Matrix> {
        let eig = self.eig()?;
        let (hi, lo) = (eig.lambda_max(), eig.lambda_min());
        if hi <= 0.0 || lo <= SINGULAR_GRAM * hi {
            return Err(RegError::SingularGram {
                min_eig: lo,
                max_eig: hi,
            });
        }
        let inv: Vec<f64> = eig.values.iter().map(|v| 1.0 / v).collect();
        Ok(linalg::from_eigenbasis(&eig.vectors, &inv))
    }

    /// `(HᵀH)†` with the rcond cutoff.
    pub fn gram_pinv(&self) -> Result<Matrix> {
        let eig = self.eig()?;
        let n = self.dim();
        let cutoff = linalg::rcond_cutoff(n, n, eig.lambda_max());
        let inv: Vec<f64> = eig
            .values
            .iter()
            .map(|&v| if v > cutoff && v > 0.0 { 1.0 / v } else { 0.0 })
            .collect();
        Ok(linalg::from_eigenbasis(&eig.vectors, &inv))
    }

    /// Condition number of the Gram matrix itself (infinite when singular).
    pub fn gram_cond(&self) -> Result<f64> {
        let eig = self.eig()?;
        if eig.lambda_min() <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(eig.lambda_max() / eig.lambda_min())
    }
}

/// Rule for building the regularization matrix `R`.
#[derive(Debug, Clone, PartialEq)]
pub enum RegStrategy {
    /// `R = μ̄ I`.
    Scalar(f64),
    /// `λ_{R,i} = max(μ̄ − λ_i, 0)` in the Gram eigenbasis.
    EigShiftClamp(f64),
    /// `λ_{R,i} = μ̄ − λ_i`, requires `μ̄ > λ₁`; makes `HᵀH + R = μ̄ I`.
    EigComplement(f64),
    /// `R⁻¹ = (HᵀH)† + Σ_{n−k} + μ I`; `tail` fills the `n − k` null directions.
    ResidualTarget { mu: f64, tail: Vec<f64> },
    /// A user supplied symmetric positive semidefinite matrix.
    Custom(Matrix),
}

impl RegStrategy {
    /// Whether the materialized matrix is diagonal in the Gram eigenbasis.
    pub fn is_eigenbasis(&self) -> bool {
        !matches!(self, RegStrategy::Custom(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HrMode {
    /// `F(R) = R (HᵀH + R)⁻¹`.
    #[default]
    Standard,
    /// `F(R) = HᵀH (HᵀH + R)⁻¹`.
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrConfig {
    /// Regularization order `c`.
    pub order: usize,
    pub mode: HrMode,
    /// `ρ(F)` must stay strictly below this value when enforced.
    pub spectral_tolerance: f64,
    pub enforce_spectral: bool,
}

impl Default for HrConfig {
    fn default() -> Self {
        Self {
            order: 1,
            mode: HrMode::Standard,
            spectral_tolerance: 1.0 - 1e-9,
            enforce_spectral: true,
        }
    }
}

impl HrConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn swapped(order: usize) -> Self {
        Self {
            order,
            mode: HrMode::Swapped,
            ..Self::default()
        }
    }
}

/// Diagnostics attached to an HR solve. Quantities that are undefined for a
/// given mode or problem (for example the error bounds in swapped mode) are `NaN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrDiagnostics {
    pub spectral_radius: f64,
    pub cond: f64,
    pub residual_norm: f64,
    pub err_lower: f64,
    pub err_upper: f64,
    pub objective: f64,
}

/// Everything derived from `(problem, R, mode)` that the operations share.
struct Prepared {
    sum: Cholesky<f64, nalgebra::Dyn>,
    sum_min: f64,
    sum_max: f64,
    factor: Matrix,
    /// Eigenvalues of `F` in the Gram eigenbasis when `R` commutes with `HᵀH`.
    factor_spectrum: Option<Vec<f64>>,
    radius: f64,
}

fn check_square(problem: &RegProblem, r: &Matrix) -> Result<()> {
    let n = problem.dim();
    if r.nrows() != n || r.ncols() != n {
        return Err(RegError::DimensionMismatch(format!(
            "R is {}x{}, gram is {n}x{n}",
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(())
}

/// Diagonal of `PᵀRP` when `R` is diagonal in the Gram eigenbasis.
fn spectrum_in_gram_basis(problem: &RegProblem, r: &Matrix) -> Result<Option<Vec<f64>>> {
    let eig = problem.eig()?;
    let rotated = eig.vectors.transpose() * r * &eig.vectors;
    let n = rotated.nrows();
    let scale = rotated.norm().max(f64::MIN_POSITIVE);
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += rotated[(i, j)] * rotated[(i, j)];
            }
        }
    }
    if off.sqrt() > COMMUTE_TOLERANCE * scale {
        return Ok(None);
    }
    Ok(Some((0..n).map(|i| rotated[(i, i)]).collect()))
}

fn power_radius(f: &Matrix) -> f64 {
    let n = f.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = f * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - estimate).abs() <= POWER_TOLERANCE * norm.max(1.0) {
            return norm;
        }
        estimate = norm;
    }
    estimate
}

fn prepare(problem: &RegProblem, r: &Matrix, config: &HrConfig) -> Result<Prepared> {
    check_square(problem, r)?;
    let r = linalg::symmetrize(r);
    let sum = linalg::symmetrize(&(problem.gram() + &r));
    let sum_eigs = linalg::sym_eigenvalues(&sum);
    let sum_max = sum_eigs.first().copied().unwrap_or(0.0);
    let sum_min = sum_eigs.last().copied().unwrap_or(0.0);
    if sum_max <= 0.0 || sum_min <= SINGULAR_SUM * sum_max {
        return Err(RegError::SingularSum {
            min_eig: sum_min,
            max_eig: sum_max,
        });
    }
    let chol = Cholesky::new(sum).ok_or(RegError::SingularSum {
        min_eig: sum_min,
        max_eig: sum_max,
    })?;

    let r_spectrum = spectrum_in_gram_basis(problem, &r)?;
    if config.mode == HrMode::Swapped {
        let r_min = match &r_spectrum {
            Some(s) => s.iter().copied().fold(f64::INFINITY, f64::min),
            None => linalg::sym_eigenvalues(&r).last().copied().unwrap_or(0.0),
        };
        if !(r_min > 0.0) {
            return Err(RegError::NotPositiveDefinite { min_eig: r_min });
        }
    }

    // F = N (HᵀH + R)⁻¹ = ((HᵀH + R)⁻¹ N)ᵀ for symmetric N.
    let numerator = match config.mode {
        HrMode::Standard => r,
        HrMode::Swapped => problem.gram().clone(),
    };
    let factor = chol.solve(&numerator).transpose();

    let factor_spectrum = r_spectrum.map(|rs| {
        let lambdas = &problem.eig().expect("checked above").values;
        lambdas
            .iter()
            .zip(rs.iter())
            .map(|(&l, &rv)| {
                let num = match config.mode {
                    HrMode::Standard => rv,
                    HrMode::Swapped => l,
                };
                num / (l + rv)
            })
            .collect::<Vec<_>>()
    });
    let radius = match &factor_spectrum {
        Some(s) => s.iter().fold(0.0_f64, |a, &v| a.max(v.abs())),
        None => power_radius(&factor),
    };
    Ok(Prepared {
        sum: chol,
        sum_min,
        sum_max,
        factor,
        factor_spectrum,
        radius,
    })
}

impl Prepared {
    fn check_radius(&self, config: &HrConfig) -> Result<()> {
        if config.enforce_spectral && !(self.radius < config.spectral_tolerance) {
            return Err(RegError::SpectralViolation {
                radius: self.radius,
                tolerance: config.spectral_tolerance,
            });
        }
        Ok(())
    }

    /// `Σ_{i=0}^{c} Fⁱ` by Horner accumulation `S ← F S + I`.
    fn series(&self, order: usize) -> Matrix {
        let n = self.factor.nrows();
        let identity = Matrix::identity(n, n);
        let mut s = identity.clone();
        for _ in 0..order {
            s = &self.factor * s + &identity;
        }
        s
    }

    fn approx_inverse(&self, order: usize) -> Matrix {
        self.sum.solve(&self.series(order))
    }

    /// `(HᵀH + R)⁻¹ Σ Fⁱ X` with Horner on the right-hand side `v ← F v + X`.
    fn apply(&self, x: &Matrix, order: usize) -> Matrix {
        let mut v = x.clone();
        for _ in 0..order {
            v = &self.factor * v + x;
        }
        self.sum.solve(&v)
    }

    fn cond(&self) -> f64 {
        self.sum_max / self.sum_min
    }

    /// Extreme eigenvalues of `F`; uses the symmetric similarity
    /// `L⁻¹ N L⁻ᵀ` (with `HᵀH + R = LLᵀ`) when `R` does not commute with `HᵀH`.
    fn factor_extremes(&self, problem: &RegProblem, r: &Matrix, mode: HrMode) -> (f64, f64) {
        if let Some(s) = &self.factor_spectrum {
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            return (lo, hi);
        }
        let numerator = match mode {
            HrMode::Standard => linalg::symmetrize(r),
            HrMode::Swapped => problem.gram().clone(),
        };
        let l = self.sum.l();
        let left = l
            .solve_lower_triangular(&numerator)
            .expect("Cholesky factor is nonsingular");
        let sim = l
            .solve_lower_triangular(&left.transpose())
            .expect("Cholesky factor is nonsingular");
        let vals = linalg::sym_eigenvalues(&sim);
        (*vals.last().unwrap(), vals[0])
    }

    fn residual(&self, problem: &RegProblem, order: usize, mode: HrMode) -> Result<Matrix> {
        match mode {
            HrMode::Standard => {
                let mut out = problem.gram_inverse()?;
                for _ in 0..=order {
                    out *= &self.factor;
                }
                Ok(out)
            }
            HrMode::Swapped => Ok(problem.gram_pinv()? - self.approx_inverse(order)),
        }
    }
}

/// Regularization factor `F(R)` for the configured mode.
pub fn reg_factor(problem: &RegProblem, r: &Matrix, config: &HrConfig) -> Result<Matrix> {
    let prep = prepare(problem, r, config)?;
    prep.check_radius(config)?;
    Ok(prep.factor)
}

/// Spectral radius `ρ(F(R))`: exact in the Gram eigenbasis when `R` commutes
/// with `HᵀH`, otherwise a 50-step power iteration.
pub fn spectral_radius(problem: &RegProblem, r: &Matrix, config: &HrConfig) -> Result<f64> {
    Ok(prepare(problem, r, config)?.radius)
}

/// Materializes the regularization matrix for `problem`.
pub fn materialize(strategy: &RegStrategy, problem: &RegProblem) -> Result<Matrix> {
    let n = problem.dim();
    let check_nonneg = |name: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(RegError::InvalidStrategy(format!(
                "{name} must be a finite nonnegative number, got {v}"
            )))
        }
    };
    match strategy {
        RegStrategy::Scalar(mu_bar) => {
            check_nonneg("μ̄", *mu_bar)?;
            Ok(Matrix::identity(n, n) * *mu_bar)
        }
        RegStrategy::EigShiftClamp(mu_bar) => {
            check_nonneg("μ̄", *mu_bar)?;
            let eig = problem.eig()?;
            let vals: Vec<f64> = eig.values.iter().map(|l| (mu_bar - l).max(0.0)).collect();
            Ok(linalg::from_eigenbasis(&eig.vectors, &vals))
        }
        RegStrategy::EigComplement(mu_bar) => {
            check_nonneg("μ̄", *mu_bar)?;
            let eig = problem.eig()?;
            if !(*mu_bar > eig.lambda_max()) {
                return Err(RegError::InvalidStrategy(format!(
                    "complement strategy needs μ̄ > λ₁ = {}, got {mu_bar}",
                    eig.lambda_max()
                )));
            }
            let vals: Vec<f64> = eig.values.iter().map(|l| mu_bar - l).collect();
            Ok(linalg::from_eigenbasis(&eig.vectors, &vals))
        }
        RegStrategy::ResidualTarget { mu, tail } => {
            check_nonneg("μ", *mu)?;
            for &t in tail {
                check_nonneg("tail entry", t)?;
            }
            let eig = problem.eig()?;
            let rank = eig.rank();
            if tail.len() != n - rank {
                return Err(RegError::InvalidStrategy(format!(
                    "tail must have n − rank = {} entries, got {}",
                    n - rank,
                    tail.len()
                )));
            }
            if rank < n && !(*mu > 0.0) {
                return Err(RegError::InvalidStrategy(
                    "residual target needs μ > 0 on a rank-deficient gram".into(),
                ));
            }
            let mut vals = Vec::with_capacity(n);
            for (i, &l) in eig.values.iter().enumerate() {
                let inv = if i < rank {
                    1.0 / l + mu
                } else {
                    tail[i - rank] + mu
                };
                if !(inv > 0.0) {
                    return Err(RegError::InvalidStrategy(
                        "R⁻¹ has a zero eigenvalue; raise μ or the tail".into(),
                    ));
                }
                vals.push(1.0 / inv);
            }
            Ok(linalg::from_eigenbasis(&eig.vectors, &vals))
        }
        RegStrategy::Custom(m) => {
            check_square(problem, m)?;
            let sym = linalg::symmetrize(m);
            let vals = linalg::sym_eigenvalues(&sym);
            let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let min = vals.last().copied().unwrap_or(0.0);
            if min < -PSD_CLAMP * scale {
                return Err(RegError::NonPsd { min_eig: min });
            }
            Ok(sym)
        }
    }
}

/// `F_aim = (HᵀH + R)⁻¹ Σ_{i=0}^{c} Fⁱ(R)`, the approximate (generalized) inverse of `HᵀH`.
pub fn approx_inverse_map(problem: &RegProblem, r: &Matrix, config: &HrConfig) -> Result<Matrix> {
    let prep = prepare(problem, r, config)?;
    prep.check_radius(config)?;
    Ok(prep.approx_inverse(config.order))
}

/// Approximation residual of the inverse.
///
/// Standard mode: `(HᵀH)⁻¹ F^{c+1}(R)`. Swapped mode: `(HᵀH)† − F_aim`.
pub fn approx_residual(problem: &RegProblem, r: &Matrix, config: &HrConfig) -> Result<Matrix> {
    let prep = prepare(problem, r, config)?;
    prep.check_radius(config)?;
    prep.residual(problem, config.order, config.mode)
}

/// Lower and upper bounds on `‖β̂ − β_opt‖` (Frobenius norm over columns).
///
/// The bracket is guaranteed when `R` is diagonal in the Gram eigenbasis.
/// For other `R` the factor is not normal and the values are only estimates.
pub fn error_bounds(problem: &RegProblem, r: &Matrix, config: &HrConfig) -> Result<(f64, f64)> {
    if config.mode != HrMode::Standard {
        return Err(RegError::StandardModeOnly("error_bounds"));
    }
    problem.gram_inverse()?;
    let prep = prepare(problem, r, config)?;
    error_bounds_prepared(&prep, problem, r, config)
}

fn error_bounds_prepared(
    prep: &Prepared,
    problem: &RegProblem,
    r: &Matrix,
    config: &HrConfig,
) -> Result<(f64, f64)> {
    let (f_min, f_max) = prep.factor_extremes(problem, r, config.mode);
    if !(f_max < 1.0) {
        return Err(RegError::SpectralViolation {
            radius: f_max,
            tolerance: 1.0,
        });
    }
    let mut v = problem.cross().clone();
    for _ in 0..=config.order {
        v = &prep.factor * v;
    }
    let numerator = prep.sum.solve(&v).norm();
    Ok((numerator / (1.0 - f_min), numerator / (1.0 - f_max)))
}

/// `Cond(R) = λ_max(HᵀH + R) / λ_min(HᵀH + R)`.
pub fn cond_number(problem: &RegProblem, r: &Matrix) -> Result<f64> {
    check_square(problem, r)?;
    let sum = linalg::symmetrize(&(problem.gram() + r));
    let vals = linalg::sym_eigenvalues(&sum);
    let (hi, lo) = (vals[0], *vals.last().unwrap());
    if hi <= 0.0 || lo <= SINGULAR_SUM * hi {
        return Err(RegError::SingularSum {
            min_eig: lo,
            max_eig: hi,
        });
    }
    Ok(hi / lo)
}

/// `Obj(R) = ‖F_ar(R)‖₂ · Cond(R)`.
pub fn objective(problem: &RegProblem, r: &Matrix, config: &HrConfig) -> Result<f64> {
    let prep = prepare(problem, r, config)?;
    prep.check_radius(config)?;
    let residual = prep.residual(problem, config.order, config.mode)?;
    Ok(linalg::spectral_norm(&residual) * prep.cond())
}

/// HR estimate for an already materialized `R`.
pub fn hr_solve_with(
    problem: &RegProblem,
    r: &Matrix,
    config: &HrConfig,
) -> Result<(Matrix, HrDiagnostics)> {
    let prep = prepare(problem, r, config)?;
    prep.check_radius(config)?;
    let beta = prep.apply(problem.cross(), config.order);

    let cond = prep.cond();
    let residual_norm = prep
        .residual(problem, config.order, config.mode)
        .map(|m| linalg::spectral_norm(&m))
        .unwrap_or(f64::NAN);
    let (err_lower, err_upper) =
        if config.mode == HrMode::Standard && problem.gram_inverse().is_ok() {
            error_bounds_prepared(&prep, problem, r, config).unwrap_or((f64::NAN, f64::NAN))
        } else {
            (f64::NAN, f64::NAN)
        };
    let diag = HrDiagnostics {
        spectral_radius: prep.radius,
        cond,
        residual_norm,
        err_lower,
        err_upper,
        objective: residual_norm * cond,
    };
    Ok((beta, diag))
}

/// HR estimate `β̂ = (HᵀH + R)⁻¹ Σ_{i=0}^{c} Fⁱ(R) HᵀY` for a strategy.
pub fn hr_solve(
    problem: &RegProblem,
    strategy: &RegStrategy,
    config: &HrConfig,
) -> Result<(Matrix, HrDiagnostics)> {
    let r = materialize(strategy, problem)?;
    hr_solve_with(problem, &r, config)
}

/// A one-parameter family of strategies indexed by `μ̄`, for sweeps.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyFamily {
    /// `R = μ̄ I`.
    Scalar,
    /// `λ_{R,i} = max(μ̄ − λ_i, 0)`.
    EigShiftClamp,
    /// `λ_{R,i} = μ̄ − λ_i` (infeasible for `μ̄ ≤ λ₁`).
    EigComplement,
    /// `λ_{R,i} = λ₁ − λ_i + μ̄`.
    SpectrumOffset,
    /// `R⁻¹ = (HᵀH)† + Σ_{n−k} + I/μ̄`.
    ResidualTarget { tail: Vec<f64> },
}

impl StrategyFamily {
    pub fn label(&self) -> &'static str {
        match self {
            StrategyFamily::Scalar => "scalar",
            StrategyFamily::EigShiftClamp => "shift-clamp",
            StrategyFamily::EigComplement => "complement",
            StrategyFamily::SpectrumOffset => "offset",
            StrategyFamily::ResidualTarget { .. } => "residual-target",
        }
    }

    pub fn at(&self, mu_bar: f64, problem: &RegProblem) -> Result<RegStrategy> {
        Ok(match self {
            StrategyFamily::Scalar => RegStrategy::Scalar(mu_bar),
            StrategyFamily::EigShiftClamp => RegStrategy::EigShiftClamp(mu_bar),
            StrategyFamily::EigComplement => RegStrategy::EigComplement(mu_bar),
            StrategyFamily::SpectrumOffset => {
                RegStrategy::EigComplement(problem.eig()?.lambda_max() + mu_bar)
            }
            StrategyFamily::ResidualTarget { tail } => RegStrategy::ResidualTarget {
                mu: 1.0 / mu_bar,
                tail: tail.clone(),
            },
        })
    }
}

impl fmt::Display for StrategyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub strategy: String,
    pub order: usize,
    pub mu_bar: f64,
    pub objective: f64,
    pub cond: f64,
    pub residual_norm: f64,
    pub feasible: bool,
}

/// Evaluates `Obj`, `Cond` and `‖F_ar‖₂` for every (strategy, order, μ̄)
/// combination, in that nesting order. Infeasible combinations produce a
/// row with `feasible = false` and `NaN` values.
pub fn sweep_objective(
    problem: &RegProblem,
    strategies: &[StrategyFamily],
    orders: &[usize],
    grid: &[f64],
    mode: HrMode,
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(strategies.len() * orders.len() * grid.len());
    for family in strategies {
        for &order in orders {
            let config = HrConfig {
                order,
                mode,
                ..HrConfig::default()
            };
            for &mu_bar in grid {
                let evaluated = family
                    .at(mu_bar, problem)
                    .and_then(|s| materialize(&s, problem))
                    .and_then(|r| {
                        let prep = prepare(problem, &r, &config)?;
                        prep.check_radius(&config)?;
                        let res = linalg::spectral_norm(&prep.residual(problem, order, mode)?);
                        Ok((res * prep.cond(), prep.cond(), res))
                    });
                let (objective, cond, residual_norm, feasible) = match evaluated {
                    Ok((o, c, r)) if o.is_finite() && c.is_finite() => (o, c, r, true),
                    _ => (f64::NAN, f64::NAN, f64::NAN, false),
                };
                rows.push(SweepRow {
                    strategy: family.label().to_string(),
                    order,
                    mu_bar,
                    objective,
                    cond,
                    residual_norm,
                    feasible,
                });
            }
        }
    }
    rows
}
