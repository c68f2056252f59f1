//! Extreme learning machine (ELM): a single hidden layer with fixed random
//! input weights, whose output weights `β` are solved analytically.
//!
//! Besides batch training (pseudo-inverse, HR) this module carries the
//! incremental recursions: the regularized incremental ELM, the incremental
//! HR update with optional bias correction, and the EQLM-style approximate
//! update that starts from an HR initialization.

use std::io::{self, Read, Write};

use nalgebra::DVector;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::regcore::{self, HrConfig, HrDiagnostics, HrMode, RegError, RegProblem, RegStrategy};

/// Bias correction starts once the accumulated Gram matrix has `Cond < BIAS_COND_LIMIT`.
pub const BIAS_COND_LIMIT: f64 = 1e6;
/// Residuals with spectral norm below this are treated as zero.
pub const NEGLIGIBLE_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ElmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Reg(#[from] RegError),
    #[error("inner {0}x{0} solve failed; the minibatch is numerically degenerate")]
    InnerSolve(usize),
    #[error("previous inverse approximation is singular; re-initialize the state")]
    SingularApproximation,
    #[error("accumulated Gram matrix is ill-conditioned (Cond = {cond:e})")]
    IllConditioned { cond: f64 },
    #[error("model I/O: {0}")]
    Io(#[from] io::Error),
    #[error("malformed model file: {0}")]
    Format(String),
}

pub type Result<T, E = ElmError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Activation {
    #[default]
    LogisticSigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LogisticSigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::LogisticSigmoid => 0,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::LogisticSigmoid),
            _ => None,
        }
    }
}

/// Inputs `X` (N×d) and targets `Y` (N×k).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(ElmError::DimensionMismatch(format!(
                "{} input rows vs {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacks batches vertically.
    pub fn concat(batches: &[Batch]) -> Result<Self> {
        let first = batches
            .first()
            .ok_or_else(|| ElmError::InvalidArgument("no batches to concatenate".into()))?;
        let (d, k) = (first.inputs.ncols(), first.targets.ncols());
        let rows: usize = batches.iter().map(Batch::len).sum();
        let mut inputs = Matrix::zeros(rows, d);
        let mut targets = Matrix::zeros(rows, k);
        let mut at = 0;
        for b in batches {
            if b.inputs.ncols() != d || b.targets.ncols() != k {
                return Err(ElmError::DimensionMismatch(
                    "batch column counts differ".into(),
                ));
            }
            inputs.rows_mut(at, b.len()).copy_from(&b.inputs);
            targets.rows_mut(at, b.len()).copy_from(&b.targets);
            at += b.len();
        }
        Self::new(inputs, targets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    /// L×d, fixed after initialization.
    input_weights: Matrix,
    /// Length L, fixed after initialization.
    bias: DVector<f64>,
    activation: Activation,
    seed: u64,
    /// L×k output weights β.
    pub output_weights: Matrix,
}

impl ElmModel {
    /// Random hidden layer: weights ~ U(−1, 1), biases ~ U(0, 1), β = 0.
    pub fn new(
        d: usize,
        hidden: usize,
        k: usize,
        seed: u64,
        activation: Activation,
    ) -> Result<Self> {
        if d == 0 || hidden == 0 || k == 0 {
            return Err(ElmError::InvalidArgument(format!(
                "dimensions must be positive, got d={d}, L={hidden}, k={k}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight_dist = Uniform::new(-1.0, 1.0).expect("valid range");
        let bias_dist = Uniform::new(0.0, 1.0).expect("valid range");
        let input_weights = Matrix::from_row_iterator(
            hidden,
            d,
            (0..hidden * d).map(|_| weight_dist.sample(&mut rng)),
        );
        let bias = DVector::from_iterator(hidden, (0..hidden).map(|_| bias_dist.sample(&mut rng)));
        Ok(Self {
            input_weights,
            bias,
            activation,
            seed,
            output_weights: Matrix::zeros(hidden, k),
        })
    }

    /// Builds a model from explicit parameters.
    pub fn from_parts(
        input_weights: Matrix,
        bias: DVector<f64>,
        output_weights: Matrix,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if bias.len() != input_weights.nrows() || output_weights.nrows() != input_weights.nrows() {
            return Err(ElmError::DimensionMismatch(
                "weights, bias and β must share the hidden size".into(),
            ));
        }
        Ok(Self {
            input_weights,
            bias,
            activation,
            seed,
            output_weights,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.output_weights.ncols()
    }

    pub fn input_weights(&self) -> &Matrix {
        &self.input_weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `H[j, i] = g(w_i · x_j + b_i)`.
    pub fn hidden_matrix(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.ncols() != self.input_dim() {
            return Err(ElmError::DimensionMismatch(format!(
                "inputs have {} columns, model expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let mut h = inputs * self.input_weights.transpose();
        for mut row in h.row_iter_mut() {
            for (i, v) in row.iter_mut().enumerate() {
                *v = self.activation.apply(*v + self.bias[i]);
            }
        }
        Ok(h)
    }

    /// Hidden activations for a single input vector.
    pub fn hidden_row(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(ElmError::DimensionMismatch(format!(
                "input has {} entries, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let x = DVector::from_column_slice(x);
        let mut z = &self.input_weights * x + &self.bias;
        z.apply(|v| *v = self.activation.apply(*v));
        Ok(z)
    }

    /// `H(inputs) · β`.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        Ok(self.hidden_matrix(inputs)? * &self.output_weights)
    }

    /// Output row for one input, using the given output weights.
    pub fn predict_one_with(&self, x: &[f64], beta: &Matrix) -> Result<DVector<f64>> {
        Ok(beta.transpose() * self.hidden_row(x)?)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.predict_one_with(x, &self.output_weights)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.targets.ncols() != self.output_dim() {
            return Err(ElmError::DimensionMismatch(format!(
                "targets have {} columns, model has {} outputs",
                batch.targets.ncols(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// `β = H† Y`, the minimum-norm least-squares solution.
    pub fn train_pinv(&self, batch: &Batch) -> Result<Self> {
        self.check_batch(batch)?;
        let h = self.hidden_matrix(&batch.inputs)?;
        let mut out = self.clone();
        out.output_weights = linalg::pinv(&h) * &batch.targets;
        Ok(out)
    }

    /// `β` from the HR estimator on `(HᵀH, HᵀY)`.
    pub fn train_hr(
        &self,
        batch: &Batch,
        strategy: &RegStrategy,
        config: &HrConfig,
    ) -> Result<(Self, HrDiagnostics)> {
        self.check_batch(batch)?;
        let h = self.hidden_matrix(&batch.inputs)?;
        let problem = RegProblem::from_design(&h, &batch.targets)?;
        let (beta, diag) = regcore::hr_solve(&problem, strategy, config)?;
        let mut out = self.clone();
        out.output_weights = beta;
        Ok((out, diag))
    }

    /// Writes the binary container described in `docs/model-format.md`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for dim in [self.input_dim(), self.hidden(), self.output_dim()] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        w.write_all(&[self.activation.tag()])?;
        w.write_all(&self.seed.to_le_bytes())?;
        let row_major = |m: &Matrix| -> Vec<f64> {
            (0..m.nrows())
                .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
                .map(|(r, c)| m[(r, c)])
                .collect()
        };
        let values = row_major(&self.input_weights)
            .into_iter()
            .chain(self.bias.iter().copied())
            .chain(row_major(&self.output_weights));
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ElmError::Format("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FORMAT_VERSION {
            return Err(ElmError::Format(format!("unsupported version {version}")));
        }
        let mut u64buf = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let d = next_u64(&mut r)? as usize;
        let hidden = next_u64(&mut r)? as usize;
        let k = next_u64(&mut r)? as usize;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let activation = Activation::from_tag(tag[0])
            .ok_or_else(|| ElmError::Format(format!("unknown activation tag {}", tag[0])))?;
        let seed = next_u64(&mut r)?;
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            let mut buf = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let weights = Matrix::from_row_slice(hidden, d, &read_f64s(hidden * d)?);
        let bias = DVector::from_vec(read_f64s(hidden)?);
        let beta = Matrix::from_row_slice(hidden, k, &read_f64s(hidden * k)?);
        Self::from_parts(weights, bias, beta, activation, seed)
    }
}

const MAGIC: &[u8; 4] = b"HELM";
const FORMAT_VERSION: u32 = 1;

/// Incremental training state.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// `A = HᵀH (accumulated) + R`.
    pub info: Matrix,
    /// Inverse approximation driving the next update: `A⁻¹` for the
    /// incremental ELM, `F_aim` for the HR recursions.
    pub info_inv_approx: Matrix,
    pub beta: Matrix,
    /// Bias accumulator `Δβ`; `beta + bias_acc` is the corrected estimate.
    pub bias_acc: Matrix,
    pub step: usize,
    /// Materialized regularization matrix.
    pub reg: Matrix,
    pub config: HrConfig,
    /// Accumulated `HᵀH` and `HᵀY`.
    pub gram: Matrix,
    pub cross: Matrix,
    prev_gram: Option<Matrix>,
    bias_active: bool,
}

impl TrainState {
    /// Output weights with the bias correction applied.
    pub fn corrected_beta(&self) -> Matrix {
        &self.beta + &self.bias_acc
    }

    pub fn bias_active(&self) -> bool {
        self.bias_active
    }

    fn problem(&self) -> Result<RegProblem> {
        Ok(RegProblem::new(self.gram.clone(), self.cross.clone())?)
    }

    fn accumulate(&mut self, h: &Matrix, y: &Matrix) {
        let gram_ic = h.transpose() * h;
        self.prev_gram = Some(self.gram.clone());
        self.gram = linalg::symmetrize(&(&self.gram + &gram_ic));
        self.cross += h.transpose() * y;
        self.info = linalg::symmetrize(&(&self.info + gram_ic));
    }

    /// Recursion `K = I − P Hᵀ (H P Hᵀ + I)⁻¹ H`, `β ← Kβ + K P HᵀY`, `P ← K P`.
    fn rank_update(&mut self, h: &Matrix, y: &Matrix) -> Result<()> {
        let n = h.nrows();
        let l = self.info_inv_approx.nrows();
        let p_ht = &self.info_inv_approx * h.transpose();
        let inner = h * &p_ht + Matrix::identity(n, n);
        let lu = inner.lu();
        let gain_t = lu.solve(h).ok_or(ElmError::InnerSolve(n))?;
        let k = Matrix::identity(l, l) - &p_ht * gain_t;
        if !k.iter().all(|v| v.is_finite()) {
            return Err(ElmError::InnerSolve(n));
        }
        let kp = &k * &self.info_inv_approx;
        self.beta = &k * &self.beta + &kp * (h.transpose() * y);
        self.info_inv_approx = linalg::symmetrize(&kp);
        self.accumulate(h, y);
        self.step += 1;
        Ok(())
    }
}

fn hidden_and_targets(model: &ElmModel, batch: &Batch) -> Result<(Matrix, Matrix)> {
    model.check_batch(batch)?;
    Ok((model.hidden_matrix(&batch.inputs)?, batch.targets.clone()))
}

/// Regularized incremental ELM start: `A₁ = HᵀH + I/μ`, `β = A₁⁻¹ HᵀY`.
pub fn ielm_init(model: &ElmModel, batch: &Batch, mu: f64) -> Result<TrainState> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(ElmError::InvalidArgument(format!(
            "μ must be positive and finite, got {mu}"
        )));
    }
    let (h, y) = hidden_and_targets(model, batch)?;
    let l = model.hidden();
    let gram = linalg::symmetrize(&(h.transpose() * &h));
    let cross = h.transpose() * &y;
    let reg = Matrix::identity(l, l) / mu;
    let info = linalg::symmetrize(&(&gram + &reg));
    let chol = nalgebra::Cholesky::new(info.clone()).ok_or(RegError::SingularSum {
        min_eig: f64::NAN,
        max_eig: f64::NAN,
    })?;
    let inv = linalg::symmetrize(&chol.inverse());
    let beta = chol.solve(&cross);
    Ok(TrainState {
        info,
        info_inv_approx: inv,
        beta,
        bias_acc: Matrix::zeros(l, y.ncols()),
        step: 1,
        reg,
        config: HrConfig::with_order(0),
        gram,
        cross,
        prev_gram: None,
        bias_active: false,
    })
}

/// Incremental ELM update with a new minibatch.
pub fn ielm_update(state: &mut TrainState, model: &ElmModel, batch: &Batch) -> Result<()> {
    let (h, y) = hidden_and_targets(model, batch)?;
    state.rank_update(&h, &y)
}

/// Incremental HR start.
///
/// The mode is routed from the first minibatch: swapped when `rank(HᵀH) < L`,
/// standard otherwise; `config.mode` is overridden accordingly.
pub fn ihr_init(
    model: &ElmModel,
    batch: &Batch,
    strategy: &RegStrategy,
    config: &HrConfig,
) -> Result<TrainState> {
    let (h, y) = hidden_and_targets(model, batch)?;
    let problem = RegProblem::from_design(&h, &y)?;
    let mode = if problem.rank()? < problem.dim() {
        HrMode::Swapped
    } else {
        HrMode::Standard
    };
    let config = HrConfig { mode, ..*config };
    let reg = regcore::materialize(strategy, &problem)?;
    let f_aim = regcore::approx_inverse_map(&problem, &reg, &config)?;
    let beta = &f_aim * problem.cross();
    let mut state = TrainState {
        info: linalg::symmetrize(&(problem.gram() + &reg)),
        info_inv_approx: f_aim,
        beta,
        bias_acc: Matrix::zeros(model.hidden(), y.ncols()),
        step: 1,
        reg,
        config,
        gram: problem.gram().clone(),
        cross: problem.cross().clone(),
        prev_gram: None,
        bias_active: false,
    };
    if problem.gram_cond()? < BIAS_COND_LIMIT {
        let residual = bias_residual(&problem, &state.reg, &state.config)?;
        state.bias_acc = &residual * problem.cross();
        state.bias_active = true;
    }
    Ok(state)
}

/// Incremental HR update: `β ← K(c) β + F_aim,t+1 H_icᵀ Y_ic` with
/// `K(c) = F_aim,t+1 F_aim,t⁻¹`, where `F(R)` is rebuilt from the accumulated
/// Gram matrix.
pub fn ihr_update(state: &mut TrainState, model: &ElmModel, batch: &Batch) -> Result<()> {
    let (h, y) = hidden_and_targets(model, batch)?;
    let prev_lu = state.info_inv_approx.clone().lu();
    let restored = prev_lu
        .solve(&state.beta)
        .ok_or(ElmError::SingularApproximation)?;
    if !restored.iter().all(|v| v.is_finite()) {
        return Err(ElmError::SingularApproximation);
    }
    let mut next = state.clone();
    next.accumulate(&h, &y);
    let problem = next.problem()?;
    let f_aim = regcore::approx_inverse_map(&problem, &next.reg, &next.config)?;
    next.beta = &f_aim * (restored + h.transpose() * &y);
    next.info_inv_approx = f_aim;
    next.step += 1;
    *state = next;
    Ok(())
}

fn bias_residual(problem: &RegProblem, reg: &Matrix, config: &HrConfig) -> Result<Matrix> {
    match config.mode {
        HrMode::Standard => Ok(regcore::approx_residual(problem, reg, config)?),
        HrMode::Swapped => {
            let f_aim = regcore::approx_inverse_map(problem, reg, config)?;
            Ok(problem.gram_inverse()? - f_aim)
        }
    }
}

/// Bias-correction recursion `Δβ ← K_ar Δβ + F_ar,t+1 H_icᵀ Y_ic`,
/// `K_ar = F_ar,t+1 F_ar,t⁻¹`.
///
/// Call after [`ihr_update`] with the same minibatch. Fails with
/// `IllConditioned` (leaving the state untouched) while the accumulated Gram
/// matrix has `Cond ≥ 1e6`; the first well-conditioned call seeds `Δβ`
/// directly from the accumulated data.
pub fn bias_correct(state: &mut TrainState, model: &ElmModel, batch: &Batch) -> Result<()> {
    let (h, y) = hidden_and_targets(model, batch)?;
    let problem = state.problem()?;
    let cond = problem.gram_cond()?;
    if !(cond < BIAS_COND_LIMIT) {
        return Err(ElmError::IllConditioned { cond });
    }
    let residual = bias_residual(&problem, &state.reg, &state.config)?;
    if linalg::spectral_norm(&residual) < NEGLIGIBLE_RESIDUAL {
        return Ok(());
    }
    let prev_residual = match (&state.prev_gram, state.bias_active) {
        (Some(prev), true) => {
            let prev_problem = RegProblem::new(prev.clone(), Matrix::zeros(prev.nrows(), 1))?;
            Some(bias_residual(&prev_problem, &state.reg, &state.config)?)
        }
        _ => None,
    };
    match prev_residual {
        Some(prev) => {
            let restored = prev
                .lu()
                .solve(&state.bias_acc)
                .ok_or(ElmError::SingularApproximation)?;
            state.bias_acc = &residual * (restored + h.transpose() * &y);
        }
        None => {
            state.bias_acc = &residual * problem.cross();
            state.bias_active = true;
        }
    }
    Ok(())
}

/// Approximate update used after an HR initialization: the incremental-ELM
/// recursion driven by the stored inverse approximation.
pub fn eqlm_update(state: &mut TrainState, model: &ElmModel, batch: &Batch) -> Result<()> {
    let (h, y) = hidden_and_targets(model, batch)?;
    state.rank_update(&h, &y)
}
