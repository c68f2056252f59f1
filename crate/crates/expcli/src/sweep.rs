//! Objective sweeps over regularization strategies, orders and μ̄ grids.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hrelm::regcore::{sweep_objective, HrMode, RegProblem, StrategyFamily};
use hrelm::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::experiment::read_matrix;
use crate::{ExpError, Result};

pub const SWEEP_HEADER: [&str; 6] = [
    "strategy",
    "c",
    "mu_bar",
    "objective",
    "cond",
    "residual_norm",
];

/// Where the gram matrix comes from.
#[derive(Debug, Clone)]
pub enum ProblemSource {
    /// `HᵀH / rows` for a seeded standard-normal `rows × dim` design.
    Synthetic {
        dim: usize,
        rows: usize,
        seed: u64,
    },
    /// Headerless CSV gram, e.g. one saved by a training run.
    GramFile(PathBuf),
    Explicit(RegProblem),
}

impl ProblemSource {
    pub fn load(&self) -> Result<RegProblem> {
        match self {
            ProblemSource::Synthetic { dim, rows, seed } => {
                Ok(synthetic_problem(*dim, *rows, *seed)?)
            }
            ProblemSource::GramFile(path) => {
                let gram = read_matrix(path)?;
                let n = gram.nrows();
                RegProblem::new(gram, Matrix::zeros(n, 1))
                    .map_err(|e| ExpError::Config(format!("{}: {e}", path.display())))
            }
            ProblemSource::Explicit(p) => Ok(p.clone()),
        }
    }
}

/// Seeded synthetic problem with Gaussian design and targets.
pub fn synthetic_problem(dim: usize, rows: usize, seed: u64) -> Result<RegProblem> {
    if dim == 0 || rows == 0 {
        return Err(ExpError::Config(
            "synthetic problem needs dim ≥ 1 and rows ≥ 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = Matrix::from_fn(rows, dim, |_, _| StandardNormal.sample(&mut rng));
    let y = Matrix::from_fn(rows, 1, |_, _| StandardNormal.sample(&mut rng));
    let scale = 1.0 / rows as f64;
    Ok(RegProblem::new(
        (h.transpose() * &h) * scale,
        (h.transpose() * y) * scale,
    )?)
}

/// Parses a strategy family name.
pub fn parse_strategy(s: &str) -> Result<StrategyFamily> {
    match s.trim().to_ascii_lowercase().as_str() {
        "scalar" => Ok(StrategyFamily::Scalar),
        "shift-clamp" | "shift_clamp" | "eig-shift-clamp" => Ok(StrategyFamily::EigShiftClamp),
        "complement" | "eig-complement" => Ok(StrategyFamily::EigComplement),
        "offset" | "spectrum-offset" => Ok(StrategyFamily::SpectrumOffset),
        other => Err(ExpError::Config(format!(
            "unknown strategy {other:?} (expected scalar, shift-clamp, complement or offset)"
        ))),
    }
}

pub fn parse_mode(s: &str) -> Result<HrMode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "standard" => Ok(HrMode::Standard),
        "swapped" => Ok(HrMode::Swapped),
        other => Err(ExpError::Config(format!("unknown mode {other:?}"))),
    }
}

/// Parses `lo:hi:steps` into `steps` log-spaced points from `10^lo` to `10^hi`.
pub fn parse_grid_log(s: &str) -> Result<Vec<f64>> {
    let bad = || ExpError::Config(format!("grid {s:?}: expected lo:hi:steps"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err(bad());
    };
    let lo = f64::from_str(lo.trim()).map_err(|_| bad())?;
    let hi = f64::from_str(hi.trim()).map_err(|_| bad())?;
    let steps = usize::from_str(steps.trim()).map_err(|_| bad())?;
    Ok(log_grid(lo, hi, steps))
}

pub fn log_grid(lo_exp: f64, hi_exp: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo_exp)],
        _ => (0..steps)
            .map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (steps - 1) as f64))
            .collect(),
    }
}

/// Parses `0..5`, `0..=5` or a comma list into orders.
pub fn parse_orders(s: &str) -> Result<Vec<usize>> {
    let bad = || {
        ExpError::Config(format!(
            "orders {s:?}: expected a..b, a..=b or a comma list"
        ))
    };
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

/// Writes one CSV row per (strategy, order, μ̄) combination. Infeasible
/// combinations are written with `NaN` values.
pub fn emit_sweep(
    source: &ProblemSource,
    strategies: &[StrategyFamily],
    orders: &[usize],
    grid: &[f64],
    mode: HrMode,
    out: &Path,
) -> Result<usize> {
    let problem = source.load()?;
    let rows = sweep_objective(&problem, strategies, orders, grid, mode);
    let err = |source| ExpError::Csv {
        path: out.to_path_buf(),
        source,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ExpError::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(out).map_err(err)?;
    w.write_record(SWEEP_HEADER).map_err(err)?;
    for r in &rows {
        w.serialize((
            &r.strategy,
            r.order,
            r.mu_bar,
            r.objective,
            r.cond,
            r.residual_norm,
        ))
        .map_err(err)?;
    }
    w.flush().map_err(|e| ExpError::io(out, e))?;
    Ok(rows.len())
}
