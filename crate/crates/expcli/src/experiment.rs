//! Multi-run training campaigns and their persisted results.
//!
//! Layout of an output directory:
//! - `run_000.csv`, `run_001.csv`, ...: `episode,reward,steps`, one row per
//!   completed episode.
//! - `gram_000.csv`, ...: final accumulated hidden-layer gram of each ELM run,
//!   only when `save_gram` is set.
//! - `summary.json`: configuration echo and [`SummaryStats`].
//!
//! Every file is a deterministic function of the configuration. Wall-clock
//! times are reported on stderr only.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hrelm::cartpole::{CartPole, Environment};
use hrelm::qagent::{AgentConfig, ElmAgent, EpisodeRecord, GradientAgent, SeedPlan};
use hrelm::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::metrics::{auc, ci95, head_mean, mean, std_dev, tail_mean, Statistic};
use crate::{ExpError, Result};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
/// Episodes averaged for the first/final performance figures.
pub const WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_index: usize,
    pub seed: u64,
    pub rewards: Vec<f64>,
    pub steps: Vec<usize>,
    /// Seconds; never persisted.
    pub wall_time: f64,
    /// Set when the run stopped early.
    pub error: Option<String>,
    /// Final accumulated gram `HᵀH` for ELM agents.
    pub gram: Option<Matrix>,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedRun {
    pub run_index: usize,
    pub episodes_completed: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub schema_version: u32,
    pub completed_runs: usize,
    pub episodes: usize,
    pub mean_final50: f64,
    pub std_final50: f64,
    /// Mean over runs of each run's AUC.
    pub auc: f64,
    pub ci95_mean_final50: Option<(f64, f64)>,
    pub ci95_std_final50: Option<(f64, f64)>,
    pub ci95_auc: Option<(f64, f64)>,
    /// AUC of the across-run mean reward curve.
    pub auc_mean_curve: f64,
    pub final50: Vec<f64>,
    pub first50: Vec<f64>,
    pub aborted: Vec<AbortedRun>,
    /// True when any run was aborted.
    pub warning: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SummaryFile {
    config: ExperimentConfig,
    summary: SummaryStats,
}

#[allow(clippy::large_enum_variant)]
enum Learner {
    Elm(ElmAgent),
    Gradient(GradientAgent),
}

impl Learner {
    fn new(method: Method, cfg: AgentConfig, state_dim: usize, actions: usize) -> Result<Self> {
        let err = |e: hrelm::qagent::AgentError| ExpError::Config(e.to_string());
        Ok(match method {
            Method::Hr | Method::Eqlm => {
                Learner::Elm(ElmAgent::new(cfg, state_dim, actions).map_err(err)?)
            }
            Method::Gradq => {
                Learner::Gradient(GradientAgent::new(cfg, state_dim, actions).map_err(err)?)
            }
        })
    }

    fn episode(
        &mut self,
        env: &mut dyn Environment,
        rng: &mut ChaCha8Rng,
    ) -> std::result::Result<EpisodeRecord, hrelm::qagent::AgentError> {
        match self {
            Learner::Elm(a) => a.run_episode(env, rng),
            Learner::Gradient(a) => a.run_episode(env, rng),
        }
    }

    fn gram(&self) -> Option<Matrix> {
        match self {
            Learner::Elm(a) => a.train_state().map(|s| s.gram.clone()),
            Learner::Gradient(_) => None,
        }
    }
}

/// Plays one run of `config.episodes` episodes with seed `base_seed + run`.
pub fn run_single(config: &ExperimentConfig, run: usize) -> Result<RunRecord> {
    let seed = config.run_seed(run);
    let agent_cfg = AgentConfig {
        seed,
        ..config.agent.clone()
    };
    let mut env =
        CartPole::new(config.env.params()).map_err(|e| ExpError::Config(e.to_string()))?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(SeedPlan::from_seed(seed).environment);
    let mut learner = Learner::new(
        config.method,
        agent_cfg,
        env.state_dim(),
        env.action_count(),
    )?;
    let start = Instant::now();
    let mut record = RunRecord {
        run_index: run,
        seed,
        rewards: Vec::with_capacity(config.episodes),
        steps: Vec::with_capacity(config.episodes),
        wall_time: 0.0,
        error: None,
        gram: None,
    };
    for episode in 0..config.episodes {
        match learner.episode(&mut env, &mut env_rng) {
            Ok(ep) => {
                record.rewards.push(ep.reward);
                record.steps.push(ep.steps);
            }
            Err(e) => {
                record.error = Some(format!("episode {episode}: {e}"));
                break;
            }
        }
    }
    record.gram = learner.gram();
    record.wall_time = start.elapsed().as_secs_f64();
    Ok(record)
}

/// Runs every run index on a bounded worker pool, persists the results and
/// returns them with the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(Vec<RunRecord>, SummaryStats)> {
    run_experiment_with(config, false)
}

/// As [`run_experiment`]; `save_gram` additionally writes each ELM run's gram.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    save_gram: bool,
) -> Result<(Vec<RunRecord>, SummaryStats)> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| ExpError::Runtime(format!("worker pool: {e}")))?;
    let started = Instant::now();
    let records = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|run| {
                let rec = run_single(config, run)?;
                eprintln!(
                    "run {run:>3}: final-50 mean {:.1}, {:.1}s{}",
                    tail_mean(&rec.rewards, WINDOW),
                    rec.wall_time,
                    rec.error
                        .as_deref()
                        .map(|e| format!(" (aborted: {e})"))
                        .unwrap_or_default()
                );
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = summarize(&records, config.episodes, config.base_seed)?;
    persist(config, &records, &summary, save_gram)?;
    eprintln!(
        "{} runs in {:.1}s",
        records.len(),
        started.elapsed().as_secs_f64()
    );
    Ok((records, summary))
}

/// Aggregates completed runs. Bootstrap intervals need two completed runs.
pub fn summarize(records: &[RunRecord], episodes: usize, seed: u64) -> Result<SummaryStats> {
    let done: Vec<&RunRecord> = records.iter().filter(|r| r.completed()).collect();
    let aborted: Vec<AbortedRun> = records
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| AbortedRun {
                run_index: r.run_index,
                episodes_completed: r.rewards.len(),
                error: e.clone(),
            })
        })
        .collect();
    if done.is_empty() {
        return Err(ExpError::Runtime(format!(
            "all {} runs aborted",
            records.len()
        )));
    }
    let final50: Vec<f64> = done.iter().map(|r| tail_mean(&r.rewards, WINDOW)).collect();
    let first50: Vec<f64> = done.iter().map(|r| head_mean(&r.rewards, WINDOW)).collect();
    let aucs: Vec<f64> = done.iter().map(|r| auc(&r.rewards)).collect();
    let len = done.iter().map(|r| r.rewards.len()).min().unwrap_or(0);
    let mean_curve: Vec<f64> = (0..len)
        .map(|i| done.iter().map(|r| r.rewards[i]).sum::<f64>() / done.len() as f64)
        .collect();
    let interval =
        |values: &[f64], offset: u64, stat| ci95(values, seed.wrapping_add(offset), stat).ok();
    Ok(SummaryStats {
        schema_version: SUMMARY_SCHEMA_VERSION,
        completed_runs: done.len(),
        episodes,
        mean_final50: mean(&final50),
        std_final50: std_dev(&final50),
        auc: mean(&aucs),
        ci95_mean_final50: interval(&final50, 1, Statistic::Mean),
        ci95_std_final50: interval(&final50, 2, Statistic::Std),
        ci95_auc: interval(&aucs, 3, Statistic::Mean),
        auc_mean_curve: auc(&mean_curve),
        final50,
        first50,
        warning: !aborted.is_empty(),
        aborted,
    })
}

pub fn run_file_name(run: usize) -> String {
    format!("run_{run:03}.csv")
}

fn persist(
    config: &ExperimentConfig,
    records: &[RunRecord],
    summary: &SummaryStats,
    save_gram: bool,
) -> Result<()> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    for rec in records {
        write_run(&dir.join(run_file_name(rec.run_index)), rec)?;
        if let (true, Some(gram)) = (save_gram, &rec.gram) {
            write_matrix(&dir.join(format!("gram_{:03}.csv", rec.run_index)), gram)?;
        }
    }
    let path = dir.join(SUMMARY_FILE);
    let file = SummaryFile {
        config: config.clone(),
        summary: summary.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|source| ExpError::Json {
        path: path.clone(),
        source,
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| ExpError::io(&path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ExpError + '_ {
    move |source| ExpError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_run(path: &Path, rec: &RunRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["episode", "reward", "steps"])
        .map_err(csv_err(path))?;
    for (i, (r, s)) in rec.rewards.iter().zip(&rec.steps).enumerate() {
        w.serialize((i, r, s)).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| ExpError::io(path, e))
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    for row in m.row_iter() {
        w.serialize(row.iter().collect::<Vec<_>>())
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| ExpError::io(path, e))
}

/// Reads a headerless numeric CSV matrix.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut data = Vec::new();
    let mut cols = None;
    for row in r.deserialize::<Vec<f64>>() {
        let row = row.map_err(csv_err(path))?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(ExpError::Runtime(format!(
                "{}: ragged rows",
                path.display()
            )));
        }
        data.extend(row);
    }
    let cols = cols.unwrap_or(0);
    let rows = data.len().checked_div(cols).unwrap_or(0);
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

#[derive(Debug, Deserialize)]
struct EpisodeRow {
    #[allow(dead_code)]
    episode: usize,
    reward: f64,
    steps: usize,
}

fn read_run(path: &Path, run_index: usize) -> Result<RunRecord> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rec = RunRecord {
        run_index,
        seed: 0,
        rewards: Vec::new(),
        steps: Vec::new(),
        wall_time: 0.0,
        error: None,
        gram: None,
    };
    for row in r.deserialize::<EpisodeRow>() {
        let row = row.map_err(csv_err(path))?;
        rec.rewards.push(row.reward);
        rec.steps.push(row.steps);
    }
    Ok(rec)
}

/// Recomputes the summary from the run files in `dir`. Seeds and aborted-run
/// diagnostics come from `summary.json` when it is present.
pub fn summarize_dir(dir: &Path) -> Result<SummaryStats> {
    let summary_path = dir.join(SUMMARY_FILE);
    let saved: Option<SummaryFile> = match fs::read_to_string(&summary_path) {
        Ok(text) => Some(
            serde_json::from_str(&text).map_err(|source| ExpError::Json {
                path: summary_path.clone(),
                source,
            })?,
        ),
        Err(_) => None,
    };
    let mut runs: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| ExpError::io(dir, e))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            let name = path.file_name()?.to_str()?;
            let idx = name
                .strip_prefix("run_")?
                .strip_suffix(".csv")?
                .parse()
                .ok()?;
            Some((idx, path))
        })
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(ExpError::Runtime(format!(
            "{}: no run files",
            dir.display()
        )));
    }
    let mut records = runs
        .iter()
        .map(|(i, p)| read_run(p, *i))
        .collect::<Result<Vec<_>>>()?;
    let (episodes, seed) = match &saved {
        Some(s) => {
            for a in &s.summary.aborted {
                if let Some(r) = records.iter_mut().find(|r| r.run_index == a.run_index) {
                    r.error = Some(a.error.clone());
                }
            }
            (s.config.episodes, s.config.base_seed)
        }
        None => (
            records.iter().map(|r| r.rewards.len()).max().unwrap_or(0),
            0,
        ),
    };
    summarize(&records, episodes, seed)
}
