//! Experiment configuration and the flat `key = value` file format.
//!
//! Keys are case-insensitive and spaces or hyphens are treated as
//! underscores, so long-form names such as "Initial exploration
//! probability" or "Target network update steps" can be written verbatim. Lines starting with `#` are comments.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use hrelm::cartpole::CartPoleParams;
use hrelm::qagent::{AgentConfig, RegInterpretation};
use serde::{Deserialize, Serialize};

use crate::{ExpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Regularized ELM with `c = 1` at initialization.
    Hr,
    /// Regularized ELM with `c = 0`.
    Eqlm,
    /// Gradient-trained Q-network.
    Gradq,
}

impl Method {
    /// Hyperparameter preset for the method.
    pub fn preset(self) -> AgentConfig {
        match self {
            Method::Hr => AgentConfig::hr(),
            Method::Eqlm => AgentConfig::eqlm(),
            Method::Gradq => AgentConfig::gradient_q(),
        }
    }
}

impl FromStr for Method {
    type Err = ExpError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hr" => Ok(Method::Hr),
            "eqlm" => Ok(Method::Eqlm),
            "gradq" | "q-network" | "qnetwork" => Ok(Method::Gradq),
            other => Err(ExpError::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Hr => "hr",
            Method::Eqlm => "eqlm",
            Method::Gradq => "gradq",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    /// 200-step episodes.
    Capped,
    /// 2000-step safety cap.
    Uncapped,
}

impl EnvKind {
    pub fn params(self) -> CartPoleParams {
        match self {
            EnvKind::Capped => CartPoleParams::capped(),
            EnvKind::Uncapped => CartPoleParams::uncapped(),
        }
    }
}

impl FromStr for EnvKind {
    type Err = ExpError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "capped" => Ok(EnvKind::Capped),
            "uncapped" => Ok(EnvKind::Uncapped),
            other => Err(ExpError::Config(format!("unknown env {other:?}"))),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Capped => "capped",
            EnvKind::Uncapped => "uncapped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub agent: AgentConfig,
    pub env: EnvKind,
    pub runs: usize,
    pub episodes: usize,
    /// Not serialized, so results do not depend on where they are written.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub base_seed: u64,
    /// Worker threads; 0 means available parallelism. Not serialized.
    #[serde(skip)]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            agent: method.preset(),
            env: EnvKind::Capped,
            runs: 50,
            episodes: 600,
            output_dir: PathBuf::from("results"),
            base_seed: 0,
            workers: 0,
        }
    }

    /// Switches the method, resetting the agent to that method's preset.
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self.agent = method.preset();
        self
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.episodes == 0 {
            return Err(ExpError::Config(
                "runs and episodes must be at least 1".into(),
            ));
        }
        self.agent
            .validate()
            .map_err(|e| ExpError::Config(e.to_string()))?;
        if self.method == Method::Eqlm && self.agent.reg_order != 0 {
            return Err(ExpError::Config(
                "method eqlm requires regularization order 0".into(),
            ));
        }
        Ok(())
    }

    /// Parses the flat configuration format. `method` is applied first so that
    /// the remaining keys override its preset regardless of their order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| {
                    ExpError::Config(format!("line {}: expected key = value", lineno + 1))
                })?;
            entries.push((lineno + 1, normalize_key(key), value.trim().to_string()));
        }
        let method = entries
            .iter()
            .rev()
            .find(|(_, k, _)| k == "method")
            .map(|(_, _, v)| v.parse())
            .transpose()?
            .unwrap_or(Method::Hr);
        let mut cfg = Self::new(method);
        for (lineno, key, value) in &entries {
            cfg.apply(key, value)
                .map_err(|e| ExpError::Config(format!("line {lineno}: {e}")))?;
        }
        Ok(cfg)
    }

    /// Sets one normalized key.
    pub fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid number {v:?}"))
        }
        let a = &mut self.agent;
        match key {
            "method" => {}
            "env" | "environment" => {
                self.env = value.parse().map_err(|e: ExpError| e.to_string())?
            }
            "capped" => {
                self.env = if parse_bool(value)? {
                    EnvKind::Capped
                } else {
                    EnvKind::Uncapped
                }
            }
            "runs" | "total_runs" => self.runs = num(value)?,
            "episodes" | "maximum_episode" | "max_episodes" => self.episodes = num(value)?,
            "output_dir" | "out" => self.output_dir = PathBuf::from(value),
            "base_seed" | "seed" => self.base_seed = num(value)?,
            "workers" => self.workers = num(value)?,
            "hidden_nodes" => a.hidden_nodes = num(value)?,
            "regularization_parameter" | "regularization" | "mu" => a.regularization = num(value)?,
            "reg_interpretation" | "regularization_interpretation" => {
                a.reg_interpretation = match value.to_ascii_lowercase().as_str() {
                    "mu" => RegInterpretation::Mu,
                    "mu_bar" | "mu-bar" | "mubar" => RegInterpretation::MuBar,
                    other => return Err(format!("unknown interpretation {other:?}")),
                }
            }
            "regularization_order" | "reg_order" | "c" => a.reg_order = num(value)?,
            "initial_exploration_probability" | "eps_initial" => a.eps_initial = num(value)?,
            "final_exploration_probability" | "eps_final" => a.eps_final = num(value)?,
            "episodes_to_decrease_exploration_probability" | "eps_episodes" => {
                a.eps_episodes = num(value)?
            }
            "discount_factor" | "discount" | "gamma" => a.discount = num(value)?,
            "minibatch_size" | "minibatch" => a.minibatch = num(value)?,
            "target_network_update_steps" | "target_update_steps" => {
                a.target_update_steps = num(value)?
            }
            "heuristic_episodes" => a.heuristic_episodes = num(value)?,
            "memory_window" | "memory_size" => a.memory_window = num(value)?,
            "learning_rate" => a.learning_rate = num(value)?,
            "input_scale" => {
                a.input_scale = if value.eq_ignore_ascii_case("none") || value.is_empty() {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|v| num(v.trim()))
                            .collect::<std::result::Result<_, _>>()?,
                    )
                }
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("invalid boolean {other:?}")),
    }
}

/// Lower-cases and maps runs of spaces or hyphens to a single underscore.
pub fn normalize_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for word in key
        .trim()
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&word.to_ascii_lowercase());
    }
    out
}
