//! Q-learning agents: the regularized-ELM agent (EQLM / HR) and a
//! gradient-descent Q-network baseline.
//!
//! Both share ε-greedy exploration with linear decay, an alternating
//! warm-up policy for the first episodes, a sliding-window replay memory
//! and a target network refreshed every `C` environment steps.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cartpole::{EnvError, Environment};
use crate::elmnet::{self, Activation, Batch, ElmError, ElmModel, TrainState};
use crate::linalg::Matrix;
use crate::regcore::{HrConfig, RegStrategy};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Elm(#[from] ElmError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid agent configuration: {0}")]
    Config(String),
}

pub type Result<T, E = AgentError> = std::result::Result<T, E>;

/// How the regularization hyperparameter is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RegInterpretation {
    /// The value is μ and the ridge is `I/μ`.
    #[default]
    Mu,
    /// The value is the ridge μ̄ itself.
    MuBar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub hidden_nodes: usize,
    pub regularization: f64,
    pub reg_interpretation: RegInterpretation,
    pub reg_order: usize,
    pub eps_initial: f64,
    pub eps_final: f64,
    pub eps_episodes: usize,
    pub discount: f64,
    pub minibatch: usize,
    pub target_update_steps: usize,
    pub heuristic_episodes: usize,
    pub memory_window: usize,
    /// Gradient baseline only.
    pub learning_rate: f64,
    /// Optional per-component multipliers applied to raw states.
    pub input_scale: Option<Vec<f64>>,
    pub seed: u64,
}

impl AgentConfig {
    /// Default regularized-ELM hyperparameters with `c = 1`.
    pub fn hr() -> Self {
        Self {
            hidden_nodes: 25,
            regularization: 1.827e-5,
            reg_interpretation: RegInterpretation::Mu,
            reg_order: 1,
            eps_initial: 0.599,
            eps_final: 0.05,
            eps_episodes: 360,
            discount: 0.93,
            minibatch: 2,
            target_update_steps: 48,
            heuristic_episodes: 10,
            memory_window: 10_000,
            learning_rate: 0.0,
            input_scale: None,
            seed: 0,
        }
    }

    /// Same as [`AgentConfig::hr`] with `c = 0`.
    pub fn eqlm() -> Self {
        Self {
            reg_order: 0,
            ..Self::hr()
        }
    }

    /// Default gradient Q-network hyperparameters.
    pub fn gradient_q() -> Self {
        Self {
            hidden_nodes: 29,
            regularization: 0.0,
            reg_order: 0,
            eps_initial: 0.670,
            eps_episodes: 400,
            discount: 0.99,
            minibatch: 26,
            target_update_steps: 70,
            learning_rate: 0.0065,
            ..Self::hr()
        }
    }

    /// The ridge μ̄ applied to `HᵀH`.
    pub fn mu_bar(&self) -> f64 {
        match self.reg_interpretation {
            RegInterpretation::Mu => 1.0 / self.regularization,
            RegInterpretation::MuBar => self.regularization,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(AgentError::Config(msg));
        if !(0.0 <= self.eps_final && self.eps_final <= self.eps_initial && self.eps_initial <= 1.0)
        {
            return fail(format!(
                "need 0 ≤ ε_f ≤ ε_i ≤ 1, got ε_i={} ε_f={}",
                self.eps_initial, self.eps_final
            ));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return fail(format!("discount must be in (0, 1], got {}", self.discount));
        }
        if self.minibatch == 0 || self.target_update_steps == 0 || self.hidden_nodes == 0 {
            return fail("minibatch, target update steps and hidden nodes must be positive".into());
        }
        if self.memory_window == 0 {
            return fail("memory window must be positive".into());
        }
        Ok(())
    }

    fn scale(&self, state: &[f64]) -> Vec<f64> {
        match &self.input_scale {
            Some(scale) => state.iter().zip(scale).map(|(s, k)| s * k).collect(),
            None => state.to_vec(),
        }
    }
}

/// Exploration rate for a 0-based episode index.
pub fn epsilon(config: &AgentConfig, episode: usize) -> f64 {
    if episode < config.eps_episodes {
        config.eps_initial
            - (episode as f64 / config.eps_episodes as f64)
                * (config.eps_initial - config.eps_final)
    } else {
        config.eps_final
    }
}

/// Alternating warm-up action `t mod 2`.
pub fn heuristic_action(t: usize) -> usize {
    t % 2
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice over given Q-values, with the warm-up policy during the
/// first `heuristic_episodes` episodes.
pub fn select_action<R: Rng + ?Sized>(
    q_values: &[f64],
    eps: f64,
    rng: &mut R,
    episode: usize,
    t: usize,
    config: &AgentConfig,
) -> usize {
    if episode < config.heuristic_episodes {
        return heuristic_action(t);
    }
    if rng.random::<f64>() < eps {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Sliding window of the most recent transitions.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    window: usize,
    buffer: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            buffer: VecDeque::with_capacity(window.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// `n` uniform draws; with replacement while the memory holds fewer than `n`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Transition> {
        if self.buffer.is_empty() {
            return Vec::new();
        }
        if self.buffer.len() < n {
            (0..n)
                .map(|_| self.buffer[rng.random_range(0..self.buffer.len())].clone())
                .collect()
        } else {
            rand::seq::index::sample(rng, self.buffer.len(), n)
                .into_iter()
                .map(|i| self.buffer[i].clone())
                .collect()
        }
    }
}

/// Frozen output weights `θ⁻` used for the bootstrap term of TD targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSnapshot {
    pub beta_target: Matrix,
}

/// Regression batch for the ELM: inputs are the `s_j`; each target row is the
/// current prediction for `s_j` with the taken action's entry replaced by
/// `r_j` (terminal) or `r_j + γ max_a Q_target(s_{j+1}, a)`.
pub fn td_targets(
    model: &ElmModel,
    target: &TargetSnapshot,
    minibatch: &[Transition],
    discount: f64,
) -> Result<Batch> {
    let d = model.input_dim();
    let k = model.output_dim();
    let mut inputs = Matrix::zeros(minibatch.len(), d);
    let mut targets = Matrix::zeros(minibatch.len(), k);
    for (j, tr) in minibatch.iter().enumerate() {
        let current = model.predict_one(&tr.state)?;
        let value = if tr.terminal {
            tr.reward
        } else {
            let next = model.predict_one_with(&tr.next_state, &target.beta_target)?;
            tr.reward + discount * next.max()
        };
        for c in 0..k {
            targets[(j, c)] = current[c];
        }
        targets[(j, tr.action)] = value;
        for c in 0..d {
            inputs[(j, c)] = tr.state[c];
        }
    }
    Ok(Batch::new(inputs, targets)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub reward: f64,
    pub steps: usize,
    pub target_refreshes: usize,
}

/// Seeds for the three random streams of a run.
#[derive(Debug, Clone, Copy)]
pub struct SeedPlan {
    pub network: u64,
    pub agent: u64,
    pub environment: u64,
}

impl SeedPlan {
    pub fn from_seed(seed: u64) -> Self {
        let mut root = ChaCha8Rng::seed_from_u64(seed);
        Self {
            network: root.next_u64(),
            agent: root.next_u64(),
            environment: root.next_u64(),
        }
    }
}

/// Q-learning with a regularized ELM value network trained incrementally:
/// HR initialization on the first minibatch, then the approximate
/// rank-`n` update on every later step.
#[derive(Debug, Clone)]
pub struct ElmAgent {
    config: AgentConfig,
    model: ElmModel,
    train: Option<TrainState>,
    target: TargetSnapshot,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    global_step: usize,
    episodes: usize,
}

impl ElmAgent {
    pub fn new(config: AgentConfig, state_dim: usize, actions: usize) -> Result<Self> {
        config.validate()?;
        if !(config.mu_bar() > 0.0 && config.mu_bar().is_finite()) {
            return Err(AgentError::Config(format!(
                "regularization must give a positive finite ridge, got μ̄={}",
                config.mu_bar()
            )));
        }
        let seeds = SeedPlan::from_seed(config.seed);
        let model = ElmModel::new(
            state_dim,
            config.hidden_nodes,
            actions,
            seeds.network,
            Activation::LogisticSigmoid,
        )?;
        Ok(Self {
            target: TargetSnapshot {
                beta_target: model.output_weights.clone(),
            },
            memory: ReplayMemory::new(config.memory_window),
            rng: ChaCha8Rng::seed_from_u64(seeds.agent),
            model,
            train: None,
            global_step: 0,
            episodes: 0,
            config,
        })
    }

    pub fn model(&self) -> &ElmModel {
        &self.model
    }

    pub fn train_state(&self) -> Option<&TrainState> {
        self.train.as_ref()
    }

    pub fn target(&self) -> &TargetSnapshot {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn global_step(&self) -> usize {
        self.global_step
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        let x = self.config.scale(state);
        Ok(self.model.predict_one(&x)?.iter().copied().collect())
    }

    fn learn(&mut self) -> Result<()> {
        let sample = self.memory.sample(self.config.minibatch, &mut self.rng);
        let batch = td_targets(&self.model, &self.target, &sample, self.config.discount)?;
        match &mut self.train {
            None => {
                let config = HrConfig::with_order(self.config.reg_order);
                let strategy = RegStrategy::Scalar(self.config.mu_bar());
                self.train = Some(elmnet::ihr_init(&self.model, &batch, &strategy, &config)?);
            }
            Some(state) => elmnet::eqlm_update(state, &self.model, &batch)?,
        }
        self.model.output_weights = self.train.as_ref().expect("initialized above").beta.clone();
        Ok(())
    }

    /// Plays one episode, learning after every step.
    pub fn run_episode(
        &mut self,
        env: &mut dyn Environment,
        env_rng: &mut dyn RngCore,
    ) -> Result<EpisodeRecord> {
        let episode = self.episodes;
        let eps = epsilon(&self.config, episode);
        let mut state = self.config.scale(&env.reset(env_rng));
        let mut record = EpisodeRecord {
            reward: 0.0,
            steps: 0,
            target_refreshes: 0,
        };
        loop {
            let q = self.model.predict_one(&state)?;
            let action = select_action(
                q.as_slice(),
                eps,
                &mut self.rng,
                episode,
                record.steps,
                &self.config,
            );
            let outcome = env.step(action)?;
            let next_state = self.config.scale(&outcome.state);
            record.reward += outcome.reward;
            record.steps += 1;
            self.memory.push(Transition {
                state: state.clone(),
                action,
                reward: outcome.reward,
                next_state: next_state.clone(),
                terminal: outcome.terminal,
            });
            self.learn()?;
            self.global_step += 1;
            if self
                .global_step
                .is_multiple_of(self.config.target_update_steps)
            {
                self.target.beta_target = self.model.output_weights.clone();
                record.target_refreshes += 1;
            }
            state = next_state;
            if outcome.terminal {
                break;
            }
        }
        self.episodes += 1;
        Ok(record)
    }
}

/// Fully trainable single-hidden-layer Q-network with sigmoid hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    /// L×d
    pub w1: Matrix,
    pub b1: DVector<f64>,
    /// k×L
    pub w2: Matrix,
    pub b2: DVector<f64>,
}

impl QNetwork {
    /// Hidden layer as in the ELM (`U(−1,1)` weights, `U(0,1)` biases),
    /// output layer `U(−1/√L, 1/√L)` with zero bias.
    pub fn new(d: usize, hidden: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Uniform::new(-1.0, 1.0).expect("valid range");
        let b = Uniform::new(0.0, 1.0).expect("valid range");
        let lim = 1.0 / (hidden as f64).sqrt();
        let o = Uniform::new(-lim, lim).expect("valid range");
        let w1 = Matrix::from_fn(hidden, d, |_, _| w.sample(&mut rng));
        let b1 = DVector::from_fn(hidden, |_, _| b.sample(&mut rng));
        let w2 = Matrix::from_fn(k, hidden, |_, _| o.sample(&mut rng));
        Self {
            w1,
            b1,
            w2,
            b2: DVector::zeros(k),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    fn activations(&self, x: &[f64]) -> DVector<f64> {
        let mut z = &self.w1 * DVector::from_column_slice(x) + &self.b1;
        z.apply(|v| *v = 1.0 / (1.0 + (-*v).exp()));
        z
    }

    pub fn q_values(&self, x: &[f64]) -> DVector<f64> {
        &self.w2 * self.activations(x) + &self.b2
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters flattened as `w1, b1, w2, b2` (column-major within each).
    pub fn params(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter length");
        let mut it = p.iter().copied();
        for v in self
            .w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
        {
            *v = it.next().expect("length checked");
        }
    }
}

fn td_value(target: &QNetwork, tr: &Transition, discount: f64) -> f64 {
    if tr.terminal {
        tr.reward
    } else {
        tr.reward + discount * target.q_values(&tr.next_state).max()
    }
}

/// Mean squared TD error over the minibatch; bootstrap values come from `target`.
pub fn td_loss(net: &QNetwork, target: &QNetwork, minibatch: &[Transition], discount: f64) -> f64 {
    if minibatch.is_empty() {
        return 0.0;
    }
    let total: f64 = minibatch
        .iter()
        .map(|tr| {
            let e = net.q_values(&tr.state)[tr.action] - td_value(target, tr, discount);
            e * e
        })
        .sum();
    total / minibatch.len() as f64
}

/// Analytic gradient of [`td_loss`] with respect to the parameters of `net`,
/// in [`QNetwork::params`] order.
pub fn td_loss_gradient(
    net: &QNetwork,
    target: &QNetwork,
    minibatch: &[Transition],
    discount: f64,
) -> Vec<f64> {
    let mut g = QNetwork {
        w1: Matrix::zeros(net.w1.nrows(), net.w1.ncols()),
        b1: DVector::zeros(net.b1.len()),
        w2: Matrix::zeros(net.w2.nrows(), net.w2.ncols()),
        b2: DVector::zeros(net.b2.len()),
    };
    if minibatch.is_empty() {
        return g.params();
    }
    let m = minibatch.len() as f64;
    for tr in minibatch {
        let h = net.activations(&tr.state);
        let q = (net.w2.row(tr.action) * &h)[0] + net.b2[tr.action];
        let delta = 2.0 * (q - td_value(target, tr, discount)) / m;
        for i in 0..h.len() {
            g.w2[(tr.action, i)] += delta * h[i];
            let back = delta * net.w2[(tr.action, i)] * h[i] * (1.0 - h[i]);
            g.b1[i] += back;
            for (c, x) in tr.state.iter().enumerate() {
                g.w1[(i, c)] += back * x;
            }
        }
        g.b2[tr.action] += delta;
    }
    g.params()
}

/// One SGD step of rate `α` on the mean squared TD error.
pub fn gradient_q_update(
    net: &QNetwork,
    target: &QNetwork,
    minibatch: &[Transition],
    discount: f64,
    learning_rate: f64,
) -> QNetwork {
    let grad = td_loss_gradient(net, target, minibatch, discount);
    let params: Vec<f64> = net
        .params()
        .iter()
        .zip(&grad)
        .map(|(p, g)| p - learning_rate * g)
        .collect();
    let mut out = net.clone();
    out.set_params(&params);
    out
}

/// Q-learning with a gradient-trained Q-network.
#[derive(Debug, Clone)]
pub struct GradientAgent {
    config: AgentConfig,
    net: QNetwork,
    target: QNetwork,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    global_step: usize,
    episodes: usize,
}

impl GradientAgent {
    pub fn new(config: AgentConfig, state_dim: usize, actions: usize) -> Result<Self> {
        config.validate()?;
        let seeds = SeedPlan::from_seed(config.seed);
        let net = QNetwork::new(state_dim, config.hidden_nodes, actions, seeds.network);
        Ok(Self {
            target: net.clone(),
            net,
            memory: ReplayMemory::new(config.memory_window),
            rng: ChaCha8Rng::seed_from_u64(seeds.agent),
            global_step: 0,
            episodes: 0,
            config,
        })
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn run_episode(
        &mut self,
        env: &mut dyn Environment,
        env_rng: &mut dyn RngCore,
    ) -> Result<EpisodeRecord> {
        let episode = self.episodes;
        let eps = epsilon(&self.config, episode);
        let mut state = self.config.scale(&env.reset(env_rng));
        let mut record = EpisodeRecord {
            reward: 0.0,
            steps: 0,
            target_refreshes: 0,
        };
        loop {
            let q = self.net.q_values(&state);
            let action = select_action(
                q.as_slice(),
                eps,
                &mut self.rng,
                episode,
                record.steps,
                &self.config,
            );
            let outcome = env.step(action)?;
            let next_state = self.config.scale(&outcome.state);
            record.reward += outcome.reward;
            record.steps += 1;
            self.memory.push(Transition {
                state: state.clone(),
                action,
                reward: outcome.reward,
                next_state: next_state.clone(),
                terminal: outcome.terminal,
            });
            let sample = self.memory.sample(self.config.minibatch, &mut self.rng);
            self.net = gradient_q_update(
                &self.net,
                &self.target,
                &sample,
                self.config.discount,
                self.config.learning_rate,
            );
            self.global_step += 1;
            if self
                .global_step
                .is_multiple_of(self.config.target_update_steps)
            {
                self.target = self.net.clone();
                record.target_refreshes += 1;
            }
            state = next_state;
            if outcome.terminal {
                break;
            }
        }
        self.episodes += 1;
        Ok(record)
    }
}
