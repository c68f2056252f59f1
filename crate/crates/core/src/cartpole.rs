//! Deterministic cart-pole simulator with the classic Barto–Sutton dynamics
//! and explicit Euler integration (`τ = 0.02 s`).
//!
//! Episodes end when the pole leaves ±12°, the cart leaves ±2.4 m, or the
//! step cap is reached. Every step, including the terminating one, yields +1.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called on a terminated episode; call reset first")]
    StepAfterTerminal,
    #[error("invalid action {action}; expected one of 0..{count}")]
    InvalidAction { action: usize, count: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// Contract the agents consume: discrete actions, vector observations.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Starts a new episode, drawing the initial state from `rng`.
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub force_magnitude: f64,
    pub tau: f64,
    pub angle_limit: f64,
    pub position_limit: f64,
    pub step_cap: usize,
}

/// Step cap for the capped setting.
pub const CAPPED_STEPS: usize = 200;
/// Safety cap applied when episodes are otherwise unbounded.
pub const UNCAPPED_SAFETY_STEPS: usize = 2000;

impl CartPoleParams {
    pub fn capped() -> Self {
        Self::with_cap(CAPPED_STEPS)
    }

    pub fn uncapped() -> Self {
        Self::with_cap(UNCAPPED_SAFETY_STEPS)
    }

    pub fn with_cap(step_cap: usize) -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            force_magnitude: 10.0,
            tau: 0.02,
            angle_limit: 12.0_f64.to_radians(),
            position_limit: 2.4,
            step_cap,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let fields = [
            ("gravity", self.gravity),
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_half_length", self.pole_half_length),
            ("force_magnitude", self.force_magnitude),
            ("tau", self.tau),
            ("angle_limit", self.angle_limit),
            ("position_limit", self.position_limit),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnvError::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.step_cap == 0 {
            return Err(EnvError::InvalidParams(
                "step_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self::capped()
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    params: CartPoleParams,
    state: CartPoleState,
    steps: usize,
    done: bool,
}

impl CartPole {
    pub fn new(params: CartPoleParams) -> Result<Self, EnvError> {
        params.validate()?;
        Ok(Self::new_unchecked(params))
    }

    /// Skips parameter validation, e.g. to flip gravity in tests.
    pub fn new_unchecked(params: CartPoleParams) -> Self {
        Self {
            params,
            state: CartPoleState {
                x: 0.0,
                x_dot: 0.0,
                theta: 0.0,
                theta_dot: 0.0,
            },
            steps: 0,
            done: true,
        }
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Starts an episode at an explicit state.
    pub fn reset_to(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
        self.done = false;
    }

    /// Each component i.i.d. uniform on (−0.05, 0.05).
    pub fn reset_with<R: Rng + ?Sized>(&mut self, rng: &mut R) -> CartPoleState {
        let dist = Uniform::new(-0.05, 0.05).expect("valid range");
        let mut draw = || dist.sample(rng);
        let state = CartPoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
        };
        self.reset_to(state);
        state
    }

    /// One Euler step with an arbitrary applied force.
    pub fn integrate(&self, s: CartPoleState, force: f64) -> CartPoleState {
        let p = &self.params;
        let total_mass = p.cart_mass + p.pole_mass;
        let polemass_length = p.pole_mass * p.pole_half_length;
        let (sin, cos) = s.theta.sin_cos();
        let temp = (force + polemass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
        let theta_acc = (p.gravity * sin - cos * temp)
            / (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        CartPoleState {
            x: s.x + p.tau * s.x_dot,
            x_dot: s.x_dot + p.tau * x_acc,
            theta: s.theta + p.tau * s.theta_dot,
            theta_dot: s.theta_dot + p.tau * theta_acc,
        }
    }

    pub fn out_of_bounds(&self, s: &CartPoleState) -> bool {
        s.theta.abs() > self.params.angle_limit || s.x.abs() > self.params.position_limit
    }

    pub fn step_action(&mut self, action: usize) -> Result<(CartPoleState, f64, bool), EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        let force = match action {
            0 => -self.params.force_magnitude,
            1 => self.params.force_magnitude,
            _ => return Err(EnvError::InvalidAction { action, count: 2 }),
        };
        self.state = self.integrate(self.state, force);
        self.steps += 1;
        self.done = self.out_of_bounds(&self.state) || self.steps >= self.params.step_cap;
        Ok((self.state, 1.0, self.done))
    }
}

impl Environment for CartPole {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_count(&self) -> usize {
        2
    }

    fn reset(&mut self, mut rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.reset_with(&mut rng).to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        let (state, reward, terminal) = self.step_action(action)?;
        Ok(StepOutcome {
            state: state.to_vec(),
            reward,
            terminal,
        })
    }
}
