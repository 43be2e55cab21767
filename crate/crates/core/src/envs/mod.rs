//! Continuous-control environments with explicit, resumable state.
//!
//! Each environment is a [`Dynamics`] model driven by [`BaseEnv`]. Perturbation
//! wrappers in [`crate::perturb`] layer on top through the object-safe [`Env`]
//! trait.

mod demos;
mod linear_quadratic;
mod pendulum;
mod point_mass;

use std::fmt;
use std::sync::Arc;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::perturb::PerturbationKind;
use crate::rng::Rng;

pub use demos::{collect_demos, rollout_expert, DemoProtocol, DemoSet};
pub use linear_quadratic::LinearQuadratic;
pub use pendulum::Pendulum;
pub use point_mass::PointMass;

/// Per-dimension box constraint on actions.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn symmetric(dim: usize, limit: f64) -> Self {
        ActionBounds {
            low: vec![-limit; dim],
            high: vec![limit; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn clip(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect()
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(lo, hi)| rng.random_range(*lo..=*hi))
            .collect()
    }
}

/// Physics of a base environment. Observations equal the full state.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn action_bounds(&self) -> &ActionBounds;
    fn discount(&self) -> f64 {
        0.99
    }
    fn max_steps(&self) -> usize;
    /// Draw from the initial state distribution.
    fn initial_state(&self, rng: &mut Rng) -> Vec<f64>;
    /// Next state for an already-clipped action.
    fn advance(&self, state: &[f64], action: &[f64]) -> Vec<f64>;
    /// Ground-truth reward r(s, a).
    fn reward(&self, state: &[f64], action: &[f64]) -> f64;
    /// Scalar speed used by the state-nuisance indicator.
    fn speed(&self, state: &[f64]) -> f64;
    /// Analytic expert controller (pre-clip).
    fn expert_action(&self, state: &[f64]) -> Vec<f64>;
    /// Undiscounted return over one full episode that an expert must reach.
    fn expert_threshold(&self) -> f64;
    /// Default speed threshold for the state nuisance.
    fn velocity_threshold(&self) -> f64;
}

/// The physically meaningful part of an environment state: what the planner
/// copies from the true environment into its model each step.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalState {
    pub values: Vec<f64>,
    pub elapsed: usize,
    /// Last executed (clipped) action; zeros right after reset.
    pub prev_action: Vec<f64>,
}

/// Per-wrapper state: the wrapper's noise stream plus whatever it appends or
/// last sampled.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub stream: Rng,
    pub values: Vec<f64>,
}

/// Full resumable state of a (possibly wrapped) environment.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub physical: PhysicalState,
    pub layers: Vec<LayerState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Object-safe environment interface shared by base envs and wrappers.
pub trait Env: Send + Sync {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn action_bounds(&self) -> &ActionBounds;
    fn action_dim(&self) -> usize {
        self.action_bounds().dim()
    }
    fn discount(&self) -> f64;
    fn max_steps(&self) -> usize;
    /// Samples a fresh episode start. Wrappers reseed their own noise stream
    /// from `rng` only after the inner reset has drawn its initial state.
    fn reset(&mut self, rng: &mut Rng) -> (EnvState, Vec<f64>);
    fn step(&mut self, action: &[f64]) -> Result<Step>;
    fn observe(&self) -> Vec<f64>;
    fn get_state(&self) -> EnvState;
    fn set_state(&mut self, state: &EnvState) -> Result<()>;
    fn physical(&self) -> PhysicalState;
    /// Overwrites only the physical state, leaving wrapper layers untouched.
    fn set_physical(&mut self, physical: &PhysicalState) -> Result<()>;
    fn speed(&self) -> f64;
    /// Expert action for an observation of this environment.
    fn expert_action(&self, obs: &[f64]) -> Vec<f64>;
    fn expert_threshold(&self) -> f64;
    /// Perturbation wrappers applied, innermost first.
    fn perturbations(&self) -> Vec<PerturbationKind>;
    fn clone_box(&self) -> Box<dyn Env>;
}

impl Clone for Box<dyn Env> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Drives a [`Dynamics`] model: action clipping, time limit, divergence checks.
#[derive(Clone, Debug)]
pub struct BaseEnv {
    dynamics: Arc<dyn Dynamics>,
    state: PhysicalState,
}

impl BaseEnv {
    pub fn new(dynamics: Arc<dyn Dynamics>) -> Self {
        let state = PhysicalState {
            values: vec![0.0; dynamics.state_dim()],
            elapsed: 0,
            prev_action: vec![0.0; dynamics.action_bounds().dim()],
        };
        BaseEnv { dynamics, state }
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }
}

impl Env for BaseEnv {
    fn name(&self) -> &'static str {
        self.dynamics.name()
    }

    fn obs_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    fn action_bounds(&self) -> &ActionBounds {
        self.dynamics.action_bounds()
    }

    fn discount(&self) -> f64 {
        self.dynamics.discount()
    }

    fn max_steps(&self) -> usize {
        self.dynamics.max_steps()
    }

    fn reset(&mut self, rng: &mut Rng) -> (EnvState, Vec<f64>) {
        self.state = PhysicalState {
            values: self.dynamics.initial_state(rng),
            elapsed: 0,
            prev_action: vec![0.0; self.action_dim()],
        };
        (self.get_state(), self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if action.len() != self.action_dim() {
            return Err(Error::RejectedInput(format!(
                "{}: action has length {}, expected {}",
                self.name(),
                action.len(),
                self.action_dim()
            )));
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(Error::SimulationDiverged {
                env: self.name().into(),
                step: self.state.elapsed,
            });
        }
        let a = self.action_bounds().clip(action);
        let reward = self.dynamics.reward(&self.state.values, &a);
        let next = self.dynamics.advance(&self.state.values, &a);
        if next.iter().any(|v| !v.is_finite()) || !reward.is_finite() {
            return Err(Error::SimulationDiverged {
                env: self.name().into(),
                step: self.state.elapsed,
            });
        }
        self.state.values = next;
        self.state.prev_action = a;
        self.state.elapsed += 1;
        Ok(Step {
            obs: self.observe(),
            reward,
            terminated: false,
            truncated: self.state.elapsed >= self.max_steps(),
        })
    }

    fn observe(&self) -> Vec<f64> {
        self.state.values.clone()
    }

    fn get_state(&self) -> EnvState {
        EnvState {
            physical: self.state.clone(),
            layers: Vec::new(),
        }
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        if !state.layers.is_empty() {
            return Err(Error::State(format!(
                "{}: state carries {} wrapper layers, base env expects none",
                self.name(),
                state.layers.len()
            )));
        }
        self.set_physical(&state.physical)
    }

    fn physical(&self) -> PhysicalState {
        self.state.clone()
    }

    fn set_physical(&mut self, physical: &PhysicalState) -> Result<()> {
        if physical.values.len() != self.obs_dim()
            || physical.prev_action.len() != self.action_dim()
        {
            return Err(Error::State(format!(
                "{}: physical state has wrong dimensions",
                self.name()
            )));
        }
        if physical.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged {
                env: self.name().into(),
                step: physical.elapsed,
            });
        }
        self.state = physical.clone();
        Ok(())
    }

    fn speed(&self) -> f64 {
        self.dynamics.speed(&self.state.values)
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        self.dynamics
            .expert_action(&obs[..self.dynamics.state_dim()])
    }

    fn expert_threshold(&self) -> f64 {
        self.dynamics.expert_threshold()
    }

    fn perturbations(&self) -> Vec<PerturbationKind> {
        Vec::new()
    }

    fn clone_box(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Names of the built-in environments.
pub const ENV_NAMES: [&str; 3] = ["PointMass2D", "Pendulum", "LinearQuadratic"];

/// Builds a base environment by name with its default parameters.
pub fn make_env(name: &str) -> Result<BaseEnv> {
    let dynamics: Arc<dyn Dynamics> = match name {
        "PointMass2D" => Arc::new(PointMass::default()),
        "Pendulum" => Arc::new(Pendulum::default()),
        "LinearQuadratic" => Arc::new(LinearQuadratic::default()),
        other => {
            return Err(Error::Config(format!(
                "unknown environment {other:?}; expected one of {ENV_NAMES:?}"
            )))
        }
    };
    Ok(BaseEnv::new(dynamics))
}

/// One episode: `states` holds every observation including the final one.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub env_rewards: Vec<f64>,
    pub done: bool,
    pub discount: f64,
}

impl Trajectory {
    pub fn new(first_obs: Vec<f64>, discount: f64) -> Self {
        Trajectory {
            states: vec![first_obs],
            discount,
            ..Default::default()
        }
    }

    pub fn push(&mut self, action: Vec<f64>, step: &Step) {
        self.actions.push(action);
        self.env_rewards.push(step.reward);
        self.states.push(step.obs.clone());
        self.done = step.done();
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Undiscounted sum of ground-truth rewards, the figure reported in tables.
    pub fn total_reward(&self) -> f64 {
        self.env_rewards.iter().sum()
    }

    pub fn discounted_return(&self) -> f64 {
        self.env_rewards
            .iter()
            .rev()
            .fold(0.0, |acc, r| r + self.discount * acc)
    }

    /// (state, action) pairs, excluding the final state.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.states
            .iter()
            .zip(&self.actions)
            .map(|(s, a)| (s.as_slice(), a.as_slice()))
    }
}

/// Observation-only step result handed to imitation learners.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedStep {
    pub obs: Vec<f64>,
    pub terminated: bool,
    pub truncated: bool,
}

/// Environment handle with the reward channel disabled. Ground-truth returns
/// of finished episodes are only reachable through
/// [`RewardFreeEnv::take_finished_returns`], which feeds training logs.
pub struct RewardFreeEnv {
    inner: Box<dyn Env>,
    running_return: f64,
    finished: Vec<f64>,
}

impl Clone for RewardFreeEnv {
    fn clone(&self) -> Self {
        RewardFreeEnv {
            inner: self.inner.clone_box(),
            running_return: self.running_return,
            finished: self.finished.clone(),
        }
    }
}

impl RewardFreeEnv {
    pub fn new(inner: Box<dyn Env>) -> Self {
        RewardFreeEnv {
            inner,
            running_return: 0.0,
            finished: Vec::new(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    pub fn action_bounds(&self) -> &ActionBounds {
        self.inner.action_bounds()
    }

    pub fn max_steps(&self) -> usize {
        self.inner.max_steps()
    }

    pub fn discount(&self) -> f64 {
        self.inner.discount()
    }

    pub fn name(&self) -> &'static str {
        self.inner.name()
    }

    pub fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.running_return = 0.0;
        self.inner.reset(rng).1
    }

    pub fn step(&mut self, action: &[f64]) -> Result<ObservedStep> {
        let s = self.inner.step(action)?;
        self.running_return += s.reward;
        if s.done() {
            self.finished.push(self.running_return);
            self.running_return = 0.0;
        }
        Ok(ObservedStep {
            obs: s.obs,
            terminated: s.terminated,
            truncated: s.truncated,
        })
    }

    pub fn observe(&self) -> Vec<f64> {
        self.inner.observe()
    }

    pub fn set_physical(&mut self, physical: &PhysicalState) -> Result<()> {
        self.inner.set_physical(physical)
    }

    pub fn get_state(&self) -> EnvState {
        self.inner.get_state()
    }

    pub fn set_state(&mut self, state: &EnvState) -> Result<()> {
        self.inner.set_state(state)
    }

    pub fn perturbations(&self) -> Vec<PerturbationKind> {
        self.inner.perturbations()
    }

    /// Ground-truth returns of episodes finished since the last call.
    pub fn take_finished_returns(&mut self) -> Vec<f64> {
        std::mem::take(&mut self.finished)
    }
}
