//! Test-time perturbations as environment wrappers.
//!
//! Nuisance wrappers only touch observations; noise wrappers only touch the
//! executed action or the next physical state. Every wrapper draws from its
//! own stream, which is part of the saved [`EnvState`].

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envs::{ActionBounds, Env, EnvState, LayerState, PhysicalState, Step};
use crate::error::{Error, Result};
use crate::rng::{Rng, Seed};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    #[default]
    None,
    ActionNuisance,
    StateNuisance,
    MotorNoise,
    TransitionNoise,
}

impl PerturbationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::ActionNuisance => "action_nuisance",
            PerturbationKind::StateNuisance => "state_nuisance",
            PerturbationKind::MotorNoise => "motor_noise",
            PerturbationKind::TransitionNoise => "transition_noise",
        }
    }

    pub fn is_nuisance(self) -> bool {
        matches!(
            self,
            PerturbationKind::ActionNuisance | PerturbationKind::StateNuisance
        )
    }

    pub fn is_noise(self) -> bool {
        matches!(
            self,
            PerturbationKind::MotorNoise | PerturbationKind::TransitionNoise
        )
    }

    /// Noise levels swept for each noise kind, including the unperturbed 0.
    pub fn sigma_grid(self) -> &'static [f64] {
        match self {
            PerturbationKind::MotorNoise => &[0.0, 0.1, 0.2, 0.5, 1.0],
            PerturbationKind::TransitionNoise => &[0.0, 0.001, 0.002, 0.005, 0.01],
            _ => &[0.0],
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PerturbationKind::None,
            PerturbationKind::ActionNuisance,
            PerturbationKind::StateNuisance,
            PerturbationKind::MotorNoise,
            PerturbationKind::TransitionNoise,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Config(format!("unknown perturbation kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Confounders present.
    Train,
    /// Confounders removed or replaced by noise.
    #[default]
    Test,
}

/// Which perturbation wraps an environment, and how strongly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub sigma: f64,
    /// Speed threshold of the state nuisance; the env default when unset.
    pub v_th: Option<f64>,
    pub mode: Mode,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            kind: PerturbationKind::None,
            sigma: 0.0,
            v_th: None,
            mode: Mode::Test,
        }
    }
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn noise(kind: PerturbationKind, sigma: f64) -> Self {
        PerturbationSpec {
            kind,
            sigma,
            ..Self::default()
        }
    }

    pub fn nuisance(kind: PerturbationKind) -> Self {
        PerturbationSpec {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "perturbation sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        if let Some(v) = self.v_th {
            if !v.is_finite() {
                return Err(Error::Config("perturbation v_th must be finite".into()));
            }
        }
        Ok(())
    }

    /// Sigma for noise kinds, zero otherwise.
    pub fn effective_sigma(&self) -> f64 {
        if self.kind.is_noise() {
            self.sigma
        } else {
            0.0
        }
    }

    /// The environment agents train in, which is also the planner's model:
    /// nuisances present in train mode, no noise.
    pub fn train_env(&self, base: Box<dyn Env>, v_th_default: f64) -> Result<Box<dyn Env>> {
        self.validate()?;
        match self.kind {
            PerturbationKind::ActionNuisance => wrap_action_nuisance(base, Mode::Train, Seed::new(0)),
            PerturbationKind::StateNuisance => {
                wrap_state_nuisance(base, self.v_th.unwrap_or(v_th_default), Mode::Train)
            }
            _ => Ok(base),
        }
    }

    /// The environment used for zero-shot evaluation, in `self.mode`.
    pub fn eval_env(&self, base: Box<dyn Env>, v_th_default: f64, seed: Seed) -> Result<Box<dyn Env>> {
        self.validate()?;
        match self.kind {
            PerturbationKind::None => Ok(base),
            PerturbationKind::ActionNuisance => wrap_action_nuisance(base, self.mode, seed),
            PerturbationKind::StateNuisance => {
                wrap_state_nuisance(base, self.v_th.unwrap_or(v_th_default), self.mode)
            }
            PerturbationKind::MotorNoise => {
                wrap_motor_noise(base, self.sigma, &mut seed.derive("motor").rng())
            }
            PerturbationKind::TransitionNoise => {
                wrap_transition_noise(base, self.sigma, &mut seed.derive("transition").rng())
            }
        }
    }
}

fn refuse_double(env: &dyn Env, kind: PerturbationKind) -> Result<()> {
    if env.perturbations().contains(&kind) {
        return Err(Error::Config(format!(
            "environment is already wrapped with {kind}"
        )));
    }
    Ok(())
}

fn split_layer(state: &EnvState) -> Result<(EnvState, &LayerState)> {
    let (last, rest) = state
        .layers
        .split_last()
        .ok_or_else(|| Error::State("state is missing a wrapper layer".into()))?;
    Ok((
        EnvState {
            physical: state.physical.clone(),
            layers: rest.to_vec(),
        },
        last,
    ))
}

fn gaussian(stream: &mut Rng, sigma: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(stream);
            sigma * z
        })
        .collect()
}

fn fresh_stream(rng: &mut Rng) -> Rng {
    Rng::seed_from_u64(rng.next_u64())
}

macro_rules! delegate_common {
    () => {
        fn name(&self) -> &'static str {
            self.inner.name()
        }
        fn action_bounds(&self) -> &ActionBounds {
            self.inner.action_bounds()
        }
        fn discount(&self) -> f64 {
            self.inner.discount()
        }
        fn max_steps(&self) -> usize {
            self.inner.max_steps()
        }
        fn physical(&self) -> PhysicalState {
            self.inner.physical()
        }
        fn speed(&self) -> f64 {
            self.inner.speed()
        }
        fn expert_threshold(&self) -> f64 {
            self.inner.expert_threshold()
        }
    };
}

/// Appends the previous executed action (train) or standard-normal noise
/// (test) to every observation.
#[derive(Clone)]
pub struct ActionNuisance {
    inner: Box<dyn Env>,
    mode: Mode,
    stream: Rng,
    noise: Vec<f64>,
}

pub fn wrap_action_nuisance(env: Box<dyn Env>, mode: Mode, seed: Seed) -> Result<Box<dyn Env>> {
    refuse_double(env.as_ref(), PerturbationKind::ActionNuisance)?;
    let k = env.action_dim();
    Ok(Box::new(ActionNuisance {
        inner: env,
        mode,
        stream: seed.derive("action-nuisance").rng(),
        noise: vec![0.0; k],
    }))
}

impl ActionNuisance {
    fn redraw(&mut self) {
        if self.mode == Mode::Test {
            self.noise = gaussian(&mut self.stream, 1.0, self.inner.action_dim());
        }
    }
}

impl Env for ActionNuisance {
    delegate_common!();

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim() + self.inner.action_dim()
    }

    fn reset(&mut self, rng: &mut Rng) -> (EnvState, Vec<f64>) {
        self.inner.reset(rng);
        self.stream = fresh_stream(rng);
        self.redraw();
        (self.get_state(), self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let mut step = self.inner.step(action)?;
        self.redraw();
        step.obs = self.observe();
        Ok(step)
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = self.inner.observe();
        match self.mode {
            Mode::Train => obs.extend(self.inner.physical().prev_action),
            Mode::Test => obs.extend_from_slice(&self.noise),
        }
        obs
    }

    fn get_state(&self) -> EnvState {
        let mut s = self.inner.get_state();
        s.layers.push(LayerState {
            stream: self.stream.clone(),
            values: self.noise.clone(),
        });
        s
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        let (rest, layer) = split_layer(state)?;
        if layer.values.len() != self.inner.action_dim() {
            return Err(Error::State("action-nuisance layer has wrong width".into()));
        }
        self.inner.set_state(&rest)?;
        self.stream = layer.stream.clone();
        self.noise = layer.values.clone();
        Ok(())
    }

    fn set_physical(&mut self, physical: &PhysicalState) -> Result<()> {
        self.inner.set_physical(physical)
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        self.inner.expert_action(&obs[..self.inner.obs_dim()])
    }

    fn perturbations(&self) -> Vec<PerturbationKind> {
        let mut p = self.inner.perturbations();
        p.push(PerturbationKind::ActionNuisance);
        p
    }

    fn clone_box(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Appends a speed indicator: `1` when speed >= `v_th` in train mode, always
/// `0` in test mode.
#[derive(Clone)]
pub struct StateNuisance {
    inner: Box<dyn Env>,
    v_th: f64,
    mode: Mode,
}

pub fn wrap_state_nuisance(env: Box<dyn Env>, v_th: f64, mode: Mode) -> Result<Box<dyn Env>> {
    refuse_double(env.as_ref(), PerturbationKind::StateNuisance)?;
    Ok(Box::new(StateNuisance {
        inner: env,
        v_th,
        mode,
    }))
}

impl Env for StateNuisance {
    delegate_common!();

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim() + 1
    }

    fn reset(&mut self, rng: &mut Rng) -> (EnvState, Vec<f64>) {
        self.inner.reset(rng);
        (self.get_state(), self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let mut step = self.inner.step(action)?;
        step.obs = self.observe();
        Ok(step)
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = self.inner.observe();
        let on = self.mode == Mode::Train && self.inner.speed() >= self.v_th;
        obs.push(if on { 1.0 } else { 0.0 });
        obs
    }

    fn get_state(&self) -> EnvState {
        let mut s = self.inner.get_state();
        s.layers.push(LayerState {
            stream: Rng::seed_from_u64(0),
            values: Vec::new(),
        });
        s
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        let (rest, _) = split_layer(state)?;
        self.inner.set_state(&rest)
    }

    fn set_physical(&mut self, physical: &PhysicalState) -> Result<()> {
        self.inner.set_physical(physical)
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        self.inner.expert_action(&obs[..self.inner.obs_dim()])
    }

    fn perturbations(&self) -> Vec<PerturbationKind> {
        let mut p = self.inner.perturbations();
        p.push(PerturbationKind::StateNuisance);
        p
    }

    fn clone_box(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Executes `clip(a + eps)`, `eps ~ N(0, sigma^2 I)` drawn fresh each step.
#[derive(Clone)]
pub struct MotorNoise {
    inner: Box<dyn Env>,
    sigma: f64,
    stream: Rng,
    last_noise: Vec<f64>,
}

pub fn wrap_motor_noise(env: Box<dyn Env>, sigma: f64, rng: &mut Rng) -> Result<Box<dyn Env>> {
    Ok(Box::new(MotorNoise::new(env, sigma, rng)?))
}

impl MotorNoise {
    pub fn new(env: Box<dyn Env>, sigma: f64, rng: &mut Rng) -> Result<Self> {
        PerturbationSpec::noise(PerturbationKind::MotorNoise, sigma).validate()?;
        refuse_double(env.as_ref(), PerturbationKind::MotorNoise)?;
        let k = env.action_dim();
        Ok(MotorNoise {
            inner: env,
            sigma,
            stream: fresh_stream(rng),
            last_noise: vec![0.0; k],
        })
    }

    /// Pre-clip noise added to the most recent action.
    pub fn last_noise(&self) -> &[f64] {
        &self.last_noise
    }
}

impl Env for MotorNoise {
    delegate_common!();

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn reset(&mut self, rng: &mut Rng) -> (EnvState, Vec<f64>) {
        self.inner.reset(rng);
        self.stream = fresh_stream(rng);
        self.last_noise.fill(0.0);
        (self.get_state(), self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if self.sigma == 0.0 {
            return self.inner.step(action);
        }
        self.last_noise = gaussian(&mut self.stream, self.sigma, action.len());
        let noisy: Vec<f64> = action
            .iter()
            .zip(&self.last_noise)
            .map(|(a, e)| a + e)
            .collect();
        self.inner.step(&noisy)
    }

    fn observe(&self) -> Vec<f64> {
        self.inner.observe()
    }

    fn get_state(&self) -> EnvState {
        let mut s = self.inner.get_state();
        s.layers.push(LayerState {
            stream: self.stream.clone(),
            values: self.last_noise.clone(),
        });
        s
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        let (rest, layer) = split_layer(state)?;
        self.inner.set_state(&rest)?;
        self.stream = layer.stream.clone();
        self.last_noise = layer.values.clone();
        Ok(())
    }

    fn set_physical(&mut self, physical: &PhysicalState) -> Result<()> {
        self.inner.set_physical(physical)
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        self.inner.expert_action(obs)
    }

    fn perturbations(&self) -> Vec<PerturbationKind> {
        let mut p = self.inner.perturbations();
        p.push(PerturbationKind::MotorNoise);
        p
    }

    fn clone_box(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Adds `eps ~ N(0, sigma^2 I)` to the full physical state after each step.
#[derive(Clone)]
pub struct TransitionNoise {
    inner: Box<dyn Env>,
    sigma: f64,
    stream: Rng,
}

pub fn wrap_transition_noise(env: Box<dyn Env>, sigma: f64, rng: &mut Rng) -> Result<Box<dyn Env>> {
    PerturbationSpec::noise(PerturbationKind::TransitionNoise, sigma).validate()?;
    refuse_double(env.as_ref(), PerturbationKind::TransitionNoise)?;
    Ok(Box::new(TransitionNoise {
        inner: env,
        sigma,
        stream: fresh_stream(rng),
    }))
}

impl Env for TransitionNoise {
    delegate_common!();

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn reset(&mut self, rng: &mut Rng) -> (EnvState, Vec<f64>) {
        self.inner.reset(rng);
        self.stream = fresh_stream(rng);
        (self.get_state(), self.observe())
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let mut step = self.inner.step(action)?;
        if self.sigma == 0.0 {
            return Ok(step);
        }
        let mut physical = self.inner.physical();
        let noise = gaussian(&mut self.stream, self.sigma, physical.values.len());
        physical
            .values
            .iter_mut()
            .zip(noise)
            .for_each(|(v, e)| *v += e);
        self.inner.set_physical(&physical)?;
        step.obs = self.observe();
        Ok(step)
    }

    fn observe(&self) -> Vec<f64> {
        self.inner.observe()
    }

    fn get_state(&self) -> EnvState {
        let mut s = self.inner.get_state();
        s.layers.push(LayerState {
            stream: self.stream.clone(),
            values: Vec::new(),
        });
        s
    }

    fn set_state(&mut self, state: &EnvState) -> Result<()> {
        let (rest, layer) = split_layer(state)?;
        self.inner.set_state(&rest)?;
        self.stream = layer.stream.clone();
        Ok(())
    }

    fn set_physical(&mut self, physical: &PhysicalState) -> Result<()> {
        self.inner.set_physical(physical)
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        self.inner.expert_action(obs)
    }

    fn perturbations(&self) -> Vec<PerturbationKind> {
        let mut p = self.inner.perturbations();
        p.push(PerturbationKind::TransitionNoise);
        p
    }

    fn clone_box(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}
