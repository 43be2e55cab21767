//! Decision-time planning by random shooting over policy-sampled candidates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{Env, PhysicalState, Trajectory};
use crate::error::{Error, Result};
use crate::imitation::{reward, Discriminator, GaussianPolicy, ValueFn};
use crate::rng::{candidate_stream, reset_stream, Rng, Seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutPolicy {
    PolicyMean,
    PolicySample,
    UniformRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    PolicySample,
    UniformRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub budget: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub rollout_policy: RolloutPolicy,
    pub candidate_source: CandidateSource,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            budget: 20,
            horizon: 50,
            gamma: 0.99,
            rollout_policy: RolloutPolicy::PolicyMean,
            candidate_source: CandidateSource::PolicySample,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("planner budget must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "planner gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Random candidates scored by the inferred reward alone.
    pub fn reward_only(mut self) -> Self {
        self.candidate_source = CandidateSource::UniformRandom;
        self.rollout_policy = RolloutPolicy::UniformRandom;
        self
    }
}

/// Truncated return `sum_k gamma^k r_k + gamma^L V(s_L)`, with the value
/// term dropped after a termination.
pub fn estimate_return(
    rewards: &[f64],
    terminal_value: f64,
    gamma: f64,
    terminated: bool,
) -> Result<f64> {
    let mut total = 0.0;
    let mut discount = 1.0;
    for (k, r) in rewards.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::PlanningAborted(format!("non-finite reward at rollout step {k}")));
        }
        total += discount * r;
        discount *= gamma;
    }
    if terminated {
        return Ok(total);
    }
    if !terminal_value.is_finite() {
        return Err(Error::PlanningAborted("non-finite terminal value".into()));
    }
    Ok(total + discount * terminal_value)
}

/// One simulated candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRollout {
    pub first_action: Vec<f64>,
    /// Model observations and actions scored by the reward.
    pub visited: Vec<(Vec<f64>, Vec<f64>)>,
    pub terminal_obs: Vec<f64>,
    pub terminated: bool,
    /// `-inf` when the model diverged.
    pub estimated_return: f64,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanDiagnostics {
    pub chosen_index: usize,
    pub scores: Vec<f64>,
}

impl PlanDiagnostics {
    fn finite(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().copied().filter(|s| s.is_finite())
    }

    pub fn best_score(&self) -> f64 {
        self.scores[self.chosen_index]
    }

    pub fn mean_score(&self) -> f64 {
        let n = self.finite().count() as f64;
        self.finite().sum::<f64>() / n
    }

    pub fn score_std(&self) -> f64 {
        let n = self.finite().count() as f64;
        let m = self.mean_score();
        (self.finite().map(|s| (s - m).powi(2)).sum::<f64>() / n).sqrt()
    }
}

pub const DIAGNOSTICS_HEADER: &str = "step, chosen_index, best_score, mean_score, score_std";

pub fn diagnostics_csv(rows: &[PlanDiagnostics]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for (t, d) in rows.iter().enumerate() {
        writeln!(
            out,
            "{t}, {}, {}, {}, {}",
            d.chosen_index,
            d.best_score(),
            d.mean_score(),
            d.score_std()
        )
        .unwrap();
    }
    out
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > f64::NEG_INFINITY && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// The trained triple plus the simulator used as the model.
pub struct Planner<'a> {
    pub policy: &'a GaussianPolicy,
    pub discriminator: &'a Discriminator,
    pub value: &'a ValueFn,
    /// Train-mode, noise-free simulator.
    pub model: &'a dyn Env,
    pub config: PlannerConfig,
    /// Worker pool for candidate rollouts; serial when absent.
    pub pool: Option<&'a rayon::ThreadPool>,
}

impl Planner<'_> {
    fn next_action(&self, obs: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        match self.config.rollout_policy {
            RolloutPolicy::PolicyMean => Ok(self.policy.bounds.clip(&self.policy.mean(obs)?)),
            RolloutPolicy::PolicySample => Ok(self.policy.sample(obs, rng)?.1),
            RolloutPolicy::UniformRandom => Ok(self.model.action_bounds().sample_uniform(rng)),
        }
    }

    /// Draws candidate `index` from `obs` and simulates it in a fresh copy of
    /// the model synchronised to `physical`.
    pub fn rollout_candidate(
        &self,
        physical: &PhysicalState,
        obs: &[f64],
        episode: Seed,
        step: usize,
        index: usize,
    ) -> Result<CandidateRollout> {
        let mut rng = candidate_stream(episode, step, index);
        let first_action = match self.config.candidate_source {
            CandidateSource::PolicySample => self.policy.sample(obs, &mut rng)?.1,
            CandidateSource::UniformRandom => self.model.action_bounds().sample_uniform(&mut rng),
        };
        let mut model = self.model.clone_box();
        model.set_physical(physical)?;
        let mut s = model.observe();
        let mut a = first_action.clone();
        let mut visited = Vec::with_capacity(self.config.horizon);
        let mut rewards = Vec::with_capacity(self.config.horizon);
        let mut terminated = false;
        for k in 0..self.config.horizon {
            if k > 0 {
                a = self.next_action(&s, &mut rng)?;
            }
            rewards.push(reward(self.discriminator, &s, &a)?);
            let step = match model.step(&a) {
                Ok(step) => step,
                Err(Error::SimulationDiverged { .. }) => {
                    return Ok(CandidateRollout {
                        first_action,
                        visited,
                        terminal_obs: s,
                        terminated: false,
                        estimated_return: f64::NEG_INFINITY,
                        diverged: true,
                    })
                }
                Err(e) => return Err(e),
            };
            visited.push((std::mem::replace(&mut s, step.obs), a.clone()));
            if step.terminated {
                terminated = true;
                break;
            }
        }
        let terminal_value = if terminated { 0.0 } else { self.value.value(&s)? };
        let estimated_return =
            estimate_return(&rewards, terminal_value, self.config.gamma, terminated)?;
        Ok(CandidateRollout {
            first_action,
            visited,
            terminal_obs: s,
            terminated,
            estimated_return,
            diverged: false,
        })
    }

    /// Scores all candidates and returns the first action of the best one.
    pub fn plan_action(
        &self,
        physical: &PhysicalState,
        obs: &[f64],
        episode: Seed,
        step: usize,
    ) -> Result<(Vec<f64>, PlanDiagnostics)> {
        self.config.validate()?;
        let run = |i: usize| self.rollout_candidate(physical, obs, episode, step, i);
        let rollouts: Vec<CandidateRollout> = match self.pool {
            Some(pool) => pool.install(|| {
                (0..self.config.budget)
                    .into_par_iter()
                    .map(run)
                    .collect::<Result<_>>()
            })?,
            None => (0..self.config.budget).map(run).collect::<Result<_>>()?,
        };
        let scores: Vec<f64> = rollouts.iter().map(|r| r.estimated_return).collect();
        let chosen_index = argmax_lowest(&scores).ok_or_else(|| {
            Error::PlanningAborted(format!("all {} candidates diverged at step {step}", scores.len()))
        })?;
        let action = rollouts.into_iter().nth(chosen_index).unwrap().first_action;
        Ok((action, PlanDiagnostics { chosen_index, scores }))
    }

    /// Closed-loop planning in `env` for one episode seeded by `episode`.
    /// The model is re-synchronised to the true physical state every step.
    pub fn run_episode(
        &self,
        env: &mut dyn Env,
        episode: Seed,
        mut diagnostics: Option<&mut Vec<PlanDiagnostics>>,
    ) -> Result<Trajectory> {
        if env.obs_dim() != self.model.obs_dim() || env.action_dim() != self.model.action_dim() {
            return Err(Error::Config(
                "test env and planning model disagree on dimensions".into(),
            ));
        }
        let (_, obs) = env.reset(&mut reset_stream(episode));
        let mut traj = Trajectory::new(obs, env.discount());
        for t in 0..env.max_steps() {
            let obs = traj.states.last().unwrap().clone();
            let (action, diag) = self.plan_action(&env.physical(), &obs, episode, t)?;
            if let Some(d) = diagnostics.as_deref_mut() {
                d.push(diag);
            }
            let step = env.step(&action)?;
            let done = step.done();
            traj.push(action, &step);
            if done {
                break;
            }
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_is_value() {
        assert_eq!(estimate_return(&[], 7.0, 0.99, false).unwrap(), 7.0);
    }

    #[test]
    fn hand_geometric_sum() {
        let r = estimate_return(&[1.0, 1.0, 1.0], 2.0, 0.5, false).unwrap();
        assert_eq!(r, 2.0);
    }

    #[test]
    fn termination_drops_value() {
        assert_eq!(estimate_return(&[1.0, 1.0], f64::NAN, 0.5, true).unwrap(), 1.5);
    }

    #[test]
    fn zero_gamma_is_first_reward() {
        assert_eq!(estimate_return(&[3.25, 9.0, 1.0], 4.0, 0.0, false).unwrap(), 3.25);
    }

    #[test]
    fn non_finite_inputs_abort() {
        assert!(matches!(
            estimate_return(&[f64::NAN], 0.0, 0.9, false),
            Err(Error::PlanningAborted(_))
        ));
        assert!(matches!(
            estimate_return(&[], f64::INFINITY, 0.9, false),
            Err(Error::PlanningAborted(_))
        ));
    }

    #[test]
    fn argmax_picks_best_and_lowest_tie() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax_lowest(&[2.0, 5.0, 5.0]), Some(1));
        assert_eq!(argmax_lowest(&[f64::NEG_INFINITY, -1.0]), Some(1));
        assert_eq!(argmax_lowest(&[f64::NEG_INFINITY; 3]), None);
    }

    #[test]
    fn zero_budget_rejected() {
        let cfg = PlannerConfig {
            budget: 0,
            ..PlannerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
