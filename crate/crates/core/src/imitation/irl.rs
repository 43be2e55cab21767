use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::discriminator::{concat, discriminator_update, reward, Discriminator};
use super::gae::{gae_advantages, normalize_advantages};
use super::policy::GaussianPolicy;
use super::ppo::{policy_update, PpoBatch, PpoOptimizers};
use super::value::ValueFn;
use crate::envs::{DemoSet, RewardFreeEnv};
use crate::error::{Error, Result};
use crate::net::{Optimizer, DEFAULT_HIDDEN};
use crate::rng::{reset_stream, Rng, Seed};
use rand_distr::{Distribution, StandardNormal};

pub const LOG_HEADER: &str =
    "iteration, mean_return, disc_loss, mean_inferred_reward, policy_kl, value_loss";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrlConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub batch_steps: usize,
    pub generator_steps: usize,
    pub discriminator_steps: usize,
    pub disc_entropy_coeff: f64,
    pub value_steps: usize,
    pub clip: f64,
    pub target_kl: f64,
    pub iterations: usize,
    pub expert_noise_sigma: f64,
    pub minibatch: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub disc_lr: f64,
    pub log_std_init: f64,
    pub log_std_floor: f64,
    /// Weight of the squared excess of the policy mean outside the action box.
    pub bound_penalty: f64,
    pub hidden: Vec<usize>,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            gamma: 0.99,
            lambda: 0.98,
            batch_steps: 1000,
            generator_steps: 3,
            discriminator_steps: 1,
            disc_entropy_coeff: 0.01,
            value_steps: 3,
            clip: 0.2,
            target_kl: 0.02,
            iterations: 600,
            expert_noise_sigma: 0.0,
            minibatch: 250,
            policy_lr: 1e-4,
            value_lr: 1e-3,
            disc_lr: 1e-4,
            log_std_init: 0.5f64.ln(),
            log_std_floor: 0.05f64.ln(),
            bound_penalty: 1.0,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl IrlConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("irl: {msg}")));
        if self.batch_steps == 0
            || self.generator_steps == 0
            || self.discriminator_steps == 0
            || self.value_steps == 0
            || self.minibatch == 0
        {
            return bad("all step counts must be >= 1");
        }
        if !(0.0..1.0).contains(&self.gamma) || !(0.0..1.0).contains(&self.lambda) {
            return bad("gamma and lambda must lie in [0, 1)");
        }
        if !(self.clip > 0.0) || !(self.target_kl > 0.0) {
            return bad("clip and target_kl must be positive");
        }
        if !(self.expert_noise_sigma >= 0.0) || !(self.disc_entropy_coeff >= 0.0) || !(self.bound_penalty >= 0.0) {
            return bad("expert_noise_sigma, disc_entropy_coeff and bound_penalty must be non-negative");
        }
        if !(self.policy_lr > 0.0 && self.value_lr > 0.0 && self.disc_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.log_std_init < self.log_std_floor {
            return bad("log_std_init is below log_std_floor");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IrlLogRow {
    pub iteration: usize,
    /// Mean ground-truth return of episodes that finished this iteration
    /// (carried over when none did).
    pub mean_return: f64,
    pub disc_loss: f64,
    pub mean_inferred_reward: f64,
    pub policy_kl: f64,
    pub value_loss: f64,
}

pub fn log_to_csv(rows: &[IrlLogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{}, {}, {}, {}, {}, {}",
            r.iteration, r.mean_return, r.disc_loss, r.mean_inferred_reward, r.policy_kl, r.value_loss
        )
        .unwrap();
    }
    out
}

pub fn write_log(rows: &[IrlLogRow], path: &Path) -> Result<()> {
    std::fs::write(path, log_to_csv(rows))?;
    Ok(())
}

/// The trained triple plus its training log.
#[derive(Clone, Debug)]
pub struct IrlOutcome {
    pub policy: GaussianPolicy,
    pub discriminator: Discriminator,
    pub value: ValueFn,
    pub log: Vec<IrlLogRow>,
}

/// One collected on-policy step.
struct Sample {
    obs: Vec<f64>,
    raw: Vec<f64>,
    executed: Vec<f64>,
    log_prob: f64,
    next_obs: Vec<f64>,
    terminated: bool,
    /// Last step of an episode or of the batch.
    segment_end: bool,
}

struct Collector {
    obs: Option<Vec<f64>>,
    episodes: u64,
    seed: Seed,
}

impl Collector {
    fn collect(
        &mut self,
        env: &mut RewardFreeEnv,
        policy: &GaussianPolicy,
        steps: usize,
        rng: &mut Rng,
    ) -> Result<Vec<Sample>> {
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let obs = match self.obs.take() {
                Some(o) => o,
                None => {
                    self.episodes += 1;
                    env.reset(&mut reset_stream(self.seed.index(self.episodes - 1)))
                }
            };
            let (raw, executed) = policy.sample(&obs, rng)?;
            let log_prob = policy.log_prob(&obs, &raw)?;
            let step = env.step(&executed)?;
            let done = step.terminated || step.truncated;
            if !done {
                self.obs = Some(step.obs.clone());
            }
            out.push(Sample {
                obs,
                raw,
                executed,
                log_prob,
                next_obs: step.obs,
                terminated: step.terminated,
                segment_end: done,
            });
        }
        if let Some(last) = out.last_mut() {
            last.segment_end = true;
        }
        Ok(out)
    }
}

fn expert_inputs(demos: &DemoSet) -> Vec<Vec<f64>> {
    demos
        .states
        .iter()
        .zip(&demos.actions)
        .map(|(s, a)| concat(s, a))
        .collect()
}

/// Adversarial imitation: alternate on-policy collection, relabelling with the
/// discriminator reward, advantage estimation, a policy/value update and a
/// discriminator update.
pub fn irl_train(
    env: &mut RewardFreeEnv,
    demos: &DemoSet,
    cfg: &IrlConfig,
    seed: Seed,
) -> Result<IrlOutcome> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::Config("adversarial training needs at least one demo pair".into()));
    }
    if demos.obs_dim != env.obs_dim() || demos.act_dim != env.action_dim() {
        return Err(Error::Config(format!(
            "demos are {}+{} dimensional, env is {}+{}",
            demos.obs_dim,
            demos.act_dim,
            env.obs_dim(),
            env.action_dim()
        )));
    }
    let mut init = seed.derive("init").rng();
    let mut policy = GaussianPolicy::new(
        env.obs_dim(),
        env.action_bounds().clone(),
        &cfg.hidden,
        cfg.log_std_init,
        &mut init,
    )?;
    let mut value = ValueFn::new(env.obs_dim(), &cfg.hidden, &mut init)?;
    let mut disc = Discriminator::new(env.obs_dim() + env.action_dim(), &cfg.hidden, &mut init)?;
    let mut ppo_opts = PpoOptimizers::adam(cfg.policy_lr, cfg.value_lr);
    let mut disc_opt = Optimizer::adam(cfg.disc_lr);

    let expert = expert_inputs(demos);
    for x in &expert {
        disc.normalizer.observe(x);
    }
    let mut collector = Collector {
        obs: None,
        episodes: 0,
        seed: seed.derive("episodes"),
    };
    let mut log = Vec::with_capacity(cfg.iterations);
    let mut last_return = f64::NAN;

    for it in 0..cfg.iterations {
        let at = |e: Error| e.within(format!("iteration {it}"));
        let iter_seed = seed.derive("iteration").index(it as u64);
        let mut act_rng = iter_seed.derive("actions").rng();
        let samples = collector
            .collect(env, &policy, cfg.batch_steps, &mut act_rng)
            .map_err(at)?;
        let agent: Vec<Vec<f64>> = samples.iter().map(|s| concat(&s.obs, &s.executed)).collect();
        if !disc.normalizer.is_frozen() {
            for x in &agent {
                disc.normalizer.observe(x);
            }
            disc.normalizer.freeze();
        }

        let mut rewards = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for s in &samples {
            rewards.push(reward(&disc, &s.obs, &s.executed).map_err(at)?);
            values.push(value.value(&s.obs).map_err(at)?);
        }
        let mean_inferred_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;

        let mut batch = PpoBatch::default();
        let mut start = 0;
        for (end, s) in samples.iter().enumerate() {
            if !s.segment_end {
                continue;
            }
            let bootstrap = if s.terminated {
                0.0
            } else {
                value.value(&s.next_obs).map_err(at)?
            };
            let mut seg_values = values[start..=end].to_vec();
            seg_values.push(bootstrap);
            let (adv, targets) =
                gae_advantages(&rewards[start..=end], &seg_values, cfg.gamma, cfg.lambda)
                    .map_err(at)?;
            batch.advantages.extend(adv);
            batch.value_targets.extend(targets);
            start = end + 1;
        }
        normalize_advantages(&mut batch.advantages);
        for s in samples {
            batch.obs.push(s.obs);
            batch.actions.push(s.raw);
            batch.old_log_probs.push(s.log_prob);
        }
        let mut upd_rng = iter_seed.derive("minibatches").rng();
        let stats = policy_update(&mut policy, &mut value, &batch, cfg, &mut ppo_opts, &mut upd_rng)
            .map_err(at)?;

        let noisy;
        let expert_batch = if cfg.expert_noise_sigma > 0.0 {
            let mut noise_rng = iter_seed.derive("expert-noise").rng();
            noisy = expert
                .iter()
                .map(|x| {
                    x.iter()
                        .map(|v| {
                            let z: f64 = StandardNormal.sample(&mut noise_rng);
                            v + cfg.expert_noise_sigma * z
                        })
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>();
            &noisy
        } else {
            &expert
        };
        let disc_loss = discriminator_update(
            &mut disc,
            &mut disc_opt,
            expert_batch,
            &agent,
            cfg.disc_entropy_coeff,
            cfg.discriminator_steps,
        )
        .map_err(at)?;

        let finished = env.take_finished_returns();
        if !finished.is_empty() {
            last_return = finished.iter().sum::<f64>() / finished.len() as f64;
        }
        log.push(IrlLogRow {
            iteration: it,
            mean_return: last_return,
            disc_loss,
            mean_inferred_reward,
            policy_kl: stats.policy_kl,
            value_loss: stats.value_loss,
        });
    }
    Ok(IrlOutcome {
        policy,
        discriminator: disc,
        value,
        log,
    })
}
