use rand::seq::SliceRandom;

use super::irl::IrlConfig;
use super::policy::GaussianPolicy;
use super::value::ValueFn;
use crate::error::{Error, Result};
use crate::net::{Gradients, Optimizer};
use crate::rng::Rng;

/// On-policy samples for one update. `actions` are the unclipped draws whose
/// log-densities were recorded in `old_log_probs`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub value_targets: Vec<f64>,
}

impl PpoBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.obs.len();
        if n == 0
            || [
                self.actions.len(),
                self.advantages.len(),
                self.old_log_probs.len(),
                self.value_targets.len(),
            ]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::RejectedInput(
                "update batch is empty or its columns differ in length".into(),
            ));
        }
        Ok(())
    }
}

/// Optimiser state carried across updates.
#[derive(Clone, Debug)]
pub struct PpoOptimizers {
    pub mean: Optimizer,
    pub log_std: Optimizer,
    pub value: Optimizer,
}

impl PpoOptimizers {
    pub fn adam(policy_lr: f64, value_lr: f64) -> Self {
        PpoOptimizers {
            mean: Optimizer::adam(policy_lr),
            log_std: Optimizer::adam(policy_lr),
            value: Optimizer::adam(value_lr),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    /// Sample estimate of KL(old || new) on the last minibatch visited.
    pub policy_kl: f64,
    pub value_loss: f64,
    pub early_stopped: bool,
}

/// Clipped-ratio surrogate ascent on the policy followed by squared-error
/// regression of the value function onto `value_targets`.
pub fn policy_update(
    policy: &mut GaussianPolicy,
    value: &mut ValueFn,
    batch: &PpoBatch,
    cfg: &IrlConfig,
    opts: &mut PpoOptimizers,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    batch.check()?;
    let n = batch.len();
    let mb = cfg.minibatch.clamp(1, n);
    let k = policy.action_dim();
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let mut grads = Gradients::zeros_like(&policy.mean_net);

    'epochs: for _ in 0..cfg.generator_steps {
        order.shuffle(rng);
        for chunk in order.chunks(mb) {
            let m = chunk.len() as f64;
            grads.fill_zero();
            let mut g_log_std = vec![0.0; k];
            let mut kl = 0.0;
            let var: Vec<f64> = policy.log_std.iter().map(|l| (2.0 * l).exp()).collect();
            for &i in chunk {
                let trace = policy.mean_net.forward_train(&batch.obs[i], None)?;
                let mean = trace.output();
                let action = &batch.actions[i];
                let logp = policy.log_prob_given_mean(mean, action);
                let ratio = (logp - batch.old_log_probs[i]).exp();
                if !ratio.is_finite() {
                    return Err(Error::diverged("policy update", "non-finite importance ratio"));
                }
                kl += batch.old_log_probs[i] - logp;
                let mut upstream: Vec<f64> = (0..k)
                    .map(|j| {
                        let excess = mean[j] - mean[j].clamp(policy.bounds.low[j], policy.bounds.high[j]);
                        2.0 * cfg.bound_penalty * excess / m
                    })
                    .collect();
                let adv = batch.advantages[i];
                let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                if adv != 0.0 && ratio * adv <= clipped * adv {
                    let c = -ratio * adv / m;
                    for j in 0..k {
                        let d = action[j] - mean[j];
                        upstream[j] += c * d / var[j];
                        g_log_std[j] += c * (d * d / var[j] - 1.0);
                    }
                }
                if upstream.iter().any(|u| *u != 0.0) {
                    policy
                        .mean_net
                        .backward_accumulate(&trace, &upstream, &mut grads)?;
                }
            }
            stats.policy_kl = kl / m;
            if stats.policy_kl > cfg.target_kl {
                stats.early_stopped = true;
                break 'epochs;
            }
            opts.mean
                .step_mlp(&mut policy.mean_net, &grads)
                .map_err(|e| e.within("policy"))?;
            opts.log_std
                .step(&mut [&mut policy.log_std], &[&g_log_std])
                .map_err(|e| e.within("policy log_std"))?;
            for l in &mut policy.log_std {
                *l = l.max(cfg.log_std_floor);
            }
        }
    }

    for _ in 0..cfg.value_steps {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(mb) {
            let loss = value.fit_step(&mut opts.value, &batch.obs, &batch.value_targets, chunk)?;
            total += loss * chunk.len() as f64;
        }
        stats.value_loss = total / n as f64;
    }
    Ok(stats)
}
