use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::policy::GaussianPolicy;
use crate::envs::{ActionBounds, DemoSet};
use crate::error::{Error, Result};
use crate::net::{Gradients, Optimizer, DEFAULT_HIDDEN};
use crate::rng::Seed;

pub const BC_LOG_STD: f64 = -std::f64::consts::LN_10; // ln 0.1

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcConfig {
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            dropout_rate: 0.0,
            epochs: 500,
            learning_rate: 1e-4,
            batch_size: 32,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "bc dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Config(
                "bc needs epochs >= 1, batch_size >= 1 and a positive learning rate".into(),
            ));
        }
        Ok(())
    }
}

/// Mean squared action error over every demo pair.
pub fn bc_loss(policy: &GaussianPolicy, demos: &DemoSet) -> Result<f64> {
    let mut total = 0.0;
    for (s, a) in demos.states.iter().zip(&demos.actions) {
        let m = policy.mean(s)?;
        total += m.iter().zip(a).map(|(m, a)| (m - a).powi(2)).sum::<f64>();
    }
    Ok(total / demos.len() as f64)
}

/// Regresses the policy mean onto demonstrated actions. Returns the policy
/// (standard deviation fixed at 0.1) and the full-data loss after each epoch.
pub fn bc_train(
    demos: &DemoSet,
    bounds: ActionBounds,
    cfg: &BcConfig,
    seed: Seed,
) -> Result<(GaussianPolicy, Vec<f64>)> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::Config("behavioral cloning needs at least one demo pair".into()));
    }
    let mut policy = GaussianPolicy::new(
        demos.obs_dim,
        bounds,
        &cfg.hidden,
        BC_LOG_STD,
        &mut seed.derive("init").rng(),
    )?;
    policy.mean_net = policy.mean_net.clone().with_dropout(cfg.dropout_rate)?;
    let mut opt = Optimizer::adam(cfg.learning_rate);
    let mut rng = seed.derive("bc").rng();
    let mut order: Vec<usize> = (0..demos.len()).collect();
    let mut grads = Gradients::zeros_like(&policy.mean_net);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            let n = chunk.len() as f64;
            for &i in chunk {
                let dropout_rng = (cfg.dropout_rate > 0.0).then_some(&mut rng);
                let trace = policy.mean_net.forward_train(&demos.states[i], dropout_rng)?;
                let upstream: Vec<f64> = trace
                    .output()
                    .iter()
                    .zip(&demos.actions[i])
                    .map(|(m, a)| 2.0 * (m - a) / n)
                    .collect();
                policy.mean_net.backward_accumulate(&trace, &upstream, &mut grads)?;
            }
            opt.step_mlp(&mut policy.mean_net, &grads)
                .map_err(|e| e.within(format!("bc epoch {epoch}")))?;
        }
        let loss = bc_loss(&policy, demos)?;
        if !loss.is_finite() {
            return Err(Error::diverged(format!("bc epoch {epoch}"), "non-finite loss"));
        }
        losses.push(loss);
    }
    Ok((policy, losses))
}
