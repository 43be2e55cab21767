use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envs::ActionBounds;
use crate::error::{Error, Result};
use crate::net::{Checkpoint, Head, Mlp};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// How a trained policy picks actions when executed on its own.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    #[default]
    Mean,
    Sample,
}

/// Diagonal Gaussian policy with a state-independent log standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: Vec<f64>,
    pub bounds: ActionBounds,
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        bounds: ActionBounds,
        hidden: &[usize],
        log_std_init: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(bounds.dim());
        let mut mean_net = Mlp::new(&dims, rng)?;
        // small initial means keep early samples near the centre of the box
        mean_net.scale_output_layer(0.01);
        Ok(GaussianPolicy {
            log_std: vec![log_std_init; bounds.dim()],
            mean_net,
            bounds,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    /// Unclipped mean action.
    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(obs)
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Draws `mean + std * z` and returns it with its clipped counterpart.
    /// Log-densities refer to the unclipped draw.
    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
        let mean = self.mean(obs)?;
        let raw: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, l)| {
                let z: f64 = StandardNormal.sample(rng);
                m + l.exp() * z
            })
            .collect();
        let clipped = self.bounds.clip(&raw);
        Ok((raw, clipped))
    }

    /// Executable action under `mode`.
    pub fn act(&self, obs: &[f64], mode: PolicyMode, rng: &mut Rng) -> Result<Vec<f64>> {
        match mode {
            PolicyMode::Mean => Ok(self.bounds.clip(&self.mean(obs)?)),
            PolicyMode::Sample => Ok(self.sample(obs, rng)?.1),
        }
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::RejectedInput(format!(
                "action of length {} for a {}-dimensional policy",
                action.len(),
                self.action_dim()
            )));
        }
        Ok(self.log_prob_given_mean(&self.mean(obs)?, action))
    }

    pub fn log_prob_given_mean(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((m, a), l)| {
                let z = (a - m) / l.exp();
                -0.5 * z * z - l - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.mean_net.clone(),
            head: Head::Policy {
                log_std: self.log_std.clone(),
            },
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint, bounds: ActionBounds) -> Result<Self> {
        let Head::Policy { log_std } = ckpt.head else {
            return Err(Error::State("checkpoint does not hold a policy".into()));
        };
        if log_std.len() != bounds.dim() || ckpt.net.output_dim() != bounds.dim() {
            return Err(Error::State(format!(
                "policy checkpoint has {} action dims, env has {}",
                ckpt.net.output_dim(),
                bounds.dim()
            )));
        }
        Ok(GaussianPolicy {
            mean_net: ckpt.net,
            log_std,
            bounds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng as _;

    fn policy(act_dim: usize) -> GaussianPolicy {
        GaussianPolicy::new(
            3,
            ActionBounds::symmetric(act_dim, 1.0),
            &[8],
            0.5f64.ln(),
            &mut Seed::new(1).rng(),
        )
        .unwrap()
    }

    #[test]
    fn samples_are_clipped_and_mean_is_deterministic() {
        let mut p = policy(2);
        p.log_std = vec![2.0, 2.0];
        let mut rng = Seed::new(2).rng();
        let obs = [0.1, -0.2, 0.3];
        for _ in 0..100 {
            let (_, a) = p.sample(&obs, &mut rng).unwrap();
            assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
        assert_eq!(p.mean(&obs).unwrap(), p.mean(&obs).unwrap());
    }

    #[test]
    fn density_integrates_to_one() {
        let p = policy(1);
        let obs = [0.4, 0.0, -1.0];
        let m = p.mean(&obs).unwrap()[0];
        let half = 6.0 * p.std()[0];
        let mut rng = Seed::new(3).rng();
        let n = 200_000;
        let sum: f64 = (0..n)
            .map(|_| {
                let a = m + rng.random_range(-half..half);
                p.log_prob(&obs, &[a]).unwrap().exp()
            })
            .sum();
        let integral = sum / n as f64 * 2.0 * half;
        assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = policy(2);
        let back = GaussianPolicy::from_checkpoint(p.to_checkpoint(), p.bounds.clone()).unwrap();
        assert_eq!(back, p);
    }
}
