use crate::error::{Error, Result};
use crate::net::{Checkpoint, Gradients, Head, Mlp, Optimizer};
use crate::rng::Rng;

pub const D_MIN: f64 = 1e-7;
pub const D_MAX: f64 = 1.0 - 1e-7;
const STD_FLOOR: f64 = 1e-3;

/// Per-dimension input standardisation. Statistics accumulate until
/// [`Normalizer::freeze`] and never change afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    frozen: bool,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Normalizer {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            frozen: false,
        }
    }

    fn from_moments(mean: Vec<f64>, std: Vec<f64>) -> Self {
        Normalizer {
            count: 2,
            m2: std.iter().map(|s| s * s).collect(),
            mean,
            frozen: true,
        }
    }

    pub fn observe(&mut self, x: &[f64]) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *m2 += d * (v - *m);
        }
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> Vec<f64> {
        let n = (self.count.max(2) - 1) as f64;
        self.m2
            .iter()
            .map(|m2| (m2 / n).sqrt().max(STD_FLOOR))
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.count < 2 {
            return x.to_vec();
        }
        x.iter()
            .zip(&self.mean)
            .zip(self.std())
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Classifier of expert versus agent (state, action) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub net: Mlp,
    pub normalizer: Normalizer,
}

pub fn concat(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action.len());
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Discriminator {
    pub fn new(input_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(Discriminator {
            net: Mlp::new(&dims, rng)?,
            normalizer: Normalizer::new(input_dim),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.forward(&self.normalizer.apply(x))?[0])
    }

    /// `D(s, a)`, clamped to `[D_MIN, D_MAX]`.
    pub fn prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let z = self.logit(&concat(state, action))?;
        Ok(sigmoid(z).clamp(D_MIN, D_MAX))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.net.clone(),
            head: Head::Discriminator {
                mean: self.normalizer.mean().to_vec(),
                std: self.normalizer.std(),
            },
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let Head::Discriminator { mean, std } = ckpt.head else {
            return Err(Error::State("checkpoint does not hold a discriminator".into()));
        };
        if ckpt.net.output_dim() != 1 {
            return Err(Error::State("discriminator must have one output".into()));
        }
        Ok(Discriminator {
            net: ckpt.net,
            normalizer: Normalizer::from_moments(mean, std),
        })
    }
}

/// Inferred reward `-ln(1 - D)` for a clamped probability.
pub fn reward_from_prob(d: f64) -> f64 {
    -(1.0 - d.clamp(D_MIN, D_MAX)).ln()
}

pub fn reward(d: &Discriminator, state: &[f64], action: &[f64]) -> Result<f64> {
    Ok(reward_from_prob(d.prob(state, action)?))
}

/// Mean cross-entropy of labelling `expert` as 1 and `agent` as 0.
pub fn discriminator_loss(d: &Discriminator, expert: &[Vec<f64>], agent: &[Vec<f64>]) -> Result<f64> {
    let mean_sp = |xs: &[Vec<f64>], sign: f64| -> Result<f64> {
        let mut acc = 0.0;
        for x in xs {
            acc += softplus(sign * d.logit(x)?);
        }
        Ok(acc / xs.len() as f64)
    };
    Ok(mean_sp(expert, -1.0)? + mean_sp(agent, 1.0)?)
}

/// Takes `steps` full-batch gradient steps on the cross-entropy minus
/// `entropy_coeff` times the mean Bernoulli entropy of `D`. Inputs are
/// concatenated (state, action) vectors. Returns the cross-entropy after the
/// final step.
pub fn discriminator_update(
    d: &mut Discriminator,
    opt: &mut Optimizer,
    expert: &[Vec<f64>],
    agent: &[Vec<f64>],
    entropy_coeff: f64,
    steps: usize,
) -> Result<f64> {
    if expert.is_empty() || agent.is_empty() {
        return Err(Error::RejectedInput(
            "discriminator update needs non-empty expert and agent batches".into(),
        ));
    }
    let n_all = (expert.len() + agent.len()) as f64;
    let mut grads = Gradients::zeros_like(&d.net);
    for _ in 0..steps {
        grads.fill_zero();
        for (batch, label) in [(expert, 1.0), (agent, 0.0)] {
            let n = batch.len() as f64;
            for x in batch {
                let trace = d.net.forward_train(&d.normalizer.apply(x), None)?;
                let z = trace.output()[0];
                let p = sigmoid(z);
                let g = (p - label) / n + entropy_coeff * z * p * (1.0 - p) / n_all;
                d.net.backward_accumulate(&trace, &[g], &mut grads)?;
            }
        }
        opt.step_mlp(&mut d.net, &grads)
            .map_err(|e| e.within("discriminator"))?;
    }
    let loss = discriminator_loss(d, expert, agent)?;
    if !loss.is_finite() {
        return Err(Error::diverged("discriminator", "non-finite loss"));
    }
    Ok(loss)
}
