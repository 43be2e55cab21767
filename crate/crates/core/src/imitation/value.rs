use crate::error::{Error, Result};
use crate::net::{Checkpoint, Gradients, Head, Mlp, Optimizer};
use crate::rng::Rng;

/// State-value estimate on the inferred-reward scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFn {
    pub net: Mlp,
}

impl ValueFn {
    pub fn new(obs_dim: usize, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Ok(ValueFn {
            net: Mlp::new(&dims, rng)?,
        })
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.net.forward(obs)?[0])
    }

    /// One gradient step on `0.5 * mean (V(s) - target)^2` over the given
    /// indices; returns the loss before the step.
    pub fn fit_step(
        &mut self,
        opt: &mut Optimizer,
        obs: &[Vec<f64>],
        targets: &[f64],
        idx: &[usize],
    ) -> Result<f64> {
        let mut grads = Gradients::zeros_like(&self.net);
        let n = idx.len() as f64;
        let mut loss = 0.0;
        for &i in idx {
            let trace = self.net.forward_train(&obs[i], None)?;
            let err = trace.output()[0] - targets[i];
            loss += 0.5 * err * err / n;
            self.net.backward_accumulate(&trace, &[err / n], &mut grads)?;
        }
        if !loss.is_finite() {
            return Err(Error::diverged("value function", "non-finite loss"));
        }
        opt.step_mlp(&mut self.net, &grads)
            .map_err(|e| e.within("value function"))?;
        Ok(loss)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.net.clone(),
            head: Head::Plain,
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.head != Head::Plain || ckpt.net.output_dim() != 1 {
            return Err(Error::State("checkpoint does not hold a value function".into()));
        }
        Ok(ValueFn { net: ckpt.net })
    }
}
