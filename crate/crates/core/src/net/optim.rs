use crate::error::{Error, Result};

use super::{Gradients, Mlp};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

/// First-order optimizer state. Moment buffers are allocated on the first
/// step and must keep the same shapes afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    pub learning_rate: f64,
    kind: OptimizerKind,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn adam(learning_rate: f64) -> Self {
        Self::new(
            learning_rate,
            OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
        )
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::new(learning_rate, OptimizerKind::Sgd)
    }

    fn new(learning_rate: f64, kind: OptimizerKind) -> Self {
        Optimizer {
            learning_rate,
            kind,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates each parameter group against its gradient. On a non-finite
    /// gradient nothing is modified and the offending group index is reported.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        self.try_step(params, grads).map_err(|e| match e {
            StepFailure::NonFinite(group) => {
                Error::diverged(format!("parameter group {group}"), "non-finite gradient")
            }
            StepFailure::Shape(msg) => Error::RejectedInput(msg),
        })
    }

    /// Step over every layer of `net`; errors name the offending layer.
    pub fn step_mlp(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        let (mut params, g) = mlp_groups(net, grads);
        self.try_step(&mut params, &g).map_err(|e| match e {
            StepFailure::NonFinite(group) => {
                Error::diverged(format!("layer {}", group / 2), "non-finite gradient")
            }
            StepFailure::Shape(msg) => Error::RejectedInput(msg),
        })
    }

    fn try_step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
    ) -> std::result::Result<(), StepFailure> {
        if params.len() != grads.len() {
            return Err(StepFailure::Shape(format!(
                "{} parameter groups but {} gradient groups",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(StepFailure::Shape(format!(
                    "group {i}: {} parameters but {} gradients",
                    p.len(),
                    g.len()
                )));
            }
        }
        if let Some(bad) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(StepFailure::NonFinite(bad));
        }
        if let OptimizerKind::Adam { .. } = self.kind {
            if self.first.is_empty() {
                self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                self.second = self.first.clone();
            } else if self.first.len() != grads.len()
                || self.first.iter().zip(grads).any(|(m, g)| m.len() != g.len())
            {
                return Err(StepFailure::Shape(
                    "gradient shapes changed between optimizer steps".into(),
                ));
            }
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.iter_mut().zip(g.iter()).for_each(|(p, g)| *p -= lr * g);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m).zip(v) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

enum StepFailure {
    NonFinite(usize),
    Shape(String),
}

/// Parameter and gradient slices in (weights, biases) order per layer.
pub(crate) fn mlp_groups<'a>(
    net: &'a mut Mlp,
    grads: &'a Gradients,
) -> (Vec<&'a mut [f64]>, Vec<&'a [f64]>) {
    let params = net
        .layers_mut()
        .iter_mut()
        .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
        .collect();
    let g = grads
        .layers
        .iter()
        .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
        .collect();
    (params, g)
}
