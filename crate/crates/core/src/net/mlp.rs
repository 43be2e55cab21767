use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// One affine layer. `weights` is row-major with shape `(n_out, n_in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    #[inline]
    fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.n_in)
                .zip(&self.biases)
                .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
        );
    }
}

/// Multi-layer perceptron: tanh on hidden layers, identity on the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<Dense>,
    dropout_rate: f64,
}

/// Activations recorded by a training-mode forward pass, consumed by
/// [`Mlp::backward`].
#[derive(Clone, Debug, Default)]
pub struct Trace {
    /// Input fed to each layer (`inputs[0]` is the network input).
    inputs: Vec<Vec<f64>>,
    /// tanh outputs of each hidden layer, before dropout.
    hidden: Vec<Vec<f64>>,
    /// Scaled dropout masks per hidden layer; empty when dropout is off.
    masks: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn input(&self) -> Option<&[f64]> {
        self.inputs.first().map(Vec::as_slice)
    }
}

/// Parameter gradients with the same layout as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Dense::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.biases.iter_mut().zip(&b.biases).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= c);
            l.biases.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|&g| g == 0.0))
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for layer in &mut net.layers {
            let bound = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::RejectedInput(format!(
                "layer dims must list at least input and output, all positive; got {dims:?}"
            )));
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            dropout_rate: 0.0,
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::RejectedInput("network needs at least one layer".into()))?;
        let mut dims = vec![first.n_in];
        for l in &layers {
            if l.n_in != *dims.last().unwrap()
                || l.weights.len() != l.n_in * l.n_out
                || l.biases.len() != l.n_out
            {
                return Err(Error::RejectedInput("inconsistent layer shapes".into()));
            }
            dims.push(l.n_out);
        }
        Ok(Mlp {
            dims,
            layers,
            dropout_rate: 0.0,
        })
    }

    pub fn with_dropout(mut self, rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::RejectedInput(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        self.dropout_rate = rate;
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::RejectedInput(format!(
                "expected input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Evaluation-mode forward pass. Dropout is inactive.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::with_capacity(self.dims.iter().copied().max().unwrap_or(0));
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine_into(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Training-mode forward pass. Inverted dropout is applied to hidden
    /// activations when the rate is positive, in which case `rng` is required.
    pub fn forward_train(&self, x: &[f64], mut rng: Option<&mut Rng>) -> Result<Trace> {
        self.check_input(x)?;
        let dropout = self.dropout_rate > 0.0;
        if dropout && rng.is_none() {
            return Err(Error::RejectedInput(
                "training-mode forward with dropout requires an rng".into(),
            ));
        }
        let keep = 1.0 - self.dropout_rate;
        let last = self.layers.len() - 1;
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.layers.len()),
            hidden: Vec::with_capacity(last),
            masks: Vec::new(),
            output: Vec::new(),
        };
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.n_out);
            layer.affine_into(&cur, &mut z);
            trace.inputs.push(cur);
            if i == last {
                trace.output = z;
                break;
            }
            z.iter_mut().for_each(|v| *v = v.tanh());
            cur = if dropout {
                let r = rng.as_deref_mut().unwrap();
                let mask: Vec<f64> = (0..z.len())
                    .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let a = z.iter().zip(&mask).map(|(h, m)| h * m).collect();
                trace.masks.push(mask);
                a
            } else {
                z.clone()
            };
            trace.hidden.push(z);
        }
        Ok(trace)
    }

    /// Gradients of a loss whose derivative with respect to the network output
    /// is `upstream`, for the pass recorded in `trace`.
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_accumulate(trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Mlp::backward`] but adds into `grads`, returning the gradient
    /// with respect to the network input.
    pub fn backward_accumulate(
        &self,
        trace: &Trace,
        upstream: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if trace.inputs.is_empty() {
            return Err(Error::State(
                "backward called without a recorded forward pass".into(),
            ));
        }
        if trace.inputs.len() != self.layers.len()
            || trace.inputs[0].len() != self.input_dim()
            || trace.output.len() != self.output_dim()
        {
            return Err(Error::State(
                "recorded forward pass does not belong to this network".into(),
            ));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::RejectedInput(format!(
                "upstream gradient has length {}, network output is {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut delta = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.inputs[i];
            let g = &mut grads.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
                    row.iter_mut().zip(input).for_each(|(gw, a)| *gw += d * a);
                }
            }
            let mut back = vec![0.0; layer.n_in];
            for (row, &d) in layer.weights.chunks_exact(layer.n_in).zip(&delta) {
                if d != 0.0 {
                    back.iter_mut().zip(row).for_each(|(b, w)| *b += w * d);
                }
            }
            if i > 0 {
                let h = &trace.hidden[i - 1];
                if let Some(mask) = trace.masks.get(i - 1) {
                    back.iter_mut().zip(mask).for_each(|(b, m)| *b *= m);
                }
                back.iter_mut()
                    .zip(h)
                    .for_each(|(b, h)| *b *= 1.0 - h * h);
            }
            delta = back;
        }
        Ok(delta)
    }

    /// Multiplies the final layer's weights and biases by `c`.
    pub fn scale_output_layer(&mut self, c: f64) {
        let last = self.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w *= c);
        last.biases.iter_mut().for_each(|b| *b *= c);
    }

    /// Order-sensitive hash of every parameter bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.biases) {
                h = (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
