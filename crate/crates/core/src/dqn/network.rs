//! Fully connected Q-network with rectified-linear hidden layers, written
//! out by hand: forward pass, backpropagation of the chosen-action squared
//! error, and plain SGD.

use rand::Rng;

use crate::error::{Error, Result};

/// Dense layer, weights stored input-major: `weights[i * outputs + o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut layer = Dense::zeros(inputs, outputs);
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.gen_range(-bound..=bound);
        }
        layer
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.outputs + output]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn param_mut(&mut self, i: usize) -> &mut f64 {
        if i < self.weights.len() {
            &mut self.weights[i]
        } else {
            &mut self.bias[i - self.weights.len()]
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            // inputs are mostly one-hot
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

/// Multi-layer perceptron; every layer but the last is followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Gradient with the same layout as the network it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<Dense>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|g| g.is_finite()))
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Contract(format!(
                    "layer output {} does not match next input {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| Dense::random(w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    /// Flat parameter view, layer by layer, weights before biases.
    pub fn param(&self, mut i: usize) -> f64 {
        for l in &self.layers {
            if i < l.num_params() {
                return if i < l.weights.len() {
                    l.weights[i]
                } else {
                    l.bias[i - l.weights.len()]
                };
            }
            i -= l.num_params();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut i: usize, value: f64) {
        for l in &mut self.layers {
            if i < l.num_params() {
                *l.param_mut(i) = value;
                return;
            }
            i -= l.num_params();
        }
        panic!("parameter index out of range");
    }

    /// Index range of each layer's parameters in the flat view.
    pub fn layer_param_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.layers
            .iter()
            .map(|l| {
                let r = start..start + l.num_params();
                start = r.end;
                r
            })
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Contract(format!(
                "feature vector has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Activations of every layer; the last entry holds the raw outputs.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut trace: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let input = if k == 0 { x } else { &trace[k - 1] };
            let mut out = vec![0.0; layer.outputs];
            layer.forward_into(input, &mut out);
            if k != last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            trace.push(out);
        }
        trace
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_trace(x).pop().unwrap())
    }

    /// Which hidden units are active (pre-activation > 0) for input `x`.
    pub fn relu_pattern(&self, x: &[f64]) -> Vec<bool> {
        let mut pattern = Vec::new();
        let mut h = x.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            let mut out = vec![0.0; layer.outputs];
            layer.forward_into(&h, &mut out);
            pattern.extend(out.iter().map(|&v| v > 0.0));
            h = out.iter().map(|v| v.max(0.0)).collect();
        }
        pattern
    }

    /// Mean over the batch of `(Q(x_j)[a_j] - y_j)^2`.
    pub fn batch_loss(&self, inputs: &[&[f64]], actions: &[usize], targets: &[f64]) -> Result<f64> {
        check_batch(inputs, actions, targets)?;
        let mut total = 0.0;
        for ((x, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            let q = self.forward(x)?;
            total += (q[a] - y).powi(2);
        }
        Ok(total / inputs.len() as f64)
    }

    /// Loss as in [`Mlp::batch_loss`] and its gradient with respect to every
    /// parameter. Only the chosen action's output receives error; targets
    /// are constants.
    pub fn loss_and_gradients(
        &self,
        inputs: &[&[f64]],
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        check_batch(inputs, actions, targets)?;
        let n = inputs.len() as f64;
        let mut grads = Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        };
        let mut loss = 0.0;

        for ((x, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            self.check_input(x)?;
            let trace = self.forward_trace(x);
            let q = trace.last().unwrap();
            let err = q[a] - y;
            loss += err * err;

            let mut delta = vec![0.0; self.output_dim()];
            delta[a] = 2.0 * err / n;

            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let input: &[f64] = if k == 0 { x } else { &trace[k - 1] };
                let g = &mut grads.layers[k];
                for (gb, d) in g.bias.iter_mut().zip(&delta) {
                    *gb += d;
                }
                for (i, &xi) in input.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    for (gw, d) in row.iter_mut().zip(&delta) {
                        *gw += xi * d;
                    }
                }
                if k == 0 {
                    break;
                }
                // Back through the weights, then the ReLU of layer k-1. A
                // zero activation means the unit was clamped.
                let mut prev = vec![0.0; layer.inputs];
                for (i, p) in prev.iter_mut().enumerate() {
                    if input[i] <= 0.0 {
                        continue;
                    }
                    let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    *p = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                }
                delta = prev;
            }
        }
        Ok((loss / n, grads))
    }

    /// `param[i] -= learning_rate * update[i]` over the flat parameter view.
    pub fn apply_flat_update(&mut self, update: &[f64], learning_rate: f64) {
        assert_eq!(update.len(), self.num_params(), "update length mismatch");
        let mut rest = update;
        for l in &mut self.layers {
            let (uw, tail) = rest.split_at(l.weights.len());
            let (ub, tail) = tail.split_at(l.bias.len());
            for (w, u) in l.weights.iter_mut().zip(uw) {
                *w -= learning_rate * u;
            }
            for (b, u) in l.bias.iter_mut().zip(ub) {
                *b -= learning_rate * u;
            }
            rest = tail;
        }
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * gw;
            }
            for (b, gb) in l.bias.iter_mut().zip(&g.bias) {
                *b -= learning_rate * gb;
            }
        }
    }
}

fn check_batch(inputs: &[&[f64]], actions: &[usize], targets: &[f64]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    if inputs.len() != actions.len() || inputs.len() != targets.len() {
        return Err(Error::Contract(format!(
            "batch lengths differ: {} inputs, {} actions, {} targets",
            inputs.len(),
            actions.len(),
            targets.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weights {
    Online,
    Target,
}

/// Action-value function with online parameters and a delayed target copy.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    online: Mlp,
    target: Mlp,
}

impl QNetwork {
    /// Random online weights; the target starts as an exact copy.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let online = Mlp::random(sizes, rng);
        QNetwork {
            target: online.clone(),
            online,
        }
    }

    pub fn from_parts(online: Mlp, target: Mlp) -> Result<Self> {
        if online.sizes() != target.sizes() {
            return Err(Error::Contract("online and target shapes differ".into()));
        }
        Ok(QNetwork { online, target })
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let online = Mlp::zeros(sizes);
        QNetwork {
            target: online.clone(),
            online,
        }
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn input_dim(&self) -> usize {
        self.online.input_dim()
    }

    pub fn forward(&self, which: Weights, features: &[f64]) -> Result<Vec<f64>> {
        match which {
            Weights::Online => self.online.forward(features),
            Weights::Target => self.target.forward(features),
        }
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }
}
