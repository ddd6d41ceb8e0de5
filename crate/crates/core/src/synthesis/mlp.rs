//! A small fully connected network with tanh hidden layers, trained by momentum SGD on mean-squared error.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Layer {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.bias
                .iter()
                .zip(self.weights.chunks_exact(self.inputs))
                .map(|(b, row)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 0.01,
            batch: 32,
            momentum: 0.9,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Validation(
                "epochs and batch must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Validation("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Loss values observed while training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub best_epoch: usize,
}

impl Mlp {
    /// Network of the given layer sizes with every weight and bias zero.
    pub fn zeros(sizes: &[usize]) -> Mlp {
        Mlp {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn random(sizes: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        let mut mlp = Mlp::zeros(sizes);
        for layer in &mut mlp.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        mlp
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        s.extend(self.layers.last().map(|l| l.outputs));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// Activations of every layer, input first; hidden layers use tanh, the last is linear.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().unwrap(), &mut out);
            if i + 1 < self.layers.len() {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).pop().unwrap()
    }

    /// Mean over samples of the per-sample mean squared error.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        if inputs.is_empty() {
            return 0.0;
        }
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, y)| {
                let out = self.forward(x);
                out.iter().zip(y).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / y.len() as f64
            })
            .sum();
        total / inputs.len() as f64
    }

    /// Adds the loss gradient of one sample, scaled by `weight`, to `grads`.
    fn accumulate_gradient(&self, x: &[f64], y: &[f64], weight: f64, grads: &mut [Layer]) {
        let acts = self.activations(x);
        let out = acts.last().unwrap();
        let mut delta: Vec<f64> = out
            .iter()
            .zip(y)
            .map(|(o, t)| 2.0 * (o - t) / y.len() as f64 * weight)
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let g = &mut grads[li];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, v) in row.iter_mut().zip(input) {
                    *gw += d * v;
                }
            }
            if li == 0 {
                break;
            }
            let mut next = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += d * w;
                }
            }
            // derivative of tanh from its output
            for (n, a) in next.iter_mut().zip(input) {
                *n *= 1.0 - a * a;
            }
            delta = next;
        }
    }

    /// Trains in place and keeps the parameters of the epoch with the lowest full-data loss,
    /// so the final loss never exceeds the initial one.
    pub fn train(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
        config: &TrainConfig,
    ) -> Result<TrainReport> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let initial_loss = self.loss(inputs, targets);
        if !initial_loss.is_finite() {
            return Err(Error::Divergence { epoch: 0 });
        }
        let mut best = (initial_loss, self.clone(), 0);
        let mut velocity: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer::zeros(l.inputs, l.outputs))
            .collect();
        let mut grads = velocity.clone();
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch) {
                for g in &mut grads {
                    g.weights.iter_mut().for_each(|v| *v = 0.0);
                    g.bias.iter_mut().for_each(|v| *v = 0.0);
                }
                let w = 1.0 / batch.len() as f64;
                for &i in batch {
                    self.accumulate_gradient(&inputs[i], &targets[i], w, &mut grads);
                }
                for ((layer, v), g) in self.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                    let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                    let vels = v.weights.iter_mut().chain(v.bias.iter_mut());
                    let gs = g.weights.iter().chain(g.bias.iter());
                    for ((p, vel), gr) in params.zip(vels).zip(gs) {
                        *vel = config.momentum * *vel - config.learning_rate * gr;
                        *p += *vel;
                    }
                }
            }
            let loss = self.loss(inputs, targets);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            if loss < best.0 {
                best = (loss, self.clone(), epoch);
            }
        }
        *self = best.1;
        Ok(TrainReport {
            initial_loss,
            final_loss: best.0,
            best_epoch: best.2,
        })
    }
}
