//! Feed-forward network with manual backpropagation and Adam.
//!
//! The structure is fixed at two ReLU hidden layers; the output head is a
//! single sigmoid node for binary targets or a softmax over classes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{rng_from_seed, sigmoid};

const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `[out_dim x in_dim]`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        // He-style uniform init scaled by fan-in.
        let bound = (6.0 / in_dim as f64).sqrt();
        DenseLayer {
            in_dim,
            out_dim,
            weights: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            biases: vec![0.0; out_dim],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            *out_v += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub output: OutputActivation,
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    /// Input plus post-activation output of each layer.
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// `sizes` chains input through hidden layers to the output node count.
    pub fn new(sizes: &[usize], output: OutputActivation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::config("network needs at least input and output sizes"));
        }
        let mut rng = rng_from_seed(seed);
        let layers = sizes
            .windows(2)
            .map(|w| DenseLayer::new(w[0], w[1], &mut rng))
            .collect();
        Ok(Mlp { layers, output })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(activations.last().unwrap());
            if i < last {
                for v in z.iter_mut() {
                    *v = v.max(0.0); // ReLU
                }
            } else {
                match self.output {
                    OutputActivation::Sigmoid => {
                        for v in z.iter_mut() {
                            *v = sigmoid(*v);
                        }
                    }
                    OutputActivation::Softmax => softmax_in_place(&mut z),
                }
            }
            activations.push(z);
        }
        Ok((activations.last().unwrap().clone(), ForwardCache { activations }))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Exact gradients of the cross-entropy loss for one sample.
    ///
    /// Both heads share the convenient identity `dL/dz = p - t` at the
    /// output pre-activation, so the same backward pass covers sigmoid and
    /// softmax outputs.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64]) -> Gradients {
        let n_layers = self.layers.len();
        let mut grads = Gradients::zeros_like(self);
        let output = cache.activations.last().unwrap();
        let mut delta: Vec<f64> = output.iter().zip(target).map(|(p, t)| p - t).collect();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let input = &cache.activations[l];
            {
                let g = &mut grads.layers[l];
                for (o, &d) in delta.iter().enumerate() {
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (w, v) in row.iter_mut().zip(input) {
                        *w += d * v;
                    }
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // ReLU derivative: gradient flows only where the unit fired
                for (p, a) in prev.iter_mut().zip(&cache.activations[l]) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        grads
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Cross-entropy against a (possibly soft) target distribution; a length-1
/// output is treated as the binary case.
pub fn cross_entropy_loss(output: &[f64], target: &[f64]) -> f64 {
    debug_assert_eq!(output.len(), target.len());
    if output.len() == 1 {
        let p = output[0].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let t = target[0];
        -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
    } else {
        -output
            .iter()
            .zip(target)
            .map(|(p, t)| t * p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln())
            .sum::<f64>()
    }
}

/// Per-parameter gradient accumulator shaped like an [`Mlp`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.out_dim],
                })
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v *= factor);
            l.biases.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Adam optimizer state: first/second moment accumulators plus step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<LayerMoments>,
    v: Vec<LayerMoments>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerMoments {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        let zeros = |l: &DenseLayer| LayerMoments {
            weights: vec![0.0; l.weights.len()],
            biases: vec![0.0; l.out_dim],
        };
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: net.layers.iter().map(zeros).collect(),
            v: net.layers.iter().map(zeros).collect(),
        }
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let hp = AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            c1: 1.0 - self.beta1.powi(self.step as i32),
            c2: 1.0 - self.beta2.powi(self.step as i32),
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            update_params(
                &mut layer.weights,
                &grads.layers[l].weights,
                &mut self.m[l].weights,
                &mut self.v[l].weights,
                &hp,
            );
            update_params(
                &mut layer.biases,
                &grads.layers[l].biases,
                &mut self.m[l].biases,
                &mut self.v[l].biases,
                &hp,
            );
        }
    }
}

struct AdamHyper {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    c1: f64,
    c2: f64,
}

fn update_params(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], hp: &AdamHyper) {
    for i in 0..params.len() {
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grads[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
        let m_hat = m[i] / hp.c1;
        let v_hat = v[i] / hp.c2;
        params[i] -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
}

/// One Adam step on the mean gradient over a batch; returns the mean loss
/// measured before the update.
pub fn train_batch(
    net: &mut Mlp,
    adam: &mut AdamState,
    inputs: &[&[f64]],
    targets: &[Vec<f64>],
) -> Result<f64> {
    debug_assert_eq!(inputs.len(), targets.len());
    let mut total = Gradients::zeros_like(net);
    let mut loss = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let (out, cache) = net.forward(x)?;
        loss += cross_entropy_loss(&out, t);
        total.add(&net.backward(&cache, t));
    }
    total.scale(1.0 / inputs.len() as f64);
    adam.step(net, &total);
    Ok(loss / inputs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_net_sigmoid_outputs_half() {
        let mut net = Mlp::new(&[4, 20, 20, 1], OutputActivation::Sigmoid, 1).unwrap();
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let out = net.predict(&[0.3, 0.1, 0.9, 0.5]).unwrap();
        assert_eq!(out, vec![0.5]);
    }

    #[test]
    fn softmax_outputs_sum_to_one() {
        let net = Mlp::new(&[5, 20, 20, 4], OutputActivation::Softmax, 7).unwrap();
        let out = net.predict(&[0.1, 0.9, 0.4, 0.2, 0.6]).unwrap();
        assert_abs_diff_eq!(out.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(out.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn degenerate_1_1_1_net_matches_hand_evaluation() {
        let mut net = Mlp::new(&[1, 1, 1], OutputActivation::Sigmoid, 1).unwrap();
        net.layers[0].weights = vec![2.0];
        net.layers[0].biases = vec![-0.5];
        net.layers[1].weights = vec![1.5];
        net.layers[1].biases = vec![0.25];
        // x=1: relu(2*1-0.5)=1.5; sigmoid(1.5*1.5+0.25)=sigmoid(2.5)
        let out = net.predict(&[1.0]).unwrap();
        assert_abs_diff_eq!(out[0], sigmoid(2.5), epsilon = 1e-12);
        // x=-1: relu(-2.5)=0 -> sigmoid(0.25)
        let out = net.predict(&[-1.0]).unwrap();
        assert_abs_diff_eq!(out[0], sigmoid(0.25), epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_hand_values() {
        assert_abs_diff_eq!(cross_entropy_loss(&[1.0], &[1.0]), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            cross_entropy_loss(&[0.5], &[1.0]),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        let uniform = vec![0.25; 4];
        assert_abs_diff_eq!(
            cross_entropy_loss(&uniform, &[1.0, 0.0, 0.0, 0.0]),
            4f64.ln(),
            epsilon = 1e-12
        );
    }

    /// Central finite differences over every parameter.
    pub(crate) fn finite_difference_check(net: &Mlp, x: &[f64], target: &[f64]) -> f64 {
        let h = 1e-5;
        let (_, cache) = net.forward(x).unwrap();
        let grads = net.backward(&cache, target);
        let mut worst: f64 = 0.0;
        let mut probe = net.clone();
        for l in 0..net.layers.len() {
            for i in 0..net.layers[l].weights.len() {
                let orig = net.layers[l].weights[i];
                probe.layers[l].weights[i] = orig + h;
                let up = cross_entropy_loss(&probe.predict(x).unwrap(), target);
                probe.layers[l].weights[i] = orig - h;
                let down = cross_entropy_loss(&probe.predict(x).unwrap(), target);
                probe.layers[l].weights[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.layers[l].weights[i];
                let denom = numeric.abs().max(analytic.abs());
                if denom > 1e-7 {
                    worst = worst.max((numeric - analytic).abs() / denom);
                }
            }
            for i in 0..net.layers[l].biases.len() {
                let orig = net.layers[l].biases[i];
                probe.layers[l].biases[i] = orig + h;
                let up = cross_entropy_loss(&probe.predict(x).unwrap(), target);
                probe.layers[l].biases[i] = orig - h;
                let down = cross_entropy_loss(&probe.predict(x).unwrap(), target);
                probe.layers[l].biases[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.layers[l].biases[i];
                let denom = numeric.abs().max(analytic.abs());
                if denom > 1e-7 {
                    worst = worst.max((numeric - analytic).abs() / denom);
                }
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = Mlp::new(&[10, 20, 20, 3], OutputActivation::Softmax, 11).unwrap();
        let mut rng = crate::util::rng_from_seed(5);
        use rand::Rng;
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = vec![0.0, 1.0, 0.0];
        assert!(finite_difference_check(&net, &x, &target) < 1e-4);

        let net = Mlp::new(&[6, 20, 20, 1], OutputActivation::Sigmoid, 13).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(finite_difference_check(&net, &x, &[1.0]) < 1e-4);
    }

    #[test]
    fn zero_loss_means_zero_output_gradients() {
        let mut net = Mlp::new(&[2, 2, 1], OutputActivation::Sigmoid, 1).unwrap();
        // force output of exactly 0.5 and target 0.5: p - t = 0
        for l in &mut net.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let (_, cache) = net.forward(&[0.2, 0.4]).unwrap();
        let grads = net.backward(&cache, &[0.5]);
        assert!(grads.layers[1].weights.iter().all(|&g| g == 0.0));
        assert!(grads.layers[1].biases.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        let mut net = Mlp::new(&[1, 1, 1], OutputActivation::Sigmoid, 1).unwrap();
        net.layers[0].weights = vec![1.0];
        net.layers[0].biases = vec![-5.0]; // pre-activation < 0 for x=1
        net.layers[1].weights = vec![1.0];
        net.layers[1].biases = vec![0.0];
        let (_, cache) = net.forward(&[1.0]).unwrap();
        let grads = net.backward(&cache, &[1.0]);
        assert_eq!(grads.layers[0].weights[0], 0.0);
        assert_eq!(grads.layers[0].biases[0], 0.0);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut net = Mlp::new(&[3, 4, 2], OutputActivation::Softmax, 9).unwrap();
        let before = net.clone();
        let mut adam = AdamState::new(&net, 0.001);
        let grads = Gradients::zeros_like(&net);
        adam.step(&mut net, &grads);
        assert_eq!(net, before);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut net = Mlp::new(&[1, 1], OutputActivation::Sigmoid, 1).unwrap();
        net.layers[0].weights = vec![0.7];
        let mut adam = AdamState::new(&net, 0.001);
        let mut grads = Gradients::zeros_like(&net);
        grads.layers[0].weights[0] = 0.3;
        adam.step(&mut net, &grads);
        // bias-corrected first step is ~lr * sign(g)
        assert_abs_diff_eq!(net.layers[0].weights[0], 0.7 - 0.001, epsilon = 1e-6);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let run = || {
            let mut net = Mlp::new(&[4, 20, 20, 1], OutputActivation::Sigmoid, 21).unwrap();
            let mut adam = AdamState::new(&net, 0.001);
            let xs: Vec<Vec<f64>> = (0..8)
                .map(|i| vec![i as f64 / 8.0, 0.5, (i % 2) as f64, 0.25])
                .collect();
            let targets: Vec<Vec<f64>> = (0..8).map(|i| vec![(i % 2) as f64]).collect();
            let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            let first = train_batch(&mut net, &mut adam, &refs, &targets).unwrap();
            let mut last = first;
            for _ in 0..99 {
                last = train_batch(&mut net, &mut adam, &refs, &targets).unwrap();
            }
            (net, first, last)
        };
        let (net_a, first, last) = run();
        let (net_b, _, _) = run();
        assert_eq!(net_a, net_b);
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }
}
