//! Small single-hidden-layer feed-forward network with hand-written backprop.
//!
//! Weights are stored per layer as a row-major matrix with one row per
//! receiving neuron and one column per sending neuron, plus a trailing bias
//! column. The hidden layer is logistic, the output layer is linear, and the
//! training loss for one example is `0.5 * |output - target|^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mean batch loss below which `batch_backprop` stops early.
pub const BATCH_LOSS_TOLERANCE: f64 = 1e-8;

/// Step halvings tried per batch iteration before giving up on the batch.
const MAX_STEP_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Logistic,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation value `a = f(z)`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Logistic => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Row-major weight matrix; the last column holds the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns, i.e. fan-in plus the bias column.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self += scale * other`.
    fn add_scaled(&mut self, other: &WeightMatrix, scale: f64) {
        for (w, d) in self.data.iter_mut().zip(&other.data) {
            *w += scale * d;
        }
    }
}

/// Activations of every layer for one input, input layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub per_layer: Vec<Vec<f64>>,
}

impl LayerActivations {
    pub fn input(&self) -> &[f64] {
        &self.per_layer[0]
    }

    pub fn output(&self) -> &[f64] {
        self.per_layer.last().expect("at least one layer")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.per_layer.pop().expect("at least one layer")
    }
}

/// One supervised pair for batch training.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Result of the backward pass for a single example.
///
/// `neuron_errors[l]` holds `-dL/dz` for the neurons fed by weight layer `l`,
/// and `gradients[l]` holds `dL/dW` for that layer.
#[derive(Debug, Clone)]
pub struct Backward {
    pub activations: LayerActivations,
    pub neuron_errors: Vec<Vec<f64>>,
    pub gradients: Vec<WeightMatrix>,
    pub loss: f64,
}

/// Outcome of a `batch_backprop` call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchReport {
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layer_sizes: [usize; 3],
    weights: Vec<WeightMatrix>,
    hidden_activation: Activation,
    output_activation: Activation,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<[usize; 3]> {
    match layer_sizes {
        &[i, h, o] if i > 0 && h > 0 && o > 0 => Ok([i, h, o]),
        _ => Err(Error::LayerSizes(layer_sizes.to_vec())),
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[inline]
fn affine(row: &[f64], input: &[f64]) -> f64 {
    let (bias, w) = row.split_last().expect("bias column");
    w.iter().zip(input).fold(*bias, |acc, (w, x)| acc + w * x)
}

impl NetworkParams {
    /// Network with weights drawn uniformly from `[-0.5, 0.5]`.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.weights {
            for w in layer.as_mut_slice() {
                *w = rng.gen_range(-0.5..=0.5);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        let sizes = check_sizes(layer_sizes)?;
        let weights = sizes
            .windows(2)
            .map(|w| WeightMatrix::zeros(w[1], w[0] + 1))
            .collect();
        Ok(Self {
            layer_sizes: sizes,
            weights,
            hidden_activation: Activation::Logistic,
            output_activation: Activation::Identity,
        })
    }

    /// Rebuilds a network from the flat layout produced by [`to_flat`](Self::to_flat).
    pub fn from_flat(layer_sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let expected = net.parameter_count();
        if flat.len() != expected {
            return Err(Error::Dimension {
                context: "flat parameter vector",
                expected,
                actual: flat.len(),
            });
        }
        check_finite(flat, "flat parameter vector")?;
        let mut offset = 0;
        for layer in &mut net.weights {
            let n = layer.data.len();
            layer.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(net)
    }

    /// Weights in layer order, row-major, bias column last in each row.
    pub fn to_flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flat_map(|l| l.data.iter().copied())
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|l| l.data.len()).sum()
    }

    pub fn layer_sizes(&self) -> [usize; 3] {
        self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        self.layer_sizes[2]
    }

    /// Number of weight layers (always two).
    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &WeightMatrix {
        &self.weights[layer]
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|l| l.data.iter())
            .fold(0.0_f64, |m, w| {
                if w.is_finite() {
                    m.max(w.abs())
                } else {
                    f64::INFINITY
                }
            })
    }

    pub fn all_finite(&self) -> bool {
        self.weights
            .iter()
            .all(|l| l.data.iter().all(|w| w.is_finite()))
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        check_finite(input, "network input")
    }

    fn check_target(&self, target: &[f64]) -> Result<()> {
        if target.len() != self.output_width() {
            return Err(Error::Dimension {
                context: "network target",
                expected: self.output_width(),
                actual: target.len(),
            });
        }
        check_finite(target, "network target")
    }

    pub fn forward(&self, input: &[f64]) -> Result<LayerActivations> {
        self.check_input(input)?;
        Ok(self.forward_unchecked(input))
    }

    fn forward_unchecked(&self, input: &[f64]) -> LayerActivations {
        let mut per_layer = Vec::with_capacity(self.weights.len() + 1);
        per_layer.push(input.to_vec());
        for (l, layer) in self.weights.iter().enumerate() {
            let act = self.activation_of(l);
            let prev = per_layer.last().expect("input pushed");
            let next: Vec<f64> = (0..layer.rows)
                .map(|r| act.apply(affine(layer.row(r), prev)))
                .collect();
            per_layer.push(next);
        }
        LayerActivations { per_layer }
    }

    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.into_output())
    }

    /// `0.5 * |output - target|^2` for one example.
    pub fn loss(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        self.check_target(target)?;
        let out = self.output(input)?;
        Ok(half_squared_error(&out, target))
    }

    /// Mean of the per-example loss over `items`.
    pub fn mean_loss(&self, items: &[BatchItem]) -> Result<f64> {
        if items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut total = 0.0;
        for item in items {
            total += self.loss(&item.input, &item.target)?;
        }
        Ok(total / items.len() as f64)
    }

    /// Per-neuron errors (`-dL/dz`) for every weight layer, given a forward pass.
    pub fn neuron_errors(&self, acts: &LayerActivations, target: &[f64]) -> Vec<Vec<f64>> {
        let n = self.weights.len();
        let mut errors: Vec<Vec<f64>> = vec![Vec::new(); n];
        let out_act = self.activation_of(n - 1);
        errors[n - 1] = acts
            .output()
            .iter()
            .zip(target)
            .map(|(o, t)| (t - o) * out_act.derivative_from_output(*o))
            .collect();
        for l in (0..n - 1).rev() {
            let above = &self.weights[l + 1];
            let act = self.activation_of(l);
            let a = &acts.per_layer[l + 1];
            let err_above = &errors[l + 1];
            errors[l] = (0..a.len())
                .map(|j| {
                    let back: f64 = (0..above.rows)
                        .map(|k| above.get(k, j) * err_above[k])
                        .sum();
                    back * act.derivative_from_output(a[j])
                })
                .collect();
        }
        errors
    }

    /// Full backward pass for one example.
    pub fn backward(&self, input: &[f64], target: &[f64]) -> Result<Backward> {
        self.check_target(target)?;
        let activations = self.forward(input)?;
        let neuron_errors = self.neuron_errors(&activations, target);
        let gradients = self
            .weights
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let mut g = WeightMatrix::zeros(layer.rows, layer.cols);
                let a = &activations.per_layer[l];
                for (r, e) in neuron_errors[l].iter().enumerate() {
                    let row = g.row_mut(r);
                    let (bias, w) = row.split_last_mut().expect("bias column");
                    for (gw, x) in w.iter_mut().zip(a) {
                        *gw = -e * x;
                    }
                    *bias = -e;
                }
                g
            })
            .collect();
        let loss = half_squared_error(activations.output(), target);
        Ok(Backward {
            activations,
            neuron_errors,
            gradients,
            loss,
        })
    }

    /// One online gradient step on `0.5 * |output - target|^2`.
    pub fn backprop(&mut self, input: &[f64], target: &[f64], learning_rate: f64) -> Result<()> {
        check_rate(learning_rate)?;
        let back = self.backward(input, target)?;
        for (layer, grad) in self.weights.iter_mut().zip(&back.gradients) {
            layer.add_scaled(grad, -learning_rate);
        }
        Ok(())
    }

    /// Mean loss and mean gradient over a batch.
    /// Mean loss over `items`; writes the mean gradient into `grad`.
    ///
    /// Inputs and targets must already be validated.
    fn batch_pass(
        &self,
        items: &[BatchItem],
        grad: &mut [WeightMatrix],
        hidden: &mut [f64],
    ) -> f64 {
        let (w0, w1) = (&self.weights[0], &self.weights[1]);
        let (hid_act, out_act) = (self.hidden_activation, self.output_activation);
        let [g0, g1] = grad else {
            unreachable!("two weight layers")
        };
        g0.data.fill(0.0);
        g1.data.fill(0.0);
        let mut err_out = [0.0; 8];
        let mut err_out_vec = Vec::new();
        let err_out: &mut [f64] = if w1.rows <= err_out.len() {
            &mut err_out[..w1.rows]
        } else {
            err_out_vec.resize(w1.rows, 0.0);
            &mut err_out_vec
        };
        let mut loss = 0.0;
        for item in items {
            for (r, h) in hidden.iter_mut().enumerate() {
                *h = hid_act.apply(affine(w0.row(r), &item.input));
            }
            let mut squared = 0.0;
            for (k, e) in err_out.iter_mut().enumerate() {
                let o = out_act.apply(affine(w1.row(k), hidden));
                let diff = o - item.target[k];
                squared += diff * diff;
                *e = -diff * out_act.derivative_from_output(o);
            }
            loss += 0.5 * squared;
            for (k, e) in err_out.iter().enumerate() {
                let (bias, w) = g1.row_mut(k).split_last_mut().expect("bias column");
                for (gw, x) in w.iter_mut().zip(hidden.iter()) {
                    *gw += -e * x;
                }
                *bias += -e;
            }
            for (j, h) in hidden.iter().enumerate() {
                let back: f64 = (0..w1.rows).map(|k| w1.get(k, j) * err_out[k]).sum();
                let e = back * hid_act.derivative_from_output(*h);
                let (bias, w) = g0.row_mut(j).split_last_mut().expect("bias column");
                for (gw, x) in w.iter_mut().zip(&item.input) {
                    *gw += -e * x;
                }
                *bias += -e;
            }
        }
        let n = items.len() as f64;
        for g in grad.iter_mut() {
            for v in g.as_mut_slice() {
                *v /= n;
            }
        }
        loss / n
    }

    /// Full-batch gradient descent on the mean loss over `items`.
    ///
    /// Runs at most `max_iterations` steps and stops once the mean loss drops
    /// below [`BATCH_LOSS_TOLERANCE`]. A step that would raise the loss is
    /// retried with half the step size; the call ends if no halving helps.
    pub fn batch_backprop(
        &mut self,
        items: &[BatchItem],
        learning_rate: f64,
        max_iterations: usize,
    ) -> Result<BatchReport> {
        if items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        check_rate(learning_rate)?;
        if max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        for item in items {
            self.check_input(&item.input)?;
            self.check_target(&item.target)?;
        }
        let zero_grad = || -> Vec<WeightMatrix> {
            self.weights
                .iter()
                .map(|l| WeightMatrix::zeros(l.rows, l.cols))
                .collect()
        };
        let (mut grad, mut cand_grad) = (zero_grad(), zero_grad());
        let mut hidden = vec![0.0; self.layer_sizes[1]];
        let initial_loss = self.batch_pass(items, &mut grad, &mut hidden);
        let mut candidate = self.clone();
        let mut loss = initial_loss;
        let mut iterations = 0;
        'outer: while iterations < max_iterations && loss >= BATCH_LOSS_TOLERANCE {
            let mut step = learning_rate;
            for _ in 0..=MAX_STEP_HALVINGS {
                for ((c, w), g) in candidate.weights.iter_mut().zip(&self.weights).zip(&grad) {
                    c.data.copy_from_slice(&w.data);
                    c.add_scaled(g, -step);
                }
                let cand_loss = candidate.batch_pass(items, &mut cand_grad, &mut hidden);
                if cand_loss <= loss {
                    std::mem::swap(self, &mut candidate);
                    std::mem::swap(&mut grad, &mut cand_grad);
                    loss = cand_loss;
                    iterations += 1;
                    continue 'outer;
                }
                step *= 0.5;
            }
            break;
        }
        Ok(BatchReport {
            iterations,
            initial_loss,
            final_loss: loss,
        })
    }

    /// Adds `delta` (row-major, same shape as the layer) to one weight layer.
    pub fn apply_delta(&mut self, layer: usize, delta: &[f64]) -> Result<()> {
        let layers = self.weights.len();
        let target = self.weights.get_mut(layer).ok_or(Error::LayerIndex {
            index: layer,
            layers,
        })?;
        if delta.len() != target.data.len() {
            return Err(Error::Dimension {
                context: "weight delta",
                expected: target.data.len(),
                actual: delta.len(),
            });
        }
        check_finite(delta, "weight delta")?;
        for (w, d) in target.data.iter_mut().zip(delta) {
            *w += d;
        }
        Ok(())
    }
}

fn check_rate(learning_rate: f64) -> Result<()> {
    if learning_rate.is_finite() && learning_rate > 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            "learning_rate",
            "must be positive and finite",
        ))
    }
}

fn half_squared_error(out: &[f64], target: &[f64]) -> f64 {
    0.5 * out
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
}
