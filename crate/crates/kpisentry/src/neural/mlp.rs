//! Feedforward autoencoder trained by mini-batch gradient descent on mean
//! squared reconstruction error.
//!
//! The network is symmetric around its bottleneck (e.g. 19-32-16-16-32-19);
//! hidden layers use one activation throughout, the output layer is linear.
//! Inverted dropout is applied to hidden activations during training only.
//! Everything is deterministic given the seed: weight init, mini-batch
//! order and dropout masks all derive from one ChaCha stream.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, SchemaId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Hidden layer widths, symmetric around the bottleneck,
    /// e.g. `[32, 16, 16, 32]`.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![32, 16, 16, 32],
            activation: Activation::Relu,
            dropout_rate: 0.05,
            epochs: 100,
            batch_size: 16,
            learning_rate: 3e-3,
            seed: 1337,
        }
    }
}

impl MlpParams {
    fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layer widths must be non-empty and positive".into(),
            ));
        }
        let reversed: Vec<usize> = self.hidden.iter().rev().copied().collect();
        if self.hidden != reversed {
            return Err(Error::InvalidConfig(format!(
                "hidden widths must be symmetric around the bottleneck, got {:?}",
                self.hidden
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One dense layer; `weights[out][in]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Layer {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = (0..fan_out)
            .map(|_| (0..fan_in).map(|_| rng.random_range(-bound..bound)).collect())
            .collect();
        Layer {
            weights,
            bias: vec![0.0; fan_out],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.iter().zip(&self.bias) {
            let mut z = *b;
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoEncoderModel {
    pub schema: SchemaId,
    pub params: MlpParams,
    pub layers: Vec<Layer>,
    /// Layers making up the encoder half: everything up to and including the
    /// first layer whose output has the bottleneck width.
    pub encoder_layers: usize,
    /// Reconstruction-error cutoff; fitted from training errors by the
    /// wrapping detector, 0 until then.
    pub error_threshold: f64,
    /// Mean training loss per epoch, recorded during fitting.
    pub loss_history: Vec<f64>,
}

impl AutoEncoderModel {
    pub fn input_width(&self) -> usize {
        self.layers[0].weights[0].len()
    }

    /// Width of the latent code produced by the encoder half.
    pub fn latent_width(&self) -> usize {
        self.layers[self.encoder_layers - 1].bias.len()
    }

    fn check_input(&self, x: &FeatureVector) -> Result<()> {
        x.expect_schema(self.schema)?;
        if x.values.len() != self.input_width() {
            return Err(Error::InvalidInput(format!(
                "input width {} does not match network input {}",
                x.values.len(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Deterministic full forward pass (dropout disabled).
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut next = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut next);
            if l + 1 < self.layers.len() {
                for z in next.iter_mut() {
                    *z = self.params.activation.apply(*z);
                }
            }
            std::mem::swap(&mut a, &mut next);
        }
        a
    }

    /// Latent code: forward through the encoder half only.
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers[..self.encoder_layers] {
            layer.forward(&a, &mut next);
            for z in next.iter_mut() {
                *z = self.params.activation.apply(*z);
            }
            std::mem::swap(&mut a, &mut next);
        }
        a
    }

    /// Squared reconstruction error `||x - decode(encode(x))||^2`.
    pub fn reconstruction_error(&self, x: &FeatureVector) -> Result<f64> {
        self.check_input(x)?;
        let xhat = self.reconstruct(&x.values);
        Ok(x.values
            .iter()
            .zip(&xhat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Anomalous iff the reconstruction error exceeds the fitted threshold.
    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        Ok(self.reconstruction_error(x)? > self.error_threshold)
    }

    /// Mean squared reconstruction loss over a batch, dropout disabled.
    pub fn batch_loss(&self, xs: &[FeatureVector]) -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let mut total = 0.0;
        for x in xs {
            total += self.reconstruction_error(x)?;
        }
        Ok(total / xs.len() as f64)
    }

    /// All parameters flattened: per layer, weights row-major then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for row in &layer.weights {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        let expected: usize = self
            .layers
            .iter()
            .map(|l| l.weights.len() * l.weights[0].len() + l.bias.len())
            .sum();
        if flat.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} parameters, got {}",
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for row in &mut layer.weights {
                for w in row.iter_mut() {
                    *w = *it.next().unwrap();
                }
            }
            for b in &mut layer.bias {
                *b = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Analytic gradient of [`batch_loss`](Self::batch_loss) with respect to
    /// the flattened parameters, dropout disabled.
    pub fn loss_gradient(&self, xs: &[FeatureVector]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        for x in xs {
            self.check_input(x)?;
        }
        let rows: Vec<&[f64]> = xs.iter().map(|x| x.values.as_slice()).collect();
        let mut grads = GradBuffer::zeros(&self.layers);
        backprop_batch(
            &self.layers,
            self.params.activation,
            &rows,
            None,
            &mut grads,
        );
        Ok(grads.flatten())
    }
}

struct GradBuffer {
    weights: Vec<Vec<Vec<f64>>>,
    bias: Vec<Vec<f64>>,
}

impl GradBuffer {
    fn zeros(layers: &[Layer]) -> Self {
        GradBuffer {
            weights: layers
                .iter()
                .map(|l| vec![vec![0.0; l.weights[0].len()]; l.weights.len()])
                .collect(),
            bias: layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn reset(&mut self) {
        for lw in &mut self.weights {
            for row in lw {
                row.fill(0.0);
            }
        }
        for lb in &mut self.bias {
            lb.fill(0.0);
        }
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (lw, lb) in self.weights.iter().zip(&self.bias) {
            for row in lw {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(lb);
        }
        out
    }
}

/// Per-sample dropout masks for hidden layers; `None` disables dropout.
struct DropoutPlan<'a> {
    rate: f64,
    rng: &'a mut ChaCha8Rng,
}

/// Accumulate gradients of the mean batch loss into `grads`.
/// Returns the batch loss actually incurred (with dropout, if any).
fn backprop_batch(
    layers: &[Layer],
    activation: Activation,
    batch: &[&[f64]],
    mut dropout: Option<&mut DropoutPlan>,
    grads: &mut GradBuffer,
) -> f64 {
    let n_layers = layers.len();
    let inv_batch = 1.0 / batch.len() as f64;
    let mut total_loss = 0.0;

    // Reused per-sample buffers.
    let mut pre: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
    let mut post: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.bias.len()]).collect();
    let mut masks: Vec<Vec<f64>> = layers.iter().map(|l| vec![1.0; l.bias.len()]).collect();

    for &x in batch {
        // Forward, recording pre-activations and post-dropout activations.
        for l in 0..n_layers {
            let input: &[f64] = if l == 0 { x } else { &post[l - 1] };
            let layer = &layers[l];
            for (o, (row, b)) in layer.weights.iter().zip(&layer.bias).enumerate() {
                let mut z = *b;
                for (w, xi) in row.iter().zip(input) {
                    z += w * xi;
                }
                pre[l][o] = z;
            }
            let last = l == n_layers - 1;
            for o in 0..layers[l].bias.len() {
                let mut a = if last {
                    pre[l][o]
                } else {
                    activation.apply(pre[l][o])
                };
                let mut m = 1.0;
                if !last {
                    if let Some(plan) = dropout.as_deref_mut() {
                        if plan.rng.random_range(0.0..1.0) < plan.rate {
                            m = 0.0;
                        } else {
                            m = 1.0 / (1.0 - plan.rate);
                        }
                        a *= m;
                    }
                }
                masks[l][o] = m;
                post[l][o] = a;
            }
        }

        let output = &post[n_layers - 1];
        total_loss += output
            .iter()
            .zip(x)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>();

        // Backward. delta starts as dLoss/d(output) for the mean batch loss.
        let mut delta: Vec<f64> = output
            .iter()
            .zip(x)
            .map(|(o, t)| 2.0 * (o - t) * inv_batch)
            .collect();
        for l in (0..n_layers).rev() {
            if l < n_layers - 1 {
                // Through dropout scaling and the activation.
                for (o, d) in delta.iter_mut().enumerate() {
                    *d *= masks[l][o] * activation.derivative(pre[l][o]);
                }
            }
            let input: &[f64] = if l == 0 { x } else { &post[l - 1] };
            for (o, d) in delta.iter().enumerate() {
                let grow = &mut grads.weights[l][o];
                for (g, xi) in grow.iter_mut().zip(input) {
                    *g += d * xi;
                }
                grads.bias[l][o] += d;
            }
            if l > 0 {
                let mut prev = vec![0.0; layers[l].weights[0].len()];
                for (o, d) in delta.iter().enumerate() {
                    for (p, w) in prev.iter_mut().zip(&layers[l].weights[o]) {
                        *p += w * d;
                    }
                }
                delta = prev;
            }
        }
    }
    total_loss * inv_batch
}

/// Train an autoencoder on (scaled) feature vectors.
///
/// The training set mean loss of the final epoch must come out strictly
/// below the first epoch's; anything else is reported as a training failure,
/// as is a non-finite loss.
pub fn train_autoencoder(xs: &[FeatureVector], params: &MlpParams) -> Result<AutoEncoderModel> {
    params.validate()?;
    let Some(first) = xs.first() else {
        return Err(Error::InvalidInput("empty training set".into()));
    };
    if xs.len() < params.batch_size {
        return Err(Error::InvalidInput(format!(
            "need at least batch_size ({}) training rows, got {}",
            params.batch_size,
            xs.len()
        )));
    }
    let schema = first.schema;
    for x in xs {
        x.expect_schema(schema)?;
    }
    let d = schema.len();

    let mut widths = Vec::with_capacity(params.hidden.len() + 2);
    widths.push(d);
    widths.extend_from_slice(&params.hidden);
    widths.push(d);

    let bottleneck = *params.hidden.iter().min().expect("non-empty hidden");
    let encoder_layers = params
        .hidden
        .iter()
        .position(|w| *w == bottleneck)
        .expect("bottleneck present")
        + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let layers: Vec<Layer> = widths
        .windows(2)
        .map(|w| Layer::glorot(w[0], w[1], &mut rng))
        .collect();

    let mut model = AutoEncoderModel {
        schema,
        params: params.clone(),
        layers,
        encoder_layers,
        error_threshold: 0.0,
        loss_history: Vec::with_capacity(params.epochs),
    };

    let rows: Vec<&[f64]> = xs.iter().map(|x| x.values.as_slice()).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut grads = GradBuffer::zeros(&model.layers);

    for epoch in 0..params.epochs {
        // Seeded shuffle; order is part of the deterministic contract.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(params.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| rows[i]).collect();
            grads.reset();
            let loss = if params.dropout_rate > 0.0 {
                let mut plan = DropoutPlan {
                    rate: params.dropout_rate,
                    rng: &mut rng,
                };
                backprop_batch(
                    &model.layers,
                    params.activation,
                    &batch,
                    Some(&mut plan),
                    &mut grads,
                )
            } else {
                backprop_batch(&model.layers, params.activation, &batch, None, &mut grads)
            };
            epoch_loss += loss * batch.len() as f64;
            seen += batch.len();

            let lr = params.learning_rate;
            for (layer, (gw, gb)) in model
                .layers
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.bias))
            {
                for (row, grow) in layer.weights.iter_mut().zip(gw) {
                    for (w, g) in row.iter_mut().zip(grow) {
                        *w -= lr * g;
                    }
                }
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b -= lr * g;
                }
            }
        }
        let mean = epoch_loss / seen as f64;
        if !mean.is_finite() {
            return Err(Error::Training(format!(
                "loss diverged to {mean} at epoch {epoch}"
            )));
        }
        model.loss_history.push(mean);
    }

    if params.epochs >= 2 {
        let first_loss = model.loss_history[0];
        let last_loss = *model.loss_history.last().unwrap();
        if last_loss >= first_loss {
            return Err(Error::Training(format!(
                "no training progress: first epoch loss {first_loss}, final {last_loss}"
            )));
        }
    }
    Ok(model)
}
