use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{layer_backward, layer_forward, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<Tensor>,
    pub grads: Vec<Tensor>,
}

/// Sequential network over batched tensors `[batch, ...sample_shape]`.
#[derive(Debug, Clone)]
pub struct Network {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
    pub seed: u64,
    /// Optimizer steps taken so far.
    pub step: u64,
    // Inputs of every layer from the last caching forward pass.
    cache: Option<Vec<Tensor>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape && self.layers == other.layers
    }
}

impl Network {
    /// Builds the network and initializes every weight and bias uniformly in
    /// `±1/sqrt(fan_in)`.
    pub fn new(input_shape: &[usize], specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        for spec in &specs {
            shape = spec.output_shape(&shape)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .into_iter()
            .map(|spec| {
                let bound = match spec.fan_in() {
                    0 => 0.0,
                    f => 1.0 / (f as f64).sqrt(),
                };
                let params: Vec<Tensor> = spec
                    .param_shapes()
                    .iter()
                    .map(|s| Tensor::from_fn(s, |_| rng.random_range(-bound..=bound)))
                    .collect();
                let grads = params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
                Layer { spec, params, grads }
            })
            .collect();
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            seed,
            step: 0,
            cache: None,
        })
    }

    /// Per-sample shapes from the input through every layer.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        let mut trace = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.spec.output_shape(trace.last().unwrap())?;
            trace.push(next);
        }
        Ok(trace)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shape_trace()?.pop().unwrap())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.params).map(Tensor::len).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape.len() != self.input_shape.len() + 1 || x.sample_shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "network expects [batch, {:?}], got {:?}",
                self.input_shape, x.shape
            )));
        }
        Ok(())
    }

    /// Pure forward pass through the first `count` layers.
    pub fn predict_prefix(&self, x: &Tensor, count: usize) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers[..count.min(self.layers.len())] {
            cur = layer_forward(&layer.spec, &layer.params, &cur)?;
        }
        Ok(cur)
    }

    /// Pure forward pass.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.predict_prefix(x, self.layers.len())
    }

    /// Forward pass that keeps the activations needed by [`Network::backward`].
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let next = layer_forward(&layer.spec, &layer.params, &cur)?;
            inputs.push(cur);
            cur = next;
        }
        self.cache = Some(inputs);
        Ok(cur)
    }

    /// Backpropagates `grad` from the last cached forward pass, accumulating
    /// parameter gradients. Returns the gradient with respect to the input.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let inputs = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        let mut g = grad.clone();
        for (layer, input) in self.layers.iter_mut().zip(&inputs).rev() {
            let (dx, dparams) = layer_backward(&layer.spec, &layer.params, input, &g)?;
            for (acc, d) in layer.grads.iter_mut().zip(dparams) {
                acc.data.iter_mut().zip(d.data).for_each(|(a, v)| *a += v);
            }
            g = dx;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            for g in &mut layer.grads {
                g.data.fill(0.0);
            }
        }
    }

    /// `(parameter, gradient)` slices in declaration order.
    pub fn params_and_grads(&mut self) -> impl Iterator<Item = (&mut [f64], &[f64])> {
        self.layers.iter_mut().flat_map(|l| {
            l.params
                .iter_mut()
                .zip(l.grads.iter())
                .map(|(p, g)| (p.data.as_mut_slice(), g.data.as_slice()))
        })
    }
}

/// Number of leading CAE layers that make up the encoder.
pub const CAE_ENCODER_LAYERS: usize = 6;
pub const CAE_INPUT_SIZE: usize = 220;
pub const LATENT_LEN: usize = 2048;
pub const CLASSIFIER_HIDDEN: usize = 1050;
pub const REGRESSOR_HIDDEN: usize = 1500;

fn conv(in_channels: usize, out_channels: usize, kernel: usize) -> LayerSpec {
    LayerSpec::Conv2d { in_channels, out_channels, kernel, stride: 3, padding: 0 }
}

fn tconv(in_channels: usize, out_channels: usize, kernel: usize, output_padding: usize) -> LayerSpec {
    LayerSpec::ConvTranspose2d { in_channels, out_channels, kernel, stride: 3, padding: 0, output_padding }
}

/// Convolutional autoencoder for 1×220×220 images. The encoder (first
/// [`CAE_ENCODER_LAYERS`] layers) ends at 32×8×8 = 2048 values.
pub fn build_cae(seed: u64) -> Network {
    use LayerSpec::{Relu, Tanh};
    let specs = vec![
        conv(1, 8, 5),
        Relu,
        conv(8, 16, 3),
        Relu,
        conv(16, 32, 3),
        Relu,
        tconv(32, 16, 3, 0),
        Relu,
        tconv(16, 8, 3, 0),
        Relu,
        // (72 − 1)·3 + 5 = 218, so two rows of output padding reach 220.
        tconv(8, 1, 5, 2),
        Tanh,
    ];
    Network::new(&[1, CAE_INPUT_SIZE, CAE_INPUT_SIZE], specs, seed).expect("static CAE layout")
}

/// Latent codes `[batch, 2048]` from the CAE encoder.
pub fn encode(cae: &Network, images: &Tensor) -> Result<Tensor> {
    let z = cae.predict_prefix(images, CAE_ENCODER_LAYERS)?;
    let b = z.batch();
    let len = z.sample_len();
    z.reshape(&[b, len])
}

fn two_layer(hidden: usize, out: usize, seed: u64) -> Network {
    let specs = vec![
        LayerSpec::Linear { in_features: LATENT_LEN, out_features: hidden },
        LayerSpec::Relu,
        LayerSpec::Linear { in_features: hidden, out_features: out },
    ];
    Network::new(&[LATENT_LEN], specs, seed).expect("static head layout")
}

/// Latent → node-index logits.
pub fn build_classifier(num_labels: usize, seed: u64) -> Result<Network> {
    if num_labels < 2 {
        return Err(Error::Validation(format!("classifier needs at least 2 labels, got {num_labels}")));
    }
    Ok(two_layer(CLASSIFIER_HIDDEN, num_labels, seed))
}

/// Latent → shape code with a linear output.
pub fn build_regressor(out_dim: usize, seed: u64) -> Result<Network> {
    if out_dim == 0 {
        return Err(Error::Validation("regressor output must be non-empty".into()));
    }
    Ok(two_layer(REGRESSOR_HIDDEN, out_dim, seed))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
