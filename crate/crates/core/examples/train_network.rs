//! Trains a tiny convolutional network to count the bright pixels of a
//! random 12×12 image, showing the layer, loss and optimizer API.
//!
//! `cargo run --release --example train_network`

use meshrecon::nn::{evaluate_loss, train, LayerSpec, Loss, Network, Tensor, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 256;
    let x = Tensor::from_fn(&[n, 1, 12, 12], |_| if rng.random_bool(0.3) { 1.0 } else { 0.0 });
    let y = Tensor::from_fn(&[n, 1], |i| x.sample(i).iter().sum::<f64>() / 144.0);

    let specs = vec![
        LayerSpec::Conv2d { in_channels: 1, out_channels: 4, kernel: 3, stride: 3, padding: 0 },
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Linear { in_features: 64, out_features: 1 },
    ];
    let mut net = Network::new(&[1, 12, 12], specs, 0)?;
    println!("{} parameters, shapes {:?}", net.param_count(), net.shape_trace()?);

    let before = evaluate_loss(&net, &x, &y, Loss::Mse, 64)?;
    let config = TrainConfig { lr: 1e-2, epochs: 60, batch_size: 32, ..TrainConfig::default() };
    let curve = train(&mut net, &x, &y, Loss::Mse, &config)?;
    println!("MSE {before:.5} before, {:.6} after {} epochs", curve.last().unwrap(), curve.len());
    Ok(())
}
