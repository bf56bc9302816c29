use meshrecon::nn::{layer_backward, layer_forward, LayerSpec, Tensor};
use rand::Rng;

use super::rng;

pub const H: f64 = 1e-5;
pub const MAX_REL: f64 = 1e-4;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| r.random_range(-1.0..1.0))
}

/// Inputs bounded away from the ReLU kink by more than the step size.
pub fn away_from_zero(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| {
        let m = r.random_range(0.05..1.0);
        if r.random_bool(0.5) { m } else { -m }
    })
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale == 0.0 { 0.0 } else { diff / scale }
}

pub fn central_difference(values: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let keep = values[i];
            values[i] = keep + H;
            let up = f(values);
            values[i] = keep - H;
            let down = f(values);
            values[i] = keep;
            (up - down) / (2.0 * H)
        })
        .collect()
}

/// Worst relative error of the input and parameter gradients of one layer
/// against central differences of the scalar `Σ r·y` for a fixed random `r`.
pub fn check_layer(spec: &LayerSpec, input: &Tensor, seed: u64) -> f64 {
    let params: Vec<Tensor> = spec.param_shapes().iter().enumerate().map(|(k, s)| random_tensor(s, seed + 10 + k as u64)).collect();
    let y = layer_forward(spec, &params, input).unwrap();
    let r = random_tensor(&y.shape, seed + 99);
    let objective = |params: &[Tensor], x: &Tensor| -> f64 {
        let y = layer_forward(spec, params, x).unwrap();
        y.data.iter().zip(&r.data).map(|(a, b)| a * b).sum()
    };
    let (dx, dparams) = layer_backward(spec, &params, input, &r).unwrap();
    assert_eq!(dx.shape, input.shape, "{spec:?}: input gradient shape");
    assert_eq!(dparams.len(), params.len());

    let mut x = input.clone();
    let shape = x.shape.clone();
    let numeric = central_difference(&mut x.data, |d| objective(&params, &Tensor::new(shape.clone(), d.to_vec()).unwrap()));
    let mut worst = relative_error(&dx.data, &numeric);
    for k in 0..params.len() {
        let pshape = params[k].shape.clone();
        let numeric = central_difference(&mut params[k].data.clone(), |d| {
            let mut q = params.clone();
            q[k] = Tensor::new(pshape.clone(), d.to_vec()).unwrap();
            objective(&q, input)
        });
        worst = worst.max(relative_error(&dparams[k].data, &numeric));
    }
    worst
}
