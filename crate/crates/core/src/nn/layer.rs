use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::{matmul, Tensor};
use crate::error::{Error, Result};

/// Layer description. Parameterized layers carry their own channel counts so
/// a list of specs fully determines the parameter shapes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    ConvTranspose2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    },
    Linear {
        in_features: usize,
        out_features: usize,
    },
    Relu,
    Tanh,
    Flatten,
}

/// Spatial output size of a strided convolution.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    (padded >= kernel && stride > 0).then(|| (padded - kernel) / stride + 1)
}

/// Spatial output size of a transposed convolution.
pub fn tconv_output_size(input: usize, kernel: usize, stride: usize, padding: usize, output_padding: usize) -> Option<usize> {
    if input == 0 {
        return None;
    }
    let full = (input - 1) * stride + kernel + output_padding;
    (full > 2 * padding).then(|| full - 2 * padding)
}

impl LayerSpec {
    /// Shapes of the parameter tensors (weight first, then bias).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                vec![vec![out_channels, in_channels, kernel, kernel], vec![out_channels]]
            }
            LayerSpec::ConvTranspose2d { in_channels, out_channels, kernel, .. } => {
                vec![vec![in_channels, out_channels, kernel, kernel], vec![out_channels]]
            }
            LayerSpec::Linear { in_features, out_features } => {
                vec![vec![out_features, in_features], vec![out_features]]
            }
            LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Flatten => vec![],
        }
    }

    /// Fan-in used for uniform initialization bounds.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
            LayerSpec::ConvTranspose2d { out_channels, kernel, .. } => out_channels * kernel * kernel,
            LayerSpec::Linear { in_features, .. } => in_features,
            _ => 0,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |msg: String| Err(Error::Shape(format!("{self:?}: {msg}")));
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                let [c, h, w] = input else { return bad(format!("expected C×H×W input, got {input:?}")) };
                if *c != in_channels {
                    return bad(format!("expected {in_channels} channels, got {c}"));
                }
                match (conv_output_size(*h, kernel, stride, padding), conv_output_size(*w, kernel, stride, padding)) {
                    (Some(oh), Some(ow)) if oh >= 1 && ow >= 1 => Ok(vec![out_channels, oh, ow]),
                    _ => bad(format!("non-positive output size for input {input:?}")),
                }
            }
            LayerSpec::ConvTranspose2d { in_channels, out_channels, kernel, stride, padding, output_padding } => {
                let [c, h, w] = input else { return bad(format!("expected C×H×W input, got {input:?}")) };
                if *c != in_channels {
                    return bad(format!("expected {in_channels} channels, got {c}"));
                }
                if output_padding >= stride {
                    return bad(format!("output padding {output_padding} must be smaller than stride {stride}"));
                }
                match (
                    tconv_output_size(*h, kernel, stride, padding, output_padding),
                    tconv_output_size(*w, kernel, stride, padding, output_padding),
                ) {
                    (Some(oh), Some(ow)) => Ok(vec![out_channels, oh, ow]),
                    _ => bad(format!("non-positive output size for input {input:?}")),
                }
            }
            LayerSpec::Linear { in_features, out_features } => {
                let n: usize = input.iter().product();
                if input.len() != 1 || n != in_features {
                    return bad(format!("expected a vector of {in_features}, got {input:?}"));
                }
                Ok(vec![out_features])
            }
            LayerSpec::Relu | LayerSpec::Tanh => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    fn source(&self, o: usize, k: usize, size: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < size).then_some(pos as usize)
    }
}

fn im2col(x: &[f64], g: &Geometry) -> Vec<f64> {
    let cols = g.cols();
    let mut out = vec![0.0; g.rows() * cols];
    for c in 0..g.channels {
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let dst = &mut out[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let Some(sy) = g.source(oy, ki, g.height) else { continue };
                    let src = &x[(c * g.height + sy) * g.width..(c * g.height + sy + 1) * g.width];
                    for ox in 0..g.out_w {
                        if let Some(sx) = g.source(ox, kj, g.width) {
                            dst[oy * g.out_w + ox] = src[sx];
                        }
                    }
                }
            }
        }
    }
    out
}

fn col2im(cols_data: &[f64], g: &Geometry) -> Vec<f64> {
    let cols = g.cols();
    let mut out = vec![0.0; g.channels * g.height * g.width];
    for c in 0..g.channels {
        for ki in 0..g.kernel {
            for kj in 0..g.kernel {
                let row = (c * g.kernel + ki) * g.kernel + kj;
                let src = &cols_data[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let Some(sy) = g.source(oy, ki, g.height) else { continue };
                    let base = (c * g.height + sy) * g.width;
                    for ox in 0..g.out_w {
                        if let Some(sx) = g.source(ox, kj, g.width) {
                            out[base + sx] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

fn check_params(spec: &LayerSpec, params: &[Tensor]) -> Result<()> {
    let shapes = spec.param_shapes();
    if params.len() != shapes.len() || params.iter().zip(&shapes).any(|(p, s)| &p.shape != s) {
        return Err(Error::Shape(format!("{spec:?}: parameter shapes do not match")));
    }
    Ok(())
}

fn batch_output(spec: &LayerSpec, x: &Tensor) -> Result<Vec<usize>> {
    if x.shape.is_empty() {
        return Err(Error::Shape("input has no batch dimension".into()));
    }
    let mut shape = vec![x.batch()];
    shape.extend(spec.output_shape(x.sample_shape())?);
    Ok(shape)
}

// Per-sample results are computed in parallel and reduced in sample order,
// so results do not depend on thread scheduling.
fn sum_in_order(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc
}

/// Applies one layer to a batch.
pub fn layer_forward(spec: &LayerSpec, params: &[Tensor], x: &Tensor) -> Result<Tensor> {
    check_params(spec, params)?;
    let out_shape = batch_output(spec, x)?;
    let out_len: usize = out_shape[1..].iter().product();
    let batch = x.batch();
    let data = match *spec {
        LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
            let g = Geometry {
                channels: in_channels,
                height: x.shape[2],
                width: x.shape[3],
                kernel,
                stride,
                padding,
                out_h: out_shape[2],
                out_w: out_shape[3],
            };
            let (w, b) = (&params[0].data, &params[1].data);
            let mut out = vec![0.0; batch * out_len];
            out.par_chunks_mut(out_len).enumerate().for_each(|(s, y)| {
                let cols = im2col(x.sample(s), &g);
                matmul(out_channels, g.rows(), g.cols(), w, false, &cols, false, y, false);
                for (co, chunk) in y.chunks_mut(g.cols()).enumerate() {
                    chunk.iter_mut().for_each(|v| *v += b[co]);
                }
            });
            out
        }
        LayerSpec::ConvTranspose2d { in_channels, out_channels, kernel, stride, padding, .. } => {
            let g = Geometry {
                channels: out_channels,
                height: out_shape[2],
                width: out_shape[3],
                kernel,
                stride,
                padding,
                out_h: x.shape[2],
                out_w: x.shape[3],
            };
            let (w, b) = (&params[0].data, &params[1].data);
            let plane = out_shape[2] * out_shape[3];
            let mut out = vec![0.0; batch * out_len];
            out.par_chunks_mut(out_len).enumerate().for_each(|(s, y)| {
                let mut cols = vec![0.0; g.rows() * g.cols()];
                matmul(g.rows(), in_channels, g.cols(), w, true, x.sample(s), false, &mut cols, false);
                y.copy_from_slice(&col2im(&cols, &g));
                for (co, chunk) in y.chunks_mut(plane).enumerate() {
                    chunk.iter_mut().for_each(|v| *v += b[co]);
                }
            });
            out
        }
        LayerSpec::Linear { in_features, out_features } => {
            let mut out = vec![0.0; batch * out_features];
            matmul(batch, in_features, out_features, &x.data, false, &params[0].data, true, &mut out, false);
            for row in out.chunks_mut(out_features) {
                row.iter_mut().zip(&params[1].data).for_each(|(v, b)| *v += b);
            }
            out
        }
        LayerSpec::Relu => x.data.iter().map(|&v| v.max(0.0)).collect(),
        LayerSpec::Tanh => x.data.iter().map(|v| v.tanh()).collect(),
        LayerSpec::Flatten => x.data.clone(),
    };
    Tensor::new(out_shape, data)
}

/// Gradients of one layer given its forward input and the upstream gradient.
/// Returns the input gradient and one gradient tensor per parameter.
pub fn layer_backward(spec: &LayerSpec, params: &[Tensor], x: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
    check_params(spec, params)?;
    let out_shape = batch_output(spec, x)?;
    if grad_out.shape != out_shape {
        return Err(Error::Shape(format!(
            "{spec:?}: upstream gradient has shape {:?}, expected {out_shape:?}",
            grad_out.shape
        )));
    }
    let batch = x.batch();
    let in_len = x.sample_len();
    match *spec {
        LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
            let g = Geometry {
                channels: in_channels,
                height: x.shape[2],
                width: x.shape[3],
                kernel,
                stride,
                padding,
                out_h: out_shape[2],
                out_w: out_shape[3],
            };
            let w = &params[0].data;
            let wlen = w.len();
            let parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..batch)
                .into_par_iter()
                .map(|s| {
                    let dy = grad_out.sample(s);
                    let cols = im2col(x.sample(s), &g);
                    let mut dw = vec![0.0; wlen];
                    matmul(out_channels, g.cols(), g.rows(), dy, false, &cols, true, &mut dw, false);
                    let db: Vec<f64> = dy.chunks(g.cols()).map(|c| c.iter().sum()).collect();
                    let mut dcols = vec![0.0; g.rows() * g.cols()];
                    matmul(g.rows(), out_channels, g.cols(), w, true, dy, false, &mut dcols, false);
                    (col2im(&dcols, &g), dw, db)
                })
                .collect();
            reduce_conv(parts, batch, in_len, &x.shape, wlen, out_channels, params)
        }
        LayerSpec::ConvTranspose2d { in_channels, out_channels, kernel, stride, padding, .. } => {
            let g = Geometry {
                channels: out_channels,
                height: out_shape[2],
                width: out_shape[3],
                kernel,
                stride,
                padding,
                out_h: x.shape[2],
                out_w: x.shape[3],
            };
            let w = &params[0].data;
            let wlen = w.len();
            let plane = out_shape[2] * out_shape[3];
            let parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..batch)
                .into_par_iter()
                .map(|s| {
                    let dy = grad_out.sample(s);
                    let dcols = im2col(dy, &g);
                    let mut dx = vec![0.0; in_len];
                    matmul(in_channels, g.rows(), g.cols(), w, false, &dcols, false, &mut dx, false);
                    let mut dw = vec![0.0; wlen];
                    matmul(in_channels, g.cols(), g.rows(), x.sample(s), false, &dcols, true, &mut dw, false);
                    let db: Vec<f64> = dy.chunks(plane).map(|c| c.iter().sum()).collect();
                    (dx, dw, db)
                })
                .collect();
            reduce_conv(parts, batch, in_len, &x.shape, wlen, out_channels, params)
        }
        LayerSpec::Linear { in_features, out_features } => {
            let w = &params[0].data;
            let dy = &grad_out.data;
            let mut dx = vec![0.0; batch * in_features];
            matmul(batch, out_features, in_features, dy, false, w, false, &mut dx, false);
            let mut dw = vec![0.0; out_features * in_features];
            matmul(out_features, batch, in_features, dy, true, &x.data, false, &mut dw, false);
            let mut db = vec![0.0; out_features];
            for row in dy.chunks(out_features) {
                db.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
            Ok((
                Tensor::new(x.shape.clone(), dx)?,
                vec![Tensor::new(params[0].shape.clone(), dw)?, Tensor::new(vec![out_features], db)?],
            ))
        }
        LayerSpec::Relu => {
            let dx = x
                .data
                .iter()
                .zip(&grad_out.data)
                .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                .collect();
            Ok((Tensor::new(x.shape.clone(), dx)?, vec![]))
        }
        LayerSpec::Tanh => {
            let dx = x
                .data
                .iter()
                .zip(&grad_out.data)
                .map(|(&v, &g)| {
                    let t = v.tanh();
                    g * (1.0 - t * t)
                })
                .collect();
            Ok((Tensor::new(x.shape.clone(), dx)?, vec![]))
        }
        LayerSpec::Flatten => Ok((Tensor::new(x.shape.clone(), grad_out.data.clone())?, vec![])),
    }
}

fn reduce_conv(
    parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    batch: usize,
    in_len: usize,
    in_shape: &[usize],
    wlen: usize,
    out_channels: usize,
    params: &[Tensor],
) -> Result<(Tensor, Vec<Tensor>)> {
    let mut dx = Vec::with_capacity(batch * in_len);
    let mut dws = Vec::with_capacity(batch);
    let mut dbs = Vec::with_capacity(batch);
    for (x, w, b) in parts {
        dx.extend(x);
        dws.push(w);
        dbs.push(b);
    }
    Ok((
        Tensor::new(in_shape.to_vec(), dx)?,
        vec![
            Tensor::new(params[0].shape.clone(), sum_in_order(dws, wlen))?,
            Tensor::new(vec![out_channels], sum_in_order(dbs, out_channels))?,
        ],
    ))
}
