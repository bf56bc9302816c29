use super::tensor::Tensor;
use crate::error::{Error, Result};

fn check_same(pred: &Tensor, target: &Tensor) -> Result<()> {
    if pred.shape != target.shape {
        return Err(Error::Shape(format!(
            "prediction shape {:?} does not match target shape {:?}",
            pred.shape, target.shape
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty loss input".into()));
    }
    Ok(())
}

/// Mean squared error over all elements and its gradient.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    check_same(pred, target)?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Tensor::new(pred.shape.clone(), grad)?))
}

// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-class logistic loss averaged over every element:
/// `−[y·ln σ(x) + (1−y)·ln(1−σ(x))]`.
pub fn multilabel_soft_margin_loss(logits: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    check_same(logits, target)?;
    if target.data.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Validation("multi-label targets must be 0 or 1".into()));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .data
        .iter()
        .zip(&target.data)
        .map(|(&x, &y)| {
            loss += y * softplus(-x) + (1.0 - y) * softplus(x);
            (sigmoid(x) - y) / n
        })
        .collect();
    Ok((loss / n, Tensor::new(logits.shape.clone(), grad)?))
}
