//! Checkpoint files: an 8-byte magic, a little-endian `u64` header length, a
//! JSON header (layer specs, parameter shapes, step, seed), then every
//! parameter as little-endian `f64` in declaration order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::network::Network;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MRCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub param_shapes: Vec<Vec<usize>>,
    pub step: u64,
    pub seed: u64,
}

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let header = CheckpointHeader {
        input_shape: net.input_shape.clone(),
        layers: net.layers.iter().map(|l| l.spec.clone()).collect(),
        param_shapes: net.layers.iter().flat_map(|l| l.params.iter().map(|p| p.shape.clone())).collect(),
        step: net.step,
        seed: net.seed,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + net.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for layer in &net.layers {
        for p in &layer.params {
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Network> {
    let corrupt = |message: &str| Error::Checkpoint {
        path: origin.to_path_buf(),
        message: message.to_string(),
    };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| corrupt("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| corrupt(&format!("bad header: {e}")))?;
    let mut net = Network::new(&header.input_shape, header.layers.clone(), header.seed)
        .map_err(|e| corrupt(&format!("invalid layer stack: {e}")))?;
    let shapes: Vec<Vec<usize>> = net
        .layers
        .iter()
        .flat_map(|l| l.params.iter().map(|p| p.shape.clone()))
        .collect();
    if shapes != header.param_shapes {
        return Err(corrupt("parameter shapes disagree with layer specs"));
    }
    let mut values = bytes[16 + hlen..].chunks_exact(8);
    if values.len() != net.param_count() || !values.remainder().is_empty() {
        return Err(corrupt("parameter payload has the wrong length"));
    }
    for layer in &mut net.layers {
        for p in &mut layer.params {
            for v in &mut p.data {
                *v = f64::from_le_bytes(values.next().unwrap().try_into().unwrap());
            }
        }
    }
    net.step = header.step;
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
