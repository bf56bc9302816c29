//! A small differentiable network stack: convolution, transposed
//! convolution, fully connected and activation layers over `f64` tensors,
//! MSE and multi-label soft-margin losses, Adam, and binary checkpoints.

mod adam;
mod checkpoint;
mod layer;
mod loss;
mod network;
mod tensor;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{from_bytes, load_checkpoint, save_checkpoint, to_bytes, CheckpointHeader};
pub use layer::{conv_output_size, layer_backward, layer_forward, tconv_output_size, LayerSpec};
pub use loss::{mse_loss, multilabel_soft_margin_loss};
pub use network::{
    argmax, build_cae, build_classifier, build_regressor, encode, Layer, Network, CAE_ENCODER_LAYERS,
    CAE_INPUT_SIZE, CLASSIFIER_HIDDEN, LATENT_LEN, REGRESSOR_HIDDEN,
};
pub use tensor::Tensor;
pub use train::{evaluate_loss, predict_batched, train, Loss, TrainConfig};
