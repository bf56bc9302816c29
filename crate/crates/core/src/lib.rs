//! Single-image mesh reconstruction through a graph of deformable template
//! meshes.
//!
//! A shape is a template node of an [`graph::EmbeddingGraph`] deformed by a
//! symmetric 4×4×4 control lattice ([`ffd`]) and then blended with its
//! neighbors by sparse weights. Networks built with [`nn`] learn to predict
//! that code from a rendered grayscale view; [`pipeline`] wires the stages
//! together.
//!
//! Runnable walkthroughs live in this crate's `examples/` directory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ffd;
pub mod graph;
pub mod mesh;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use mesh::{Mesh, Vec3};
