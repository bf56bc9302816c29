//! End-to-end workflow: synthetic graph construction, training of the
//! autoencoder and the two heads, single-image reconstruction and
//! evaluation on the held-out split.

mod bundle;
mod config;
mod evaluate;
mod graphgen;
mod workflow;

pub use bundle::{train_pipeline, LatentNorm, LossCurves, TrainedBundle, BUNDLE_MANIFEST};
pub use config::{
    derive_seed, tags, DatasetConfig, GraphConfig, MetricsConfig, PipelineConfig, StageConfig,
};
pub use evaluate::{evaluate, evaluate_with, Evaluation, ParamSource, RecordEval};
pub use graphgen::{generate_graph, GraphGenOptions};
pub use workflow::{build_dataset, build_graph, dp_prior, graph_options};

use crate::error::Result;
use crate::graph::{linear_combine, participants, EmbeddingGraph, ShapeParams, DEFAULT_ZERO_TOL};
use crate::mesh::Mesh;
use crate::nn::{argmax, Tensor};
use crate::synth::{prepare_input, GrayImage, INPUT_SIZE};

/// Deforms node `params.index` by `params.dp`, then blends the result with
/// its neighbors by `params.alpha`.
pub fn reconstruct_from_params(graph: &EmbeddingGraph, params: &ShapeParams) -> Result<Mesh> {
    reconstruct_stages(graph, params, DEFAULT_ZERO_TOL).map(|(_, mesh)| mesh)
}

/// Same as [`reconstruct_from_params`], also returning the lattice-deformed
/// node before blending.
///
/// When every weight that would take part in the blend is at or below
/// `zero_tol`, the blend would collapse all vertices to the origin; the
/// deformed node is returned unchanged instead.
pub fn reconstruct_stages(graph: &EmbeddingGraph, params: &ShapeParams, zero_tol: f64) -> Result<(Mesh, Mesh)> {
    params.validate(graph)?;
    let c = params.index;
    let node = &graph.nodes[c];
    let deformed = graph.rig(c)?.deform(&node.mesh, &params.dp)?;
    let silent = params.alpha[c].abs() <= zero_tol && participants(graph, c, &params.alpha, zero_tol)?.is_empty();
    let blended = if silent {
        let mut alpha = vec![0.0; graph.len()];
        alpha[c] = 1.0;
        linear_combine(graph, c, &deformed, &alpha, zero_tol)?
    } else {
        linear_combine(graph, c, &deformed, &params.alpha, zero_tol)?
    };
    Ok((deformed, blended))
}

/// Outputs of a single-image reconstruction.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub params: ShapeParams,
    pub logits: Vec<f64>,
    /// The chosen template as stored in the graph.
    pub selected: Mesh,
    /// The template after lattice deformation.
    pub deformed: Mesh,
    pub mesh: Mesh,
}

/// Image → latent → node index and shape code → mesh.
pub fn reconstruct(image: &GrayImage, bundle: &TrainedBundle, graph: &EmbeddingGraph) -> Result<Reconstruction> {
    bundle.check_graph(graph)?;
    let x = Tensor::new(vec![1, 1, INPUT_SIZE, INPUT_SIZE], prepare_input(image))?;
    let z = bundle.features(&x)?;
    let logits = bundle.classifier.predict(&z)?.data;
    let kappa = bundle.regressor.predict(&z)?.data;
    let c = argmax(&logits);
    let params = ShapeParams::from_kappa(c, &kappa, graph.len())?;
    let (deformed, mesh) = reconstruct_stages(graph, &params, bundle.config.metrics.zero_tol)?;
    Ok(Reconstruction {
        params,
        logits,
        selected: graph.nodes[c].mesh.clone(),
        deformed,
        mesh,
    })
}
