use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ffd::{FfdRig, ReducedDisplacements};
use crate::graph::{EmbeddingGraph, GraphNode};
use crate::mesh::Mesh;

/// Synthetic graph: `nodes` copies of `base`, each deformed by a random
/// mirror-symmetric lattice displacement, joined to their nearest peers.
#[derive(Debug, Clone)]
pub struct GraphGenOptions {
    pub base: Mesh,
    pub nodes: usize,
    /// Standard deviation of each displacement coordinate, in lattice units.
    pub jitter: f64,
    pub neighbors: usize,
    pub mirror_axis: usize,
    pub seed: u64,
}

impl GraphGenOptions {
    pub fn new(nodes: usize, seed: u64) -> Self {
        Self {
            base: Mesh::uv_sphere(1.0, 10, 16),
            nodes,
            jitter: 0.45,
            neighbors: 1,
            mirror_axis: 0,
            seed,
        }
    }
}

fn mean_vertex_distance(a: &Mesh, b: &Mesh) -> f64 {
    a.vertices.iter().zip(&b.vertices).map(|(p, q)| (p - q).norm()).sum::<f64>() / a.vertices.len() as f64
}

pub fn generate_graph(options: &GraphGenOptions) -> Result<EmbeddingGraph> {
    if options.nodes < 2 {
        return Err(Error::Validation("graph needs at least 2 nodes".into()));
    }
    if !(options.jitter >= 0.0) {
        return Err(Error::Validation(format!("jitter {} must be non-negative", options.jitter)));
    }
    let rig = FfdRig::new(&options.base, crate::ffd::DEFAULT_DIMS, crate::ffd::DEFAULT_MARGIN, options.mirror_axis)?;
    let reduced = rig.symmetry.reduced_len();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let normal = Normal::new(0.0, options.jitter.max(f64::MIN_POSITIVE)).expect("finite jitter");

    let mut meshes = Vec::with_capacity(options.nodes);
    for _ in 0..options.nodes {
        let mut dp = ReducedDisplacements::zeros(reduced);
        for v in &mut dp.values {
            for x in v.iter_mut() {
                *x = if options.jitter > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            }
        }
        meshes.push(rig.deform(&options.base, &dp)?);
    }

    let k = options.neighbors.min(options.nodes - 1);
    let mut edges = Vec::new();
    for i in 0..options.nodes {
        let mut by_distance: Vec<(f64, usize)> = (0..options.nodes)
            .filter(|&j| j != i)
            .map(|j| (mean_vertex_distance(&meshes[i], &meshes[j]), j))
            .collect();
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(by_distance.iter().take(k).map(|&(_, j)| (i, j)));
    }

    let nodes = meshes
        .into_iter()
        .enumerate()
        .map(|(i, m)| GraphNode::new(i, m, format!("nodes/node_{i:03}.obj")))
        .collect();
    EmbeddingGraph::new(nodes, &edges, options.mirror_axis)
}
