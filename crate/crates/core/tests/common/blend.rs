use meshrecon::graph::{EmbeddingGraph, DEFAULT_ZERO_TOL};
use meshrecon::mesh::{Mesh, Vec3};
use rand::Rng;

use super::rng;

pub struct Case {
    pub graph: EmbeddingGraph,
    pub adjacency: Vec<Vec<bool>>,
    pub c: usize,
    pub alpha: Vec<f64>,
}

pub fn random_case(seed: u64) -> Case {
    let mut r = rng(seed);
    let n = r.random_range(3..=10);
    let base = Mesh::uv_sphere(1.0, 5, 7);
    let meshes: Vec<Mesh> = (0..n)
        .map(|_| {
            let shift = Vec3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), r.random_range(-0.3..0.3));
            let squash = r.random_range(0.6..1.4);
            base.map_vertices(|v| Vec3::new(v.x * squash, v.y, v.z) + shift)
        })
        .collect();
    let mut adjacency = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.random_bool(0.4) {
                edges.push((a, b));
            }
        }
    }
    for &(a, b) in &edges {
        adjacency[a][b] = true;
        adjacency[b][a] = true;
    }
    // Weights straddle the threshold: zero, tiny, and regular magnitudes.
    let alpha = (0..n)
        .map(|_| match r.random_range(0..4) {
            0 => 0.0,
            1 => r.random_range(-DEFAULT_ZERO_TOL..DEFAULT_ZERO_TOL),
            _ => r.random_range(-1.5..1.5),
        })
        .collect();
    Case {
        graph: EmbeddingGraph::from_meshes(meshes, &edges).unwrap(),
        adjacency,
        c: r.random_range(0..n),
        alpha,
    }
}

/// Plain per-vertex accumulation over an explicit adjacency matrix.
pub fn oracle(case: &Case, base: &[Vec3]) -> Vec<Vec3> {
    let n = case.alpha.len();
    (0..base.len())
        .map(|v| {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = case.alpha[case.c] * base[v][k];
                for i in 0..n {
                    if case.adjacency[case.c][i] && case.alpha[i].abs() > DEFAULT_ZERO_TOL {
                        p[k] += case.alpha[i] * case.graph.nodes[i].mesh.vertices[v][k];
                    }
                }
            }
            Vec3::new(p[0], p[1], p[2])
        })
        .collect()
}
