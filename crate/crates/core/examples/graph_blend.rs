//! Builds a small template graph, then reconstructs one shape code: deform
//! the chosen node, blend with its neighbors.
//!
//! `cargo run --example graph_blend [out_dir]`

use std::path::PathBuf;

use meshrecon::ffd::ReducedDisplacements;
use meshrecon::graph::{participants, ShapeParams, DEFAULT_ZERO_TOL};
use meshrecon::mesh::save_obj;
use meshrecon::pipeline::{generate_graph, reconstruct_stages, GraphGenOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("meshrecon-graph"));
    let mut options = GraphGenOptions::new(6, 42);
    options.neighbors = 2;
    let graph = generate_graph(&options)?;
    let manifest = graph.save(&out, "graph.txt")?;
    for (a, b) in graph.edges() {
        println!("edge {a} - {b}");
    }

    let c = 2;
    let mut alpha = vec![0.0; graph.len()];
    alpha[c] = 0.6;
    for &i in graph.subgraph(c)? {
        alpha[i] = 0.4 / graph.subgraph(c)?.len() as f64;
    }
    let mut dp = ReducedDisplacements::zeros(32);
    dp.values[0] = [0.0, -0.1, 0.05];
    let params = ShapeParams { index: c, dp, alpha };

    let (deformed, blended) = reconstruct_stages(&graph, &params, DEFAULT_ZERO_TOL)?;
    println!(
        "node {c} blended with {:?}; shape code has {} values",
        participants(&graph, c, &params.alpha, DEFAULT_ZERO_TOL)?,
        params.kappa().len()
    );
    save_obj(&deformed, out.join("deformed.obj"))?;
    save_obj(&blended, out.join("blended.obj"))?;
    println!("graph manifest {}", manifest.display());
    Ok(())
}
