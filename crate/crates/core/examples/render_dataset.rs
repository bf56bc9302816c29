//! Renders one view of a template and generates a handful of dataset
//! records (image, mesh, parameters) from a fresh graph.
//!
//! `cargo run --release --example render_dataset [out_dir]`

use std::path::PathBuf;

use meshrecon::pipeline::{generate_graph, GraphGenOptions};
use meshrecon::synth::{
    generate_dataset, render, AlphaPrior, Camera, GaussianMixture, GenerateOptions, RENDER_HEIGHT, RENDER_WIDTH,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("meshrecon-render"));
    std::fs::create_dir_all(&out)?;
    let graph = generate_graph(&GraphGenOptions::new(3, 7))?;
    graph.save(out.join("graph"), "graph.txt")?;

    let camera = Camera { azimuth: 0.6, elevation: 0.3, distance: 4.0, fov_y: 40f64.to_radians(), target: [0.0; 3] };
    render(&graph.nodes[0].mesh, &camera, RENDER_WIDTH, RENDER_HEIGHT).save_pgm(out.join("node0.pgm"))?;

    let dp_prior = GaussianMixture::isotropic(vec![0.0; 96], 0.05 * 0.05);
    let alpha_prior = AlphaPrior::new(0.7, 0.1)?;
    let options = GenerateOptions::new(10, 1, "../graph/graph.txt");
    let data = generate_dataset(&graph, &dp_prior, &alpha_prior, &options, out.join("data"))?;
    for rec in data.records.iter().take(3) {
        println!(
            "{}: node {}, alpha {:?}, azimuth {:.2}",
            rec.image_path.display(),
            rec.label,
            rec.alpha.iter().map(|a| (a * 100.0).round() / 100.0).collect::<Vec<_>>(),
            rec.camera.azimuth
        );
    }
    println!("{} train / {} test records in {}", data.train().len(), data.test().len(), out.join("data").display());
    Ok(())
}
