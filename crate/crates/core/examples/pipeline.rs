//! End to end at toy scale: graph, dataset, training, evaluation and a
//! single-image reconstruction. Settings come from `examples/tiny.toml`.
//!
//! `cargo run --release --example pipeline [out_dir]`

use std::path::PathBuf;

use meshrecon::mesh::save_obj;
use meshrecon::pipeline::{build_dataset, build_graph, evaluate, reconstruct, train_pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = PipelineConfig::from_toml(include_str!("tiny.toml"))?;
    if let Some(dir) = std::env::args().nth(1) {
        config.output_dir = PathBuf::from(dir);
    } else {
        config.output_dir = std::env::temp_dir().join("meshrecon-pipeline");
    }

    let (graph, _) = build_graph(&config)?;
    let data = build_dataset(&config, &graph)?;
    let bundle = train_pipeline(&config, &graph, &data)?;
    bundle.save(config.bundle_dir())?;

    let eval = evaluate(&bundle, &data, &graph)?;
    eval.save(config.eval_dir())?;
    print!("{}", eval.report.to_table());

    let rec = &data.test()[0];
    let r = reconstruct(&data.load_image(rec)?, &bundle, &graph)?;
    save_obj(&r.mesh, config.output_dir.join("reconstruction.obj"))?;
    println!("record of node {} reconstructed from node {}", rec.label, r.params.index);
    Ok(())
}
