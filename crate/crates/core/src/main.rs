use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meshrecon::graph::EmbeddingGraph;
use meshrecon::mesh::{load_obj, save_obj, voxelize, VoxelGrid};
use meshrecon::pipeline::{
    build_dataset, build_graph, evaluate_with, reconstruct, train_pipeline, ParamSource, PipelineConfig,
    TrainedBundle,
};
use meshrecon::synth::{DatasetManifest, GrayImage, MANIFEST_NAME};
use meshrecon::{Error, Result};

#[derive(Parser)]
#[command(name = "meshrecon", version, about = "Single-image mesh reconstruction from a graph of deformable templates")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic graph from a base mesh with per-node lattice jitter.
    GenGraph {
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        base: Option<PathBuf>,
        /// Manifest to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render deformed models of the graph into a dataset.
    GenData {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train the autoencoder, classifier and regressor.
    Train {
        /// Dataset directory (defaults to `<output_dir>/data`).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Bundle directory to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a mesh from one PGM image.
    Reconstruct {
        image: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "reconstruction.obj")]
        out: PathBuf,
        /// Also write the selected and lattice-deformed templates.
        #[arg(long)]
        dump_stages: bool,
    },
    /// Score a bundle on the test split.
    Evaluate {
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Report directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use stored ground-truth parameters instead of network outputs.
        #[arg(long)]
        oracle: bool,
    },
    /// Voxelize an OBJ and write the ASCII occupancy grid.
    ExportVoxels {
        mesh: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli).map_err(|e| e.in_stage("config"))?;
    match cli.command {
        Command::GenGraph { nodes, base, out } => {
            if let Some(n) = nodes {
                config.graph.nodes = n;
            }
            if base.is_some() {
                config.graph.base = base;
            }
            if out.is_some() {
                config.graph.manifest = out;
            }
            config.validate().map_err(|e| e.in_stage("config"))?;
            let (graph, path) = build_graph(&config).map_err(|e| e.in_stage("gen-graph"))?;
            println!("wrote {} nodes, {} edges to {}", graph.len(), graph.edges().len(), path.display());
        }
        Command::GenData { graph, count } => {
            if graph.is_some() {
                config.graph.manifest = graph;
            }
            if let Some(n) = count {
                config.dataset.count = n;
            }
            config.validate().map_err(|e| e.in_stage("config"))?;
            let g = EmbeddingGraph::load(config.graph_manifest()).map_err(|e| e.in_stage("load-graph"))?;
            let data = build_dataset(&config, &g).map_err(|e| e.in_stage("gen-data"))?;
            println!(
                "wrote {} records ({} train, {} test) to {}",
                data.records.len(),
                data.train().len(),
                data.test().len(),
                config.data_dir().display()
            );
        }
        Command::Train { data, graph, out } => {
            if graph.is_some() {
                config.graph.manifest = graph;
            }
            let data_dir = data.unwrap_or_else(|| config.data_dir());
            let g = EmbeddingGraph::load(config.graph_manifest()).map_err(|e| e.in_stage("load-graph"))?;
            let manifest = DatasetManifest::load(data_dir.join(MANIFEST_NAME)).map_err(|e| e.in_stage("load-data"))?;
            let bundle = train_pipeline(&config, &g, &manifest)?;
            let out = out.unwrap_or_else(|| config.bundle_dir());
            bundle.save(&out).map_err(|e| e.in_stage("save-bundle"))?;
            println!(
                "final losses: cae {:.6}, classifier {:.6}, regressor {:.6}; bundle at {}",
                bundle.curves.cae.last().copied().unwrap_or(f64::NAN),
                bundle.curves.classifier.last().copied().unwrap_or(f64::NAN),
                bundle.curves.regressor.last().copied().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Reconstruct {
            image,
            bundle,
            graph,
            out,
            dump_stages,
        } => {
            let img = GrayImage::load_pgm(&image).map_err(|e| e.in_stage("load-image"))?;
            let bundle = TrainedBundle::load(&bundle).map_err(|e| e.in_stage("load-bundle"))?;
            let g = EmbeddingGraph::load(&graph).map_err(|e| e.in_stage("load-graph"))?;
            let r = reconstruct(&img, &bundle, &g).map_err(|e| e.in_stage("reconstruct"))?;
            save_obj(&r.mesh, &out).map_err(|e| e.in_stage("write-mesh"))?;
            if dump_stages {
                for (suffix, mesh) in [("selected", &r.selected), ("ffd", &r.deformed)] {
                    let path = out.with_extension(format!("{suffix}.obj"));
                    save_obj(mesh, &path).map_err(|e| e.in_stage("write-mesh"))?;
                }
            }
            let active = r.params.alpha.iter().filter(|a| a.abs() > bundle.config.metrics.zero_tol).count();
            println!("node {} selected, {active} non-zero weights; wrote {}", r.params.index, out.display());
        }
        Command::Evaluate {
            bundle,
            data,
            graph,
            out,
            oracle,
        } => {
            if graph.is_some() {
                config.graph.manifest = graph;
            }
            let bundle = TrainedBundle::load(bundle.unwrap_or_else(|| config.bundle_dir()))
                .map_err(|e| e.in_stage("load-bundle"))?;
            let g = EmbeddingGraph::load(config.graph_manifest()).map_err(|e| e.in_stage("load-graph"))?;
            let data_dir = data.unwrap_or_else(|| config.data_dir());
            let manifest = DatasetManifest::load(data_dir.join(MANIFEST_NAME)).map_err(|e| e.in_stage("load-data"))?;
            let source = if oracle { ParamSource::GroundTruth } else { ParamSource::Network };
            let eval = evaluate_with(&bundle, &manifest, &g, source)?;
            let out = out.unwrap_or_else(|| config.eval_dir());
            eval.save(&out).map_err(|e| e.in_stage("write-report"))?;
            print!("{}", eval.report.to_table());
            println!(
                "mean dist3D {:.5} (undeformed selection {:.5}); report in {}",
                eval.mean_dist3d(),
                eval.mean_baseline_dist3d(),
                out.display()
            );
        }
        Command::ExportVoxels { mesh, resolution, out } => {
            let m = load_obj(&mesh).map_err(|e| e.in_stage("load-mesh"))?;
            let res = resolution.unwrap_or(config.metrics.voxel_resolution);
            let bounds = m
                .bounds()
                .ok_or_else(|| Error::Degenerate("empty mesh".into()))
                .and_then(|b| VoxelGrid::padded_bounds(&b, res))
                .map_err(|e| e.in_stage("voxelize"))?;
            let grid = voxelize(&m, res, &bounds).map_err(|e| e.in_stage("voxelize"))?;
            grid.save_ascii(&out).map_err(|e| e.in_stage("write-voxels"))?;
            println!("{} of {} voxels occupied; wrote {}", grid.occupied_count(), res * res * res, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
