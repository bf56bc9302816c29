use std::fs;
use std::path::{Path, PathBuf};

use super::config::{tags, PipelineConfig};
use super::graphgen::{generate_graph, GraphGenOptions};
use crate::error::{Error, Result};
use crate::graph::EmbeddingGraph;
use crate::mesh::load_obj;
use crate::synth::{fit_gmm, generate_dataset, AlphaPrior, DatasetManifest, GaussianMixture, GenerateOptions};

const GMM_ITERATIONS: usize = 100;

pub fn graph_options(config: &PipelineConfig) -> Result<GraphGenOptions> {
    let mut options = GraphGenOptions::new(config.graph.nodes, config.seed_for(tags::GRAPH));
    if let Some(base) = &config.graph.base {
        options.base = load_obj(base)?;
    }
    options.jitter = config.graph.jitter;
    options.neighbors = config.graph.neighbors;
    Ok(options)
}

/// Builds the synthetic graph and writes it to the configured manifest path.
pub fn build_graph(config: &PipelineConfig) -> Result<(EmbeddingGraph, PathBuf)> {
    let graph = generate_graph(&graph_options(config)?)?;
    let manifest = config.graph_manifest();
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let name = manifest
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Config(format!("bad graph manifest path {}", manifest.display())))?;
    let path = graph.save(dir, name)?;
    Ok((graph, path))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Malformed {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: format!("not a number: {t:?}"),
                    })
                })
                .collect()
        })
        .collect()
}

/// Displacement prior: fitted to `dataset.dp_samples` when given, otherwise
/// a zero-mean isotropic Gaussian with spread `dataset.dp_std`.
pub fn dp_prior(config: &PipelineConfig, dim: usize) -> Result<GaussianMixture> {
    let d = &config.dataset;
    match &d.dp_samples {
        Some(path) => {
            let rows = read_rows(path)?;
            if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
                return Err(Error::Dimension(format!(
                    "{}: row {} has {} values, expected {dim}",
                    path.display(),
                    bad + 1,
                    rows[bad].len()
                )));
            }
            Ok(fit_gmm(&rows, d.dp_components, GMM_ITERATIONS, config.seed_for(tags::DP_PRIOR))?.0)
        }
        None => Ok(GaussianMixture::isotropic(vec![0.0; dim], d.dp_std * d.dp_std)),
    }
}

/// Path of `target` as seen from `from_dir` when both sit under a common
/// prefix; otherwise `target` unchanged.
fn relative_to(target: &Path, from_dir: &Path) -> PathBuf {
    let t: Vec<_> = target.components().collect();
    let f: Vec<_> = from_dir.components().collect();
    let common = t.iter().zip(&f).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return target.to_path_buf();
    }
    let mut out = PathBuf::new();
    for _ in common..f.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c);
    }
    out
}

/// Renders the configured number of records into `config.data_dir()`.
pub fn build_dataset(config: &PipelineConfig, graph: &EmbeddingGraph) -> Result<DatasetManifest> {
    let d = &config.dataset;
    let dim = 3 * graph.rig(0)?.symmetry.reduced_len();
    let gmm = dp_prior(config, dim)?;
    let prior = AlphaPrior::new(d.alpha_mean, d.alpha_std)?;
    let data_dir = config.data_dir();
    let graph_ref = relative_to(&config.graph_manifest(), &data_dir);
    let mut options = GenerateOptions::new(d.count, config.seed_for(tags::DATA), graph_ref.display().to_string());
    options.sparsity = d.sparsity;
    options.cameras = d.cameras;
    generate_dataset(graph, &gmm, &prior, &options, &data_dir)
}
