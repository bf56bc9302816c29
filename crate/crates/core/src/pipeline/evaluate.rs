use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::TrainedBundle;
use super::config::{derive_seed, tags};
use super::reconstruct_stages;
use crate::error::{Error, Result};
use crate::graph::{EmbeddingGraph, ShapeParams};
use crate::mesh::load_obj;
use crate::metrics::{assemble_report, classification_metrics, params_mse, surface_distance, voxel_iou, ClassificationMetrics, EvalReport, ReportRow};
use crate::nn::{argmax, mse_loss, Tensor};
use crate::synth::{prepare_input, DatasetManifest, INPUT_SIZE};

/// Where the shape code for each record comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSource {
    /// Classifier and regressor outputs.
    Network,
    /// The record's stored label and shape code, bypassing both heads.
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEval {
    pub index: usize,
    pub truth: usize,
    pub predicted: usize,
    pub cae_mse: f64,
    pub params_mse: f64,
    pub dist3d: f64,
    pub iou: f64,
    /// Distance from the selected node, undeformed and unblended, to the
    /// ground truth.
    pub baseline_dist3d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub records: Vec<RecordEval>,
    pub classification: ClassificationMetrics,
    pub report: EvalReport,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl Evaluation {
    pub fn mean_dist3d(&self) -> f64 {
        mean(self.records.iter().map(|r| r.dist3d))
    }

    pub fn mean_baseline_dist3d(&self) -> f64 {
        mean(self.records.iter().map(|r| r.baseline_dist3d))
    }

    pub fn mean_iou(&self) -> f64 {
        mean(self.records.iter().map(|r| r.iou))
    }

    pub fn mean_params_mse(&self) -> f64 {
        mean(self.records.iter().map(|r| r.params_mse))
    }

    /// One line per record, then overall figures.
    pub fn records_text(&self) -> String {
        let mut out = String::from("# index truth predicted cae_mse params_mse dist3d iou baseline_dist3d\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                r.index, r.truth, r.predicted, r.cae_mse, r.params_mse, r.dist3d, r.iou, r.baseline_dist3d
            );
        }
        let c = &self.classification;
        let _ = writeln!(out, "# accuracy {} precision {} recall {}", c.accuracy, c.precision, c.recall);
        let _ = writeln!(
            out,
            "# mean params_mse {} dist3d {} baseline_dist3d {} iou {}",
            self.mean_params_mse(),
            self.mean_dist3d(),
            self.mean_baseline_dist3d(),
            self.mean_iou()
        );
        out
    }

    /// Writes `report.txt`, `report.toml` and `records.txt`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.report.save(dir)?;
        let path = dir.join("records.txt");
        fs::write(&path, self.records_text()).map_err(|e| Error::io(&path, e))
    }
}

/// Scores the bundle on the test split of `data`.
pub fn evaluate(bundle: &TrainedBundle, data: &DatasetManifest, graph: &EmbeddingGraph) -> Result<Evaluation> {
    evaluate_with(bundle, data, graph, ParamSource::Network)
}

pub fn evaluate_with(
    bundle: &TrainedBundle,
    data: &DatasetManifest,
    graph: &EmbeddingGraph,
    source: ParamSource,
) -> Result<Evaluation> {
    bundle.check_graph(graph)?;
    let test = data.test();
    if test.is_empty() {
        return Err(Error::Validation("test split is empty".into()));
    }
    let metrics = bundle.config.metrics;
    let metric_seed = bundle.config.seed_for(tags::METRICS);
    let offset = data.train_end;

    let records = test
        .par_iter()
        .enumerate()
        .map(|(i, rec)| {
            let index = offset + i;
            let x = Tensor::new(vec![1, 1, INPUT_SIZE, INPUT_SIZE], prepare_input(&data.load_image(rec)?))?;
            let (cae_mse, _) = mse_loss(&bundle.cae.predict(&x)?, &x)?;
            let truth_kappa = rec.kappa();
            let params = match source {
                ParamSource::Network => {
                    let z = bundle.features(&x)?;
                    let c = argmax(&bundle.classifier.predict(&z)?.data);
                    ShapeParams::from_kappa(c, &bundle.regressor.predict(&z)?.data, graph.len())?
                }
                ParamSource::GroundTruth => ShapeParams::from_kappa(rec.label, &truth_kappa, graph.len())?,
            };
            let (_, mesh) = reconstruct_stages(graph, &params, metrics.zero_tol)?;
            let gt = load_obj(data.resolve(&rec.mesh_path))?;
            let seed = derive_seed(metric_seed, index as u64);
            let selected = &graph.nodes[params.index].mesh;
            Ok(RecordEval {
                index,
                truth: rec.label,
                predicted: params.index,
                cae_mse,
                params_mse: params_mse(&params.kappa(), &truth_kappa)?,
                dist3d: surface_distance(&mesh, &gt, metrics.samples, seed)?,
                iou: voxel_iou(&mesh, &gt, metrics.voxel_resolution)?,
                baseline_dist3d: surface_distance(selected, &gt, metrics.samples, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("evaluate"))?;

    let predicted: Vec<usize> = records.iter().map(|r| r.predicted).collect();
    let truth: Vec<usize> = records.iter().map(|r| r.truth).collect();
    let classification = classification_metrics(&predicted, &truth, graph.len())?;

    let rows = classification
        .per_class
        .iter()
        .filter(|s| s.support > 0)
        .map(|s| {
            let of_class = || records.iter().filter(|r| r.truth == s.label);
            ReportRow {
                name: format!("node {}", s.label),
                cae_mse: mean(of_class().map(|r| r.cae_mse)),
                accuracy: s.recall,
                precision: s.precision,
                recall: s.recall,
                params_mse: mean(of_class().map(|r| r.params_mse)),
                dist3d: mean(of_class().map(|r| r.dist3d)),
                iou: mean(of_class().map(|r| r.iou)),
            }
        })
        .collect();
    Ok(Evaluation {
        report: assemble_report(rows)?,
        records,
        classification,
    })
}
