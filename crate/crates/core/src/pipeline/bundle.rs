use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{tags, PipelineConfig};
use crate::error::{Error, Result};
use crate::graph::EmbeddingGraph;
use crate::nn::{
    build_cae, build_classifier, build_regressor, encode, load_checkpoint, save_checkpoint, train, Loss, Network,
    Tensor, CAE_INPUT_SIZE, LATENT_LEN,
};
use crate::synth::{prepare_input, DatasetManifest, DatasetRecord, INPUT_SIZE};

pub const BUNDLE_MANIFEST: &str = "bundle.toml";

const CAE_FILE: &str = "cae.ckpt";
const CLASSIFIER_FILE: &str = "classifier.ckpt";
const REGRESSOR_FILE: &str = "regressor.ckpt";
const ENCODE_CHUNK: usize = 32;

/// Per-epoch mean training loss of each stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurves {
    pub cae: Vec<f64>,
    pub classifier: Vec<f64>,
    pub regressor: Vec<f64>,
}

impl LossCurves {
    fn files(&self) -> [(&'static str, &[f64]); 3] {
        [
            ("cae_loss.txt", &self.cae),
            ("classifier_loss.txt", &self.classifier),
            ("regressor_loss.txt", &self.regressor),
        ]
    }
}

fn curve_text(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}\n")).collect()
}

fn read_curve(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("not a number: {l:?}"),
            })
        })
        .collect()
}

/// Per-feature affine map applied to latent codes before both heads:
/// `(z − mean) / scale`.
///
/// The scale is the feature's standard deviation, floored at a tenth of the
/// median deviation of the varying features. Without the floor a feature
/// that barely moves on the training images (background regions, say) turns
/// a small change on an unusual test image into an enormous input.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentNorm {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

const LATENT_FILE: &str = "latent_norm.txt";
const MIN_SCALE: f64 = 1e-8;
const SCALE_FLOOR_FRACTION: f64 = 0.1;

impl LatentNorm {
    pub fn identity(len: usize) -> Self {
        Self {
            mean: vec![0.0; len],
            scale: vec![1.0; len],
        }
    }

    /// Mean and population standard deviation of each column of `z`.
    pub fn fit(z: &Tensor) -> Result<Self> {
        let n = z.batch();
        let width = z.sample_len();
        if n == 0 {
            return Err(Error::Validation("cannot fit latent statistics to no samples".into()));
        }
        let mut mean = vec![0.0; width];
        for row in z.data.chunks(width) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; width];
        for row in z.data.chunks(width) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        let mut varying: Vec<f64> = sd.iter().copied().filter(|&s| s > MIN_SCALE).collect();
        let floor = if varying.is_empty() {
            1.0
        } else {
            varying.sort_by(f64::total_cmp);
            SCALE_FLOOR_FRACTION * varying[varying.len() / 2]
        };
        let scale = sd.iter().map(|&s| s.max(floor)).collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, z: &Tensor) -> Result<Tensor> {
        let width = self.mean.len();
        if z.sample_len() != width {
            return Err(Error::Shape(format!("latent width {} != {width}", z.sample_len())));
        }
        let mut out = z.clone();
        for row in out.data.chunks_mut(width) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    fn to_text(&self) -> String {
        self.mean.iter().zip(&self.scale).map(|(m, s)| format!("{m} {s}\n")).collect()
    }

    fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut norm = Self {
            mean: Vec::new(),
            scale: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let bad = || Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected `mean scale`".into(),
            };
            let mut t = line.split_whitespace();
            let (Some(m), Some(s), None) = (t.next(), t.next(), t.next()) else {
                return Err(bad());
            };
            norm.mean.push(m.parse().map_err(|_| bad())?);
            let s: f64 = s.parse().map_err(|_| bad())?;
            if !(s > 0.0) {
                return Err(bad());
            }
            norm.scale.push(s);
        }
        Ok(norm)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleMeta {
    graph: String,
    node_count: usize,
    kappa_len: usize,
    config: PipelineConfig,
}

/// Trained networks plus the graph reference and configuration they were
/// trained with.
#[derive(Debug, Clone)]
pub struct TrainedBundle {
    pub cae: Network,
    pub classifier: Network,
    pub regressor: Network,
    pub latent: LatentNorm,
    /// Graph manifest path as given at training time.
    pub graph: String,
    pub node_count: usize,
    pub config: PipelineConfig,
    pub curves: LossCurves,
}

impl TrainedBundle {
    /// Standardized latent codes for a batch of network-ready images.
    pub fn features(&self, images: &Tensor) -> Result<Tensor> {
        self.latent.apply(&encode(&self.cae, images)?)
    }

    pub fn kappa_len(&self) -> Result<usize> {
        Ok(self.regressor.output_shape()?[0])
    }

    /// Confirms network widths agree with `graph`.
    pub fn check_graph(&self, graph: &EmbeddingGraph) -> Result<()> {
        let dp_len = 3 * graph.rig(0)?.symmetry.reduced_len();
        let classes = self.classifier.output_shape()?;
        let kappa = self.regressor.output_shape()?;
        let image = self.cae.output_shape()?;
        if classes != [graph.len()] || kappa != [dp_len + graph.len()] {
            return Err(Error::Validation(format!(
                "bundle predicts {classes:?} classes and {kappa:?} shape values; graph has {} nodes and {dp_len} displacement values",
                graph.len()
            )));
        }
        if self.cae.input_shape != [1, INPUT_SIZE, INPUT_SIZE] || image != self.cae.input_shape {
            return Err(Error::Validation("autoencoder shape does not match the input raster".into()));
        }
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_checkpoint(&self.cae, dir.join(CAE_FILE))?;
        save_checkpoint(&self.classifier, dir.join(CLASSIFIER_FILE))?;
        save_checkpoint(&self.regressor, dir.join(REGRESSOR_FILE))?;
        let path = dir.join(LATENT_FILE);
        fs::write(&path, self.latent.to_text()).map_err(|e| Error::io(&path, e))?;
        for (name, values) in self.curves.files() {
            let path = dir.join(name);
            fs::write(&path, curve_text(values)).map_err(|e| Error::io(&path, e))?;
        }
        // Where the run was written says nothing about the model; leaving it
        // out keeps same-seed bundles byte-identical across locations.
        let mut config = self.config.clone();
        config.output_dir = PathBuf::from(".");
        let meta = BundleMeta {
            graph: self.graph.clone(),
            node_count: self.node_count,
            kappa_len: self.kappa_len()?,
            config,
        };
        let path = dir.join(BUNDLE_MANIFEST);
        let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(BUNDLE_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: BundleMeta =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let curve = |name: &str| {
            let p = dir.join(name);
            if p.exists() {
                read_curve(&p)
            } else {
                Ok(Vec::new())
            }
        };
        let latent_path = dir.join(LATENT_FILE);
        let latent_text = fs::read_to_string(&latent_path).map_err(|e| Error::io(&latent_path, e))?;
        let latent = LatentNorm::from_text(&latent_text, &latent_path)?;
        if latent.mean.len() != LATENT_LEN {
            return Err(Error::Checkpoint {
                path: latent_path,
                message: format!("{} latent statistics, expected {LATENT_LEN}", latent.mean.len()),
            });
        }
        let bundle = Self {
            cae: load_checkpoint(dir.join(CAE_FILE))?,
            classifier: load_checkpoint(dir.join(CLASSIFIER_FILE))?,
            regressor: load_checkpoint(dir.join(REGRESSOR_FILE))?,
            latent,
            graph: meta.graph,
            node_count: meta.node_count,
            config: meta.config,
            curves: LossCurves {
                cae: curve("cae_loss.txt")?,
                classifier: curve("classifier_loss.txt")?,
                regressor: curve("regressor_loss.txt")?,
            },
        };
        if bundle.classifier.output_shape()? != [meta.node_count] || bundle.kappa_len()? != meta.kappa_len {
            return Err(Error::Checkpoint {
                path: dir.to_path_buf(),
                message: "checkpoint widths disagree with bundle.toml".into(),
            });
        }
        Ok(bundle)
    }
}

/// Network-ready `[n, 1, 220, 220]` batch for `records`.
pub(crate) fn load_inputs(manifest: &DatasetManifest, records: &[DatasetRecord]) -> Result<Tensor> {
    let rows = records
        .par_iter()
        .map(|r| manifest.load_image(r).map(|img| prepare_input(&img)))
        .collect::<Result<Vec<_>>>()?;
    let data = rows.concat();
    Tensor::new(vec![records.len(), 1, CAE_INPUT_SIZE, CAE_INPUT_SIZE], data)
}

/// Latent codes in fixed-size chunks to bound peak memory.
pub(crate) fn encode_all(cae: &Network, images: &Tensor) -> Result<Tensor> {
    let n = images.batch();
    let idx: Vec<usize> = (0..n).collect();
    let mut data = Vec::with_capacity(n * LATENT_LEN);
    for chunk in idx.chunks(ENCODE_CHUNK) {
        data.extend(encode(cae, &images.gather(chunk))?.data);
    }
    Tensor::new(vec![n, LATENT_LEN], data)
}

fn one_hot(records: &[DatasetRecord], classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; records.len() * classes];
    for (i, r) in records.iter().enumerate() {
        data[i * classes + r.label] = 1.0;
    }
    Tensor::new(vec![records.len(), classes], data)
}

fn kappa_targets(records: &[DatasetRecord]) -> Result<Tensor> {
    let width = records.first().map_or(0, |r| r.dp.len() + r.alpha.len());
    let data: Vec<f64> = records.iter().flat_map(|r| r.kappa()).collect();
    Tensor::new(vec![records.len(), width], data)
}

/// Trains the autoencoder on the training images, then, with the encoder
/// frozen and its codes standardized per feature, the classifier (soft-margin loss on one-hot labels) and the
/// regressor (MSE on the shape code).
pub fn train_pipeline(config: &PipelineConfig, graph: &EmbeddingGraph, data: &DatasetManifest) -> Result<TrainedBundle> {
    config.validate()?;
    if data.node_count != graph.len() {
        return Err(Error::Validation(format!(
            "dataset has {} labels, graph has {} nodes",
            data.node_count,
            graph.len()
        )));
    }
    let records = data.train();
    if records.is_empty() {
        return Err(Error::Validation("training split is empty".into()));
    }
    let images = load_inputs(data, records).map_err(|e| e.in_stage("load-data"))?;

    let mut cae = build_cae(config.seed_for(tags::CAE_INIT));
    log::info!("training autoencoder on {} images", records.len());
    let cae_curve = train(
        &mut cae,
        &images,
        &images,
        Loss::Mse,
        &config.cae.train_config(config.seed_for(tags::CAE_TRAIN)),
    )
    .map_err(|e| e.in_stage("train-cae"))?;

    let raw = encode_all(&cae, &images).map_err(|e| e.in_stage("encode"))?;
    drop(images);
    let latent = LatentNorm::fit(&raw)?;
    let z = latent.apply(&raw)?;
    drop(raw);

    let mut classifier =
        build_classifier(graph.len(), config.seed_for(tags::CLASSIFIER_INIT)).map_err(|e| e.in_stage("train-classifier"))?;
    log::info!("training classifier over {} nodes", graph.len());
    let cls_curve = train(
        &mut classifier,
        &z,
        &one_hot(records, graph.len())?,
        Loss::MultilabelSoftMargin,
        &config.heads.train_config(config.seed_for(tags::CLASSIFIER_TRAIN)),
    )
    .map_err(|e| e.in_stage("train-classifier"))?;

    let targets = kappa_targets(records)?;
    let mut regressor =
        build_regressor(targets.sample_len(), config.seed_for(tags::REGRESSOR_INIT)).map_err(|e| e.in_stage("train-regressor"))?;
    log::info!("training regressor for {} shape values", targets.sample_len());
    let reg_curve = train(
        &mut regressor,
        &z,
        &targets,
        Loss::Mse,
        &config.heads.train_config(config.seed_for(tags::REGRESSOR_TRAIN)),
    )
    .map_err(|e| e.in_stage("train-regressor"))?;

    let bundle = TrainedBundle {
        cae,
        classifier,
        regressor,
        latent,
        graph: data.graph.clone(),
        node_count: graph.len(),
        config: config.clone(),
        curves: LossCurves {
            cae: cae_curve,
            classifier: cls_curve,
            regressor: reg_curve,
        },
    };
    bundle.check_graph(graph)?;
    Ok(bundle)
}
