use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DEFAULT_ZERO_TOL;
use crate::metrics::{DEFAULT_SURFACE_SAMPLES, DEFAULT_VOXEL_RESOLUTION};
use crate::nn::TrainConfig;
use crate::synth::CameraRanges;

/// Independent 64-bit seed for sub-task `tag` of a run seeded by `master`.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(tag);
    rng.next_u64()
}

/// Stream tags passed to [`derive_seed`] for each seeded sub-task.
pub mod tags {
    pub const GRAPH: u64 = 1;
    pub const DATA: u64 = 2;
    pub const CAE_INIT: u64 = 3;
    pub const CAE_TRAIN: u64 = 4;
    pub const CLASSIFIER_INIT: u64 = 5;
    pub const CLASSIFIER_TRAIN: u64 = 6;
    pub const REGRESSOR_INIT: u64 = 7;
    pub const REGRESSOR_TRAIN: u64 = 8;
    pub const METRICS: u64 = 9;
    pub const DP_PRIOR: u64 = 10;
}

/// Synthetic graph settings used by `gen-graph`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Graph manifest. Defaults to `<output_dir>/graph/graph.txt`.
    pub manifest: Option<PathBuf>,
    pub nodes: usize,
    /// Base OBJ; a UV sphere when absent.
    pub base: Option<PathBuf>,
    /// Standard deviation of per-node lattice jitter, in lattice units.
    pub jitter: f64,
    /// Edges connect each node to this many nearest nodes.
    pub neighbors: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            nodes: 5,
            base: None,
            jitter: 0.45,
            neighbors: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub count: usize,
    pub sparsity: f64,
    pub alpha_mean: f64,
    pub alpha_std: f64,
    /// Isotropic spread of the displacement prior when no samples are given.
    pub dp_std: f64,
    /// Mixture components fitted to `dp_samples`.
    pub dp_components: usize,
    /// Whitespace-separated file of 96-value displacement rows.
    pub dp_samples: Option<PathBuf>,
    pub cameras: CameraRanges,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 400,
            sparsity: 0.75,
            alpha_mean: 0.7,
            alpha_std: 0.1,
            dp_std: 0.05,
            dp_components: 1,
            dp_samples: None,
            cameras: CameraRanges::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl StageConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub samples: usize,
    pub voxel_resolution: usize,
    pub zero_tol: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SURFACE_SAMPLES,
            voxel_resolution: DEFAULT_VOXEL_RESOLUTION,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }
}

/// Run configuration, stored as TOML. Every section and field is optional;
/// a partially given `[cae]` or `[heads]` table overrides that stage's own
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawConfig")]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub graph: GraphConfig,
    pub dataset: DatasetConfig,
    pub cae: StageConfig,
    pub heads: StageConfig,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("run"),
            graph: GraphConfig::default(),
            dataset: DatasetConfig::default(),
            cae: StageConfig {
                lr: 1e-3,
                weight_decay: 1e-5,
                epochs: 100,
                batch_size: 32,
            },
            heads: StageConfig {
                lr: 1e-3,
                weight_decay: 0.0,
                epochs: 1000,
                batch_size: 32,
            },
            metrics: MetricsConfig::default(),
        }
    }
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StageOverrides {
    lr: Option<f64>,
    weight_decay: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
}

impl StageOverrides {
    fn over(self, base: StageConfig) -> StageConfig {
        StageConfig {
            lr: self.lr.unwrap_or(base.lr),
            weight_decay: self.weight_decay.unwrap_or(base.weight_decay),
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
        }
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    output_dir: PathBuf,
    graph: GraphConfig,
    dataset: DatasetConfig,
    cae: StageOverrides,
    heads: StageOverrides,
    metrics: MetricsConfig,
}

impl Default for RawConfig {
    fn default() -> Self {
        let d = PipelineConfig::default();
        Self {
            seed: d.seed,
            output_dir: d.output_dir,
            graph: d.graph,
            dataset: d.dataset,
            cae: StageOverrides::default(),
            heads: StageOverrides::default(),
            metrics: d.metrics,
        }
    }
}

impl From<RawConfig> for PipelineConfig {
    fn from(raw: RawConfig) -> Self {
        let d = PipelineConfig::default();
        Self {
            seed: raw.seed,
            output_dir: raw.output_dir,
            graph: raw.graph,
            dataset: raw.dataset,
            cae: raw.cae.over(d.cae),
            heads: raw.heads.over(d.heads),
            metrics: raw.metrics,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if self.graph.nodes < 2 {
            return Err(Error::Config("graph needs at least 2 nodes".into()));
        }
        if !(self.graph.jitter >= 0.0) {
            return bad("graph.jitter");
        }
        let d = &self.dataset;
        if d.count == 0 {
            return bad("dataset.count");
        }
        if !(0.0..=1.0).contains(&d.sparsity) {
            return Err(Error::Config("dataset.sparsity must lie in [0, 1]".into()));
        }
        if !(d.alpha_std > 0.0) {
            return bad("dataset.alpha_std");
        }
        if !(d.dp_std > 0.0) {
            return bad("dataset.dp_std");
        }
        if d.dp_components == 0 {
            return bad("dataset.dp_components");
        }
        let c = &d.cameras;
        if !(c.fov_y > 0.0 && c.fov_y < std::f64::consts::PI) || !(c.fill.0 > 0.0 && c.fill.1 >= c.fill.0) {
            return Err(Error::Config("dataset.cameras out of range".into()));
        }
        for (name, s) in [("cae", &self.cae), ("heads", &self.heads)] {
            if !(s.lr > 0.0) || s.epochs == 0 || s.batch_size == 0 || !(s.weight_decay >= 0.0) {
                return Err(Error::Config(format!("{name}: lr, epochs and batch_size must be positive")));
            }
        }
        let m = &self.metrics;
        if m.samples == 0 || m.voxel_resolution < 4 || !(m.zero_tol >= 0.0) {
            return Err(Error::Config("metrics: samples ≥ 1, voxel_resolution ≥ 4, zero_tol ≥ 0".into()));
        }
        Ok(())
    }

    pub fn graph_manifest(&self) -> PathBuf {
        self.graph
            .manifest
            .clone()
            .unwrap_or_else(|| self.output_dir.join("graph").join("graph.txt"))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.output_dir.join("data")
    }

    pub fn bundle_dir(&self) -> PathBuf {
        self.output_dir.join("bundle")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.output_dir.join("eval")
    }

    pub fn seed_for(&self, tag: u64) -> u64 {
        derive_seed(self.seed, tag)
    }
}
