use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::GaussianMixture;
use super::image::{GrayImage, RENDER_HEIGHT, RENDER_WIDTH};
use super::render::{render, Camera};
use super::{synthesize_model, AlphaPrior};
use crate::error::{Error, Result};
use crate::graph::EmbeddingGraph;
use crate::mesh::{save_obj, Aabb};

/// Ranges for random viewpoints. The camera distance is chosen so that the
/// graph's bounding sphere spans a `fill` fraction of the frame height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRanges {
    pub azimuth: (f64, f64),
    pub elevation: (f64, f64),
    pub fill: (f64, f64),
    pub fov_y: f64,
}

impl Default for CameraRanges {
    fn default() -> Self {
        Self {
            azimuth: (0.0, std::f64::consts::TAU),
            elevation: (0.0, std::f64::consts::FRAC_PI_6),
            fill: (0.6, 0.8),
            fov_y: 40f64.to_radians(),
        }
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl CameraRanges {
    pub fn sample<R: Rng>(&self, rng: &mut R, target: [f64; 3], radius: f64) -> Camera {
        let azimuth = uniform(rng, self.azimuth);
        let elevation = uniform(rng, self.elevation);
        let fill = uniform(rng, self.fill);
        Camera {
            azimuth,
            elevation,
            distance: radius / (fill * (self.fov_y * 0.5).tan()),
            fov_y: self.fov_y,
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    /// Relative to the manifest directory.
    pub image_path: PathBuf,
    pub label: usize,
    pub dp: Vec<f64>,
    pub alpha: Vec<f64>,
    pub mesh_path: PathBuf,
    pub camera: Camera,
}

impl DatasetRecord {
    /// `dp` followed by `alpha`.
    pub fn kappa(&self) -> Vec<f64> {
        let mut k = self.dp.clone();
        k.extend_from_slice(&self.alpha);
        k
    }
}

/// Dataset index. Records `0..train_end` form the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub graph: String,
    pub node_count: usize,
    pub dp_len: usize,
    pub train_end: usize,
    pub records: Vec<DatasetRecord>,
    /// Directory that record paths are relative to.
    pub root: PathBuf,
}

pub const MANIFEST_NAME: &str = "dataset.txt";

impl DatasetManifest {
    pub fn train(&self) -> &[DatasetRecord] {
        &self.records[..self.train_end]
    }

    pub fn test(&self) -> &[DatasetRecord] {
        &self.records[self.train_end..]
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn load_image(&self, record: &DatasetRecord) -> Result<GrayImage> {
        GrayImage::load_pgm(self.resolve(&record.image_path))
    }

    /// Text form: `#`-prefixed header lines, then one record per line:
    /// image path, label, dp values, alpha values, mesh path, and camera
    /// azimuth, elevation, distance, fov and target.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# graph {}", self.graph);
        let _ = writeln!(out, "# nodes {} dp {}", self.node_count, self.dp_len);
        let _ = writeln!(
            out,
            "# split train 0 {} test {} {}",
            self.train_end,
            self.train_end,
            self.records.len()
        );
        for r in &self.records {
            let _ = write!(out, "{} {}", r.image_path.display(), r.label);
            for v in r.dp.iter().chain(&r.alpha) {
                let _ = write!(out, " {v}");
            }
            let c = &r.camera;
            let _ = writeln!(
                out,
                " {} {} {} {} {} {} {} {}",
                r.mesh_path.display(),
                c.azimuth,
                c.elevation,
                c.distance,
                c.fov_y,
                c.target[0],
                c.target[1],
                c.target[2]
            );
        }
        out
    }

    pub fn parse(text: &str, root: PathBuf, origin: &Path) -> Result<Self> {
        let malformed = |line: usize, message: &str| Error::Malformed {
            path: origin.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut graph = None;
        let mut dims = None;
        let mut train_end = None;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                [] => continue,
                ["#", "graph", rest @ ..] => graph = Some(rest.join(" ")),
                ["#", "nodes", n, "dp", d] => {
                    dims = Some((
                        n.parse::<usize>().map_err(|_| malformed(lineno, "node count"))?,
                        d.parse::<usize>().map_err(|_| malformed(lineno, "dp length"))?,
                    ))
                }
                ["#", "split", "train", "0", t, "test", _, _] => {
                    train_end = Some(t.parse::<usize>().map_err(|_| malformed(lineno, "split"))?)
                }
                [first, ..] if first.starts_with('#') => continue,
                _ => {
                    let (nodes, dp_len) = dims.ok_or_else(|| malformed(lineno, "record before header"))?;
                    let expected = 2 + dp_len + nodes + 1 + 7;
                    if tokens.len() != expected {
                        return Err(malformed(lineno, &format!("expected {expected} fields, got {}", tokens.len())));
                    }
                    let num = |i: usize| tokens[i].parse::<f64>().map_err(|_| malformed(lineno, "number"));
                    let label = tokens[1].parse::<usize>().map_err(|_| malformed(lineno, "label"))?;
                    if label >= nodes {
                        return Err(malformed(lineno, "label out of range"));
                    }
                    let values = (2..2 + dp_len + nodes).map(num).collect::<Result<Vec<_>>>()?;
                    let m = 2 + dp_len + nodes;
                    records.push(DatasetRecord {
                        image_path: PathBuf::from(tokens[0]),
                        label,
                        dp: values[..dp_len].to_vec(),
                        alpha: values[dp_len..].to_vec(),
                        mesh_path: PathBuf::from(tokens[m]),
                        camera: Camera {
                            azimuth: num(m + 1)?,
                            elevation: num(m + 2)?,
                            distance: num(m + 3)?,
                            fov_y: num(m + 4)?,
                            target: [num(m + 5)?, num(m + 6)?, num(m + 7)?],
                        },
                    });
                }
            }
        }
        let (node_count, dp_len) = dims.ok_or_else(|| malformed(0, "missing nodes header"))?;
        let train_end = train_end.ok_or_else(|| malformed(0, "missing split header"))?;
        if train_end > records.len() {
            return Err(malformed(0, "split boundary beyond record count"));
        }
        Ok(Self {
            graph: graph.ok_or_else(|| malformed(0, "missing graph header"))?,
            node_count,
            dp_len,
            train_end,
            records,
            root,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, root, path)
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub count: usize,
    pub seed: u64,
    /// Probability that a neighbor's weight is dropped.
    pub sparsity: f64,
    pub cameras: CameraRanges,
    pub width: usize,
    pub height: usize,
    /// Recorded in the manifest header.
    pub graph_manifest: String,
}

impl GenerateOptions {
    pub fn new(count: usize, seed: u64, graph_manifest: impl Into<String>) -> Self {
        Self {
            count,
            seed,
            sparsity: 0.75,
            cameras: CameraRanges::default(),
            width: RENDER_WIDTH,
            height: RENDER_HEIGHT,
            graph_manifest: graph_manifest.into(),
        }
    }
}

/// Number of training records for a 70/30 split.
pub fn train_split(count: usize) -> usize {
    count * 7 / 10
}

/// Writes `count` records (rendered view, ground-truth mesh) under `out_dir`
/// plus the manifest. Record `i` draws from its own stream of the master
/// seed, so output does not depend on scheduling.
pub fn generate_dataset(
    graph: &EmbeddingGraph,
    gmm: &GaussianMixture,
    prior: &AlphaPrior,
    options: &GenerateOptions,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    if options.count == 0 {
        return Err(Error::Validation("dataset count must be at least 1".into()));
    }
    if graph.is_empty() {
        return Err(Error::Validation("graph has no nodes".into()));
    }
    gmm.validate()?;
    let reduced = graph.rig(0)?.symmetry.reduced_len();
    if gmm.dim() != reduced * 3 {
        return Err(Error::Dimension(format!(
            "mixture has dimension {}, lattice needs {}",
            gmm.dim(),
            reduced * 3
        )));
    }
    for dir in ["images", "meshes"] {
        let d = out_dir.join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let bounds = graph
        .nodes
        .iter()
        .filter_map(|n| n.mesh.bounds())
        .reduce(|a: Aabb, b| a.union(&b))
        .expect("non-empty graph");
    let center = bounds.center();
    let radius = graph.radius_about(&center);
    let target = [center.x, center.y, center.z];

    let records = (0..options.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(i as u64);
            let label = rng.random_range(0..graph.len());
            let dp = gmm.sample_with(&mut rng);
            let alpha = prior.sample_with(&mut rng, graph.len(), label, graph.subgraph(label)?, options.sparsity);
            let camera = options.cameras.sample(&mut rng, target, radius);
            let mesh = synthesize_model(graph, label, &dp, &alpha)?;
            let image = render(&mesh, &camera, options.width, options.height);

            let image_path = PathBuf::from(format!("images/rec_{i:05}.pgm"));
            let mesh_path = PathBuf::from(format!("meshes/rec_{i:05}.obj"));
            image.save_pgm(out_dir.join(&image_path))?;
            save_obj(&mesh, out_dir.join(&mesh_path))?;
            Ok(DatasetRecord {
                image_path,
                label,
                dp,
                alpha,
                mesh_path,
                camera,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = DatasetManifest {
        graph: options.graph_manifest.clone(),
        node_count: graph.len(),
        dp_len: reduced * 3,
        train_end: train_split(options.count),
        records,
        root: out_dir.to_path_buf(),
    };
    let path = out_dir.join(MANIFEST_NAME);
    fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
