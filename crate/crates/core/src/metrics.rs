//! Evaluation measures: symmetric surface distance, voxel IoU,
//! classification scores, parameter MSE and the tabular report.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{normalizing_transform, sample_surface, voxelize, Mesh, SurfaceIndex, Vec3, VoxelGrid};

pub const DEFAULT_SURFACE_SAMPLES: usize = 30_000;
pub const DEFAULT_VOXEL_RESOLUTION: usize = 32;

fn check_mesh(mesh: &Mesh, role: &str) -> Result<()> {
    if mesh.vertices.is_empty() || mesh.faces.is_empty() {
        return Err(Error::Degenerate(format!("{role} mesh is empty")));
    }
    mesh.validate()
}

fn mean_distance(points: &[Vec3], index: &SurfaceIndex) -> f64 {
    let d: Vec<f64> = points.par_iter().map(|p| index.distance(p)).collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Mean distance from points of `est` to the surface of `gt` plus the mean
/// distance the other way, with `n_samples` area-uniform points per mesh.
/// Both meshes are first mapped by the transform that normalizes `gt`.
pub fn surface_distance(est: &Mesh, gt: &Mesh, n_samples: usize, seed: u64) -> Result<f64> {
    check_mesh(est, "estimated")?;
    check_mesh(gt, "ground-truth")?;
    let t = normalizing_transform(gt)?;
    let (est, gt) = (t.apply(est), t.apply(gt));
    let pe = sample_surface(&est, n_samples, seed)?.points;
    let pg = sample_surface(&gt, n_samples, seed)?.points;
    Ok(mean_distance(&pe, &SurfaceIndex::new(&gt)) + mean_distance(&pg, &SurfaceIndex::new(&est)))
}

/// Variant of [`surface_distance`] that measures from mesh vertices instead
/// of surface samples.
pub fn vertex_distance(est: &Mesh, gt: &Mesh) -> Result<f64> {
    check_mesh(est, "estimated")?;
    check_mesh(gt, "ground-truth")?;
    let t = normalizing_transform(gt)?;
    let (est, gt) = (t.apply(est), t.apply(gt));
    Ok(mean_distance(&est.vertices, &SurfaceIndex::new(&gt)) + mean_distance(&gt.vertices, &SurfaceIndex::new(&est)))
}

/// Intersection over union of the solid voxelizations on a shared grid.
pub fn voxel_iou(est: &Mesh, gt: &Mesh, resolution: usize) -> Result<f64> {
    check_mesh(est, "estimated")?;
    check_mesh(gt, "ground-truth")?;
    let bounds = VoxelGrid::shared_bounds(est, gt, resolution)?;
    let a = voxelize(est, resolution, &bounds)?;
    let b = voxelize(gt, resolution, &bounds)?;
    grid_iou(&a, &b)
}

pub fn grid_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    if a.occupancy.len() != b.occupancy.len() {
        return Err(Error::Dimension("voxel grids differ in size".into()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.occupancy.iter().zip(&b.occupancy) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Err(Error::Degenerate("both voxelizations are empty".into()));
    }
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: usize,
    /// Records whose true label is `label`.
    pub support: usize,
    pub predicted: usize,
    pub correct: usize,
    /// Percent; 0 when nothing was predicted as `label`.
    pub precision: f64,
    pub recall: f64,
}

/// Percentages. Precision and recall are macro averages over the labels
/// that occur in either list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_class: Vec<ClassScore>,
}

pub fn classification_metrics(
    predicted: &[usize],
    truth: &[usize],
    num_labels: usize,
) -> Result<ClassificationMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Validation("no labels to score".into()));
    }
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&l| l >= num_labels) {
        return Err(Error::InvalidNode { id: bad, count: num_labels });
    }
    let mut support = vec![0usize; num_labels];
    let mut pred_count = vec![0usize; num_labels];
    let mut correct = vec![0usize; num_labels];
    for (&p, &t) in predicted.iter().zip(truth) {
        support[t] += 1;
        pred_count[p] += 1;
        if p == t {
            correct[t] += 1;
        }
    }
    let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let per_class: Vec<ClassScore> = (0..num_labels)
        .filter(|&l| support[l] > 0 || pred_count[l] > 0)
        .map(|l| ClassScore {
            label: l,
            support: support[l],
            predicted: pred_count[l],
            correct: correct[l],
            precision: pct(correct[l], pred_count[l]),
            recall: pct(correct[l], support[l]),
        })
        .collect();
    let n = per_class.len() as f64;
    Ok(ClassificationMetrics {
        accuracy: pct(correct.iter().sum(), truth.len()),
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / n,
        per_class,
    })
}

pub fn params_mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "parameter vectors of length {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Validation("empty parameter vectors".into()));
    }
    Ok(pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Column headers of the report table, in order.
pub const REPORT_COLUMNS: [&str; 7] = ["MSE", "Acc", "Prec", "Rec", "MSE", "dist3D", "IoU"];

/// Column groups spanning [`REPORT_COLUMNS`]: 1, 3, 1 and 2 columns.
pub const REPORT_GROUPS: [(&str, usize); 4] = [
    ("CAE", 1),
    ("3D Model Selection", 3),
    ("Params Estimation", 1),
    ("3D Reconstruction", 2),
];

/// One line of the report. Accuracy, precision and recall are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub cae_mse: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub params_mse: f64,
    pub dist3d: f64,
    pub iou: f64,
}

impl ReportRow {
    fn values(&self) -> [f64; 7] {
        [
            self.cae_mse,
            self.accuracy,
            self.precision,
            self.recall,
            self.params_mse,
            self.dist3d,
            self.iou,
        ]
    }

    fn validate(&self) -> Result<()> {
        let pct_ok = [self.accuracy, self.precision, self.recall]
            .iter()
            .all(|v| (0.0..=100.0).contains(v));
        if !pct_ok || !(self.dist3d >= 0.0) || !(0.0..=1.0).contains(&self.iou) {
            return Err(Error::Validation(format!("report row '{}' out of range", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub mean: ReportRow,
}

/// Adds the unweighted mean row.
pub fn assemble_report(rows: Vec<ReportRow>) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::Validation("report needs at least one row".into()));
    }
    for r in &rows {
        r.validate()?;
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&ReportRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean = ReportRow {
        name: "Mean".into(),
        cae_mse: avg(|r| r.cae_mse),
        accuracy: avg(|r| r.accuracy),
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        params_mse: avg(|r| r.params_mse),
        dist3d: avg(|r| r.dist3d),
        iou: avg(|r| r.iou),
    };
    Ok(EvalReport { rows, mean })
}

impl EvalReport {
    /// Aligned ASCII table with a group header line.
    pub fn to_table(&self) -> String {
        let cells: Vec<(String, Vec<String>)> = self
            .rows
            .iter()
            .chain(std::iter::once(&self.mean))
            .map(|r| {
                let v = r.values();
                let fmt = [
                    format!("{:.5}", v[0]),
                    format!("{:.2}", v[1]),
                    format!("{:.2}", v[2]),
                    format!("{:.2}", v[3]),
                    format!("{:.5}", v[4]),
                    format!("{:.5}", v[5]),
                    format!("{:.4}", v[6]),
                ];
                (r.name.clone(), fmt.to_vec())
            })
            .collect();
        let name_w = cells.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Class".len());
        let mut widths: Vec<usize> = REPORT_COLUMNS.iter().map(|c| c.len()).collect();
        for (_, row) in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        // Widen the last column of each group so the group title fits.
        let mut col = 0;
        for (title, span) in REPORT_GROUPS {
            let inner: usize = widths[col..col + span].iter().sum::<usize>() + 3 * (span - 1);
            if title.len() > inner {
                widths[col + span - 1] += title.len() - inner;
            }
            col += span;
        }

        let mut out = String::new();
        let _ = write!(out, "{:name_w$}", "");
        let mut col = 0;
        for (title, span) in REPORT_GROUPS {
            let inner: usize = widths[col..col + span].iter().sum::<usize>() + 3 * (span - 1);
            let _ = write!(out, " | {title:^inner$}");
            col += span;
        }
        out.push('\n');
        let _ = write!(out, "{:name_w$}", "Class");
        for (c, w) in REPORT_COLUMNS.iter().zip(&widths) {
            let _ = write!(out, " | {c:>w$}");
        }
        out.push('\n');
        let rule_len = out.lines().last().map_or(0, str::len);
        let rule = "-".repeat(rule_len);
        out.push_str(&rule);
        out.push('\n');
        for (i, (name, row)) in cells.iter().enumerate() {
            if i == cells.len() - 1 {
                out.push_str(&rule);
                out.push('\n');
            }
            let _ = write!(out, "{name:name_w$}");
            for (c, w) in row.iter().zip(&widths) {
                let _ = write!(out, " | {c:>w$}");
            }
            out.push('\n');
        }
        out
    }

    /// TOML with one `[[rows]]` table per class and a `[mean]` table.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("report.txt", self.to_table()), ("report.toml", self.to_toml())] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
