//! Free-form deformation on a trivariate Bernstein lattice with a mirror
//! symmetry constraint on the control-point displacements.
//!
//! Deformed vertices are `B · (P + expand(ΔP))` where `B` holds the Bernstein
//! weights of every vertex over the control points `P`, and `expand` maps the
//! reduced (half-lattice) displacements onto the full lattice, reflecting the
//! mirrored component.
//!
//! Displacements are expressed in lattice units: a displacement of `1.0`
//! along an axis moves a control point by the full lattice edge on that axis.

use crate::error::{Error, Result};
use crate::mesh::{Aabb, Mesh, Vec3};

pub const DEFAULT_DIMS: [usize; 3] = [4, 4, 4];
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Control lattice. Control points are stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FfdGrid {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub axes: [Vec3; 3],
    pub control_points: Vec<Vec3>,
}

impl FfdGrid {
    /// Lattice with rest control points spanning `origin + Σ t_a·axes[a]`.
    pub fn new(dims: [usize; 3], origin: Vec3, axes: [Vec3; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::Validation(format!("lattice dims {dims:?} need at least 2 per axis")));
        }
        if axes.iter().any(|a| !(a.norm() > 0.0)) {
            return Err(Error::Degenerate("lattice axis has zero length".into()));
        }
        let mut control_points = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    control_points.push(
                        origin
                            + axes[0] * (i as f64 / (dims[0] - 1) as f64)
                            + axes[1] * (j as f64 / (dims[1] - 1) as f64)
                            + axes[2] * (k as f64 / (dims[2] - 1) as f64),
                    );
                }
            }
        }
        Ok(Self {
            dims,
            origin,
            axes,
            control_points,
        })
    }

    pub fn len(&self) -> usize {
        self.control_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.control_points.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Lattice-local coordinates of `p`; inside the box each lies in `[0, 1]`.
    pub fn local_coords(&self, p: &Vec3) -> [f64; 3] {
        let d = p - self.origin;
        [0, 1, 2].map(|a| d.dot(&self.axes[a]) / self.axes[a].norm_squared())
    }

    /// Converts a lattice-unit displacement to model units.
    pub fn to_world(&self, local: &[f64; 3]) -> Vec3 {
        self.axes[0] * local[0] + self.axes[1] * local[1] + self.axes[2] * local[2]
    }

    /// Point on the mid-plane of the lattice perpendicular to `axis`.
    pub fn mid_plane(&self, axis: usize) -> (Vec3, Vec3) {
        let center = self.origin + (self.axes[0] + self.axes[1] + self.axes[2]) * 0.5;
        (center, self.axes[axis].normalize())
    }
}

/// Lattice around the bounding box of `mesh`, inflated by `margin` (fraction
/// of the extent) on every side.
pub fn build_grid(mesh: &Mesh, dims: [usize; 3], margin: f64) -> Result<FfdGrid> {
    if !(margin >= 0.0) {
        return Err(Error::Validation(format!("negative lattice margin {margin}")));
    }
    let b = mesh
        .bounds()
        .ok_or_else(|| Error::Degenerate("cannot build a lattice around an empty mesh".into()))?;
    let ext = b.extent();
    if ext.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Degenerate(format!("bounding box is flat: extent {ext:?}")));
    }
    let pad = ext * margin;
    let inflated = Aabb::new(b.min - pad, b.max + pad);
    let e = inflated.extent();
    FfdGrid::new(
        dims,
        inflated.min,
        [Vec3::new(e.x, 0.0, 0.0), Vec3::new(0.0, e.y, 0.0), Vec3::new(0.0, 0.0, e.z)],
    )
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernstein basis polynomial `C(d,i) t^i (1-t)^(d-i)`. `t` outside `[0,1]`
/// extrapolates.
pub fn bernstein(degree: usize, index: usize, t: f64) -> f64 {
    assert!(index <= degree, "bernstein index {index} > degree {degree}");
    binomial(degree, index) * t.powi(index as i32) * (1.0 - t).powi((degree - index) as i32)
}

/// Dense `N × M` Bernstein weight matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
    /// Vertices whose local coordinates fall outside the unit box.
    pub outside: Vec<usize>,
}

impl DeformationMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `B · points`.
    pub fn apply(&self, points: &[Vec3]) -> Result<Vec<Vec3>> {
        if points.len() != self.cols {
            return Err(Error::Dimension(format!(
                "deformation matrix has {} columns, got {} control points",
                self.cols,
                points.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(points)
                    .fold(Vec3::zeros(), |acc, (w, p)| acc + p * *w)
            })
            .collect())
    }
}

pub fn build_deformation_matrix(mesh: &Mesh, grid: &FfdGrid) -> DeformationMatrix {
    let [dx, dy, dz] = grid.dims;
    let cols = grid.len();
    let mut entries = vec![0.0; mesh.vertices.len() * cols];
    let mut outside = Vec::new();
    let mut bx = vec![0.0; dx];
    let mut by = vec![0.0; dy];
    let mut bz = vec![0.0; dz];
    for (vi, v) in mesh.vertices.iter().enumerate() {
        let [s, t, u] = grid.local_coords(v);
        if [s, t, u].iter().any(|c| !(-1e-12..=1.0 + 1e-12).contains(c)) {
            outside.push(vi);
        }
        for (i, b) in bx.iter_mut().enumerate() {
            *b = bernstein(dx - 1, i, s);
        }
        for (j, b) in by.iter_mut().enumerate() {
            *b = bernstein(dy - 1, j, t);
        }
        for (k, b) in bz.iter_mut().enumerate() {
            *b = bernstein(dz - 1, k, u);
        }
        let row = &mut entries[vi * cols..(vi + 1) * cols];
        for k in 0..dz {
            for j in 0..dy {
                for i in 0..dx {
                    row[i + dx * (j + dy * k)] = bx[i] * by[j] * bz[k];
                }
            }
        }
    }
    if !outside.is_empty() {
        log::debug!("{} vertices lie outside the lattice box", outside.len());
    }
    DeformationMatrix {
        rows: mesh.vertices.len(),
        cols,
        entries,
        outside,
    }
}

/// One lattice slot fed by a reduced control point, with a per-component sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrySlot {
    pub full: usize,
    pub sign: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryPair {
    pub reduced: usize,
    pub slots: [SymmetrySlot; 2],
}

/// Expansion of half-lattice displacements onto the full lattice by
/// reflection across the mid-plane of `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryMap {
    pub dims: [usize; 3],
    pub axis: usize,
    pub pairs: Vec<SymmetryPair>,
}

pub fn build_symmetry_map(dims: [usize; 3], axis: usize) -> Result<SymmetryMap> {
    if axis > 2 {
        return Err(Error::Validation(format!("mirror axis {axis} out of range")));
    }
    if !dims[axis].is_multiple_of(2) {
        return Err(Error::Unsupported(format!(
            "mirror axis needs an even control-point count, got {}",
            dims[axis]
        )));
    }
    let index = |c: [usize; 3]| c[0] + dims[0] * (c[1] + dims[1] * c[2]);
    let mut mirror_sign = [1.0; 3];
    mirror_sign[axis] = -1.0;

    let mut pairs = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let c = [i, j, k];
                if c[axis] >= dims[axis] / 2 {
                    continue;
                }
                let mut m = c;
                m[axis] = dims[axis] - 1 - c[axis];
                pairs.push(SymmetryPair {
                    reduced: pairs.len(),
                    slots: [
                        SymmetrySlot { full: index(c), sign: [1.0; 3] },
                        SymmetrySlot { full: index(m), sign: mirror_sign },
                    ],
                });
            }
        }
    }
    Ok(SymmetryMap { dims, axis, pairs })
}

impl SymmetryMap {
    pub fn reduced_len(&self) -> usize {
        self.pairs.len()
    }

    pub fn full_len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Full-lattice displacements (lattice units) from reduced ones.
    pub fn expand(&self, dp: &ReducedDisplacements) -> Result<Vec<[f64; 3]>> {
        if dp.values.len() != self.reduced_len() {
            return Err(Error::Dimension(format!(
                "expected {} reduced displacements, got {}",
                self.reduced_len(),
                dp.values.len()
            )));
        }
        let mut full = vec![[0.0; 3]; self.full_len()];
        for pair in &self.pairs {
            let d = dp.values[pair.reduced];
            for slot in &pair.slots {
                full[slot.full] = [0, 1, 2].map(|a| slot.sign[a] * d[a]);
            }
        }
        Ok(full)
    }

    /// Dense `M × R` matrix for one coordinate component (row-major); the
    /// literal matrix form of [`SymmetryMap::expand`].
    pub fn dense(&self, component: usize) -> Vec<f64> {
        let (m, r) = (self.full_len(), self.reduced_len());
        let mut out = vec![0.0; m * r];
        for pair in &self.pairs {
            for slot in &pair.slots {
                out[slot.full * r + pair.reduced] = slot.sign[component];
            }
        }
        out
    }
}

/// Reduced control-point displacements in lattice units.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDisplacements {
    pub values: Vec<[f64; 3]>,
}

impl ReducedDisplacements {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![[0.0; 3]; n],
        }
    }

    /// From a flat row-major slice `[p0.x, p0.y, p0.z, p1.x, ...]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(3) {
            return Err(Error::Dimension(format!("{} scalars is not a multiple of 3", flat.len())));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite displacement".into()));
        }
        Ok(Self {
            values: flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `B · (P + expand(dp))`; faces are copied unchanged.
pub fn apply_ffd(
    mesh: &Mesh,
    grid: &FfdGrid,
    matrix: &DeformationMatrix,
    symmetry: &SymmetryMap,
    dp: &ReducedDisplacements,
) -> Result<Mesh> {
    if matrix.rows != mesh.vertices.len() || matrix.cols != grid.len() {
        return Err(Error::Dimension(format!(
            "deformation matrix is {}×{}, mesh has {} vertices and lattice {} points",
            matrix.rows,
            matrix.cols,
            mesh.vertices.len(),
            grid.len()
        )));
    }
    if symmetry.dims != grid.dims {
        return Err(Error::Dimension(format!(
            "symmetry map dims {:?} do not match lattice dims {:?}",
            symmetry.dims, grid.dims
        )));
    }
    let full = symmetry.expand(dp)?;
    let moved: Vec<Vec3> = grid
        .control_points
        .iter()
        .zip(&full)
        .map(|(p, d)| p + grid.to_world(d))
        .collect();
    Ok(Mesh {
        vertices: matrix.apply(&moved)?,
        faces: mesh.faces.clone(),
    })
}

/// Lattice, weight matrix and symmetry map prepared for one mesh.
#[derive(Debug, Clone)]
pub struct FfdRig {
    pub grid: FfdGrid,
    pub matrix: DeformationMatrix,
    pub symmetry: SymmetryMap,
}

impl FfdRig {
    pub fn new(mesh: &Mesh, dims: [usize; 3], margin: f64, mirror_axis: usize) -> Result<Self> {
        let grid = build_grid(mesh, dims, margin)?;
        let matrix = build_deformation_matrix(mesh, &grid);
        let symmetry = build_symmetry_map(dims, mirror_axis)?;
        Ok(Self {
            grid,
            matrix,
            symmetry,
        })
    }

    /// Default 4×4×4 lattice, 5% margin, mirrored across x.
    pub fn with_defaults(mesh: &Mesh) -> Result<Self> {
        Self::new(mesh, DEFAULT_DIMS, DEFAULT_MARGIN, 0)
    }

    pub fn deform(&self, mesh: &Mesh, dp: &ReducedDisplacements) -> Result<Mesh> {
        apply_ffd(mesh, &self.grid, &self.matrix, &self.symmetry, dp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernstein_values() {
        assert_eq!(bernstein(3, 0, 0.0), 1.0);
        assert_abs_diff_eq!(bernstein(3, 1, 0.5), 0.375, epsilon = 1e-15);
        for t in [-0.3, 0.0, 0.17, 0.5, 0.99, 1.4] {
            let s: f64 = (0..=3).map(|i| bernstein(3, i, t)).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_on_unit_cube() {
        let g = build_grid(&Mesh::unit_cube(), DEFAULT_DIMS, 0.0).unwrap();
        assert_eq!(g.origin, Vec3::zeros());
        assert!(g.axes.iter().all(|a| (a.norm() - 1.0).abs() < 1e-15));
        assert_eq!(g.len(), 64);
        assert_eq!(*g.control_points.last().unwrap(), Vec3::repeat(1.0));

        let g = build_grid(&Mesh::unit_cube(), DEFAULT_DIMS, 0.05).unwrap();
        assert!((g.origin - Vec3::repeat(-0.05)).norm() < 1e-15);
    }

    #[test]
    fn flat_mesh_is_degenerate() {
        let m = Mesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(build_grid(&m, DEFAULT_DIMS, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn origin_vertex_row_is_one_hot() {
        let m = Mesh::unit_cube();
        let g = build_grid(&m, DEFAULT_DIMS, 0.0).unwrap();
        let b = build_deformation_matrix(&m, &g);
        let row = b.row(0); // vertex (0,0,0)
        assert_eq!(row[0], 1.0);
        assert!(row[1..].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn center_row_matches_triple_sum() {
        let mut m = Mesh::unit_cube();
        m.vertices.push(Vec3::repeat(0.5));
        let g = build_grid(&m, DEFAULT_DIMS, 0.0).unwrap();
        let b = build_deformation_matrix(&m, &g);
        let row = b.row(8);
        let half = [0.125, 0.375, 0.375, 0.125]; // 3·t·(1-t)^2 etc. at t = 1/2
        for k in 0..4 {
            for j in 0..4 {
                for i in 0..4 {
                    assert_abs_diff_eq!(row[g.index(i, j, k)], half[i] * half[j] * half[k], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn symmetry_map_structure() {
        let phi = build_symmetry_map(DEFAULT_DIMS, 0).unwrap();
        assert_eq!(phi.reduced_len(), 32);
        let first = &phi.pairs[0];
        assert_eq!(first.slots[0].full, 0);
        assert_eq!(first.slots[1].full, 3);
        assert_eq!(first.slots[1].sign, [-1.0, 1.0, 1.0]);
        let mut seen: Vec<usize> = phi.pairs.iter().flat_map(|p| p.slots.iter().map(|s| s.full)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..64).collect::<Vec<_>>());
        assert!(matches!(build_symmetry_map([3, 4, 4], 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dense_view_matches_expand() {
        let phi = build_symmetry_map(DEFAULT_DIMS, 1).unwrap();
        let flat: Vec<f64> = (0..96).map(|i| (i as f64 * 0.37).sin()).collect();
        let dp = ReducedDisplacements::from_flat(&flat).unwrap();
        let full = phi.expand(&dp).unwrap();
        for c in 0..3 {
            let mat = phi.dense(c);
            for (row, point) in full.iter().enumerate() {
                let v: f64 = (0..32).map(|r| mat[row * 32 + r] * dp.values[r][c]).sum();
                assert_eq!(v, point[c]);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let m = Mesh::unit_cube();
        let rig = FfdRig::with_defaults(&m).unwrap();
        assert!(rig.deform(&m, &ReducedDisplacements::zeros(31)).is_err());
        let other = Mesh::uv_sphere(1.0, 4, 5);
        assert!(rig.deform(&other, &ReducedDisplacements::zeros(32)).is_err());
    }
}
