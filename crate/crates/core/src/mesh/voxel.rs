use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use super::{Aabb, Mesh, Vec3};
use crate::error::{Error, Result};

/// Solid occupancy on a cubic grid. Index order is x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub resolution: usize,
    pub origin: Vec3,
    pub voxel_size: f64,
    pub occupancy: Vec<bool>,
}

// Voxel `i` is treated as the closed interval [lo - SHIFT, hi - SHIFT] (in
// voxel units). Geometry lying exactly on a voxel boundary therefore belongs
// to the voxel above it, consistently and without gaps.
const SHIFT: f64 = 1e-9;

impl VoxelGrid {
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.occupancy[self.index(x, y, z)]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin + Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.voxel_size
    }

    /// Bounds whose cubic grid of `resolution` voxels covers the union of both
    /// meshes' boxes with one voxel of margin on every side.
    pub fn shared_bounds(a: &Mesh, b: &Mesh, resolution: usize) -> Result<Aabb> {
        let ba = a.bounds().ok_or_else(|| Error::Degenerate("empty mesh".into()))?;
        let bb = b.bounds().ok_or_else(|| Error::Degenerate("empty mesh".into()))?;
        Self::padded_bounds(&ba.union(&bb), resolution)
    }

    /// Cubic bounds with exactly one voxel of margin around `inner` along its
    /// longest axis.
    pub fn padded_bounds(inner: &Aabb, resolution: usize) -> Result<Aabb> {
        if resolution < 4 {
            return Err(Error::Validation(format!("voxel resolution {resolution} < 4")));
        }
        let longest = inner.extent().max();
        let extent = if longest > 0.0 { longest } else { 1.0 };
        let voxel = extent / (resolution - 2) as f64;
        let min = inner.min - Vec3::repeat(voxel);
        Ok(Aabb::new(min, min + Vec3::repeat(voxel * resolution as f64)))
    }

    /// ASCII export: a header line `resolution ox oy oz voxel_size`, then one
    /// `0`/`1` character per voxel in x-fastest order.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.occupancy.len() + 128);
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.resolution, self.origin.x, self.origin.y, self.origin.z, self.voxel_size
        );
        out.extend(self.occupancy.iter().map(|&o| if o { '1' } else { '0' }));
        out.push('\n');
        out
    }

    pub fn from_ascii(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Validation(format!("voxel file: {m}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("missing header"))?.split_whitespace().collect();
        if header.len() != 5 {
            return Err(bad("header needs 5 fields"));
        }
        let resolution: usize = header[0].parse().map_err(|_| bad("resolution"))?;
        let f = |i: usize| header[i].parse::<f64>().map_err(|_| bad("header number"));
        let origin = Vec3::new(f(1)?, f(2)?, f(3)?);
        let voxel_size = f(4)?;
        let body: String = lines.collect();
        let occupancy: Vec<bool> = body
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad("occupancy character")),
            })
            .collect::<Result<_>>()?;
        if occupancy.len() != resolution.pow(3) || !(voxel_size > 0.0) {
            return Err(bad("occupancy length or voxel size"));
        }
        Ok(Self {
            resolution,
            origin,
            voxel_size,
            occupancy,
        })
    }

    pub fn save_ascii(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_ascii()).map_err(|e| Error::io(path, e))
    }
}

/// Solid voxelization: surface voxels by triangle/box overlap, exterior by a
/// 6-connected flood fill from the grid boundary, interior is the rest.
pub fn voxelize(mesh: &Mesh, resolution: usize, bounds: &Aabb) -> Result<VoxelGrid> {
    if resolution < 4 {
        return Err(Error::Validation(format!("voxel resolution {resolution} < 4")));
    }
    let voxel_size = bounds.extent().max() / resolution as f64;
    if !(voxel_size > 0.0) {
        return Err(Error::Degenerate("voxel bounds have zero extent".into()));
    }
    let origin = bounds.min;
    let r = resolution;

    if let Some(mb) = mesh.bounds() {
        let tol = voxel_size * 1e-6;
        let lo = origin + Vec3::repeat(voxel_size - tol);
        let hi = origin + Vec3::repeat(voxel_size * (r - 1) as f64 + tol);
        if (0..3).any(|a| mb.min[a] < lo[a] || mb.max[a] > hi[a]) {
            return Err(Error::Validation(
                "mesh exceeds voxel bounds (one voxel of margin is required)".into(),
            ));
        }
    }

    let mut surface = vec![false; r * r * r];
    let idx = |x: usize, y: usize, z: usize| x + r * (y + r * z);
    let half = Vec3::repeat(0.5 * voxel_size);
    let to_grid = |p: &Vec3| (p - origin) / voxel_size;

    for f in 0..mesh.faces.len() {
        let tri = mesh.triangle(f);
        let Some(tb) = Aabb::from_points(&tri) else { continue };
        let (gmin, gmax) = (to_grid(&tb.min), to_grid(&tb.max));
        let range = |a: usize| {
            let lo = (gmin[a] + SHIFT - 1.0).floor().max(0.0) as usize;
            let hi = ((gmax[a] + SHIFT).floor().max(0.0) as usize).min(r - 1);
            lo..=hi
        };
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    let center = origin
                        + Vec3::new(x as f64 + 0.5 - SHIFT, y as f64 + 0.5 - SHIFT, z as f64 + 0.5 - SHIFT)
                            * voxel_size;
                    if triangle_box_overlap(&center, &half, &tri) {
                        surface[idx(x, y, z)] = true;
                    }
                }
            }
        }
    }

    let mut exterior = vec![false; r * r * r];
    let mut queue = VecDeque::new();
    for z in 0..r {
        for y in 0..r {
            for x in 0..r {
                let on_border = x == 0 || y == 0 || z == 0 || x == r - 1 || y == r - 1 || z == r - 1;
                let i = idx(x, y, z);
                if on_border && !surface[i] {
                    exterior[i] = true;
                    queue.push_back((x, y, z));
                }
            }
        }
    }
    while let Some((x, y, z)) = queue.pop_front() {
        let mut visit = |nx: usize, ny: usize, nz: usize| {
            let i = idx(nx, ny, nz);
            if !exterior[i] && !surface[i] {
                exterior[i] = true;
                queue.push_back((nx, ny, nz));
            }
        };
        if x > 0 { visit(x - 1, y, z); }
        if x + 1 < r { visit(x + 1, y, z); }
        if y > 0 { visit(x, y - 1, z); }
        if y + 1 < r { visit(x, y + 1, z); }
        if z > 0 { visit(x, y, z - 1); }
        if z + 1 < r { visit(x, y, z + 1); }
    }

    Ok(VoxelGrid {
        resolution,
        origin,
        voxel_size,
        occupancy: exterior.into_iter().map(|e| !e).collect(),
    })
}

/// Separating-axis test between a triangle and an axis-aligned box given by
/// center and half extents. Touching counts as overlap.
pub(crate) fn triangle_box_overlap(center: &Vec3, half: &Vec3, tri: &[Vec3; 3]) -> bool {
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // Box face normals.
    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo > half[a] || hi < -half[a] {
            return false;
        }
    }

    // Edge cross products.
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    for edge in &e {
        for unit in &axes {
            let axis = unit.cross(edge);
            if axis.norm_squared() == 0.0 {
                continue;
            }
            let p = [axis.dot(&v[0]), axis.dot(&v[1]), axis.dot(&v[2])];
            let rad = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
            let lo = p[0].min(p[1]).min(p[2]);
            let hi = p[0].max(p[1]).max(p[2]);
            if lo > rad || hi < -rad {
                return false;
            }
        }
    }

    // Triangle plane.
    let normal = e[0].cross(&e[1]);
    let d = normal.dot(&v[0]);
    let rad = half.x * normal.x.abs() + half.y * normal.y.abs() + half.z * normal.z.abs();
    d.abs() <= rad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_basics() {
        let half = Vec3::repeat(0.5);
        let tri = [Vec3::new(-1.0, -1.0, 0.0), Vec3::new(2.0, -1.0, 0.0), Vec3::new(-1.0, 2.0, 0.0)];
        assert!(triangle_box_overlap(&Vec3::zeros(), &half, &tri));
        assert!(!triangle_box_overlap(&Vec3::new(0.0, 0.0, 0.6), &half, &tri));
        // Touching the top face.
        assert!(triangle_box_overlap(&Vec3::new(0.0, 0.0, -0.5), &half, &tri));
        // Near the hypotenuse but outside along the edge axis.
        let small = [Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0), Vec3::new(2.0, 2.0, 0.0)];
        assert!(!triangle_box_overlap(&Vec3::zeros(), &Vec3::repeat(0.4), &small));
    }

    #[test]
    fn mesh_outside_bounds_is_error() {
        let b = Aabb::new(Vec3::repeat(0.0), Vec3::repeat(1.0));
        assert!(voxelize(&Mesh::unit_cube(), 8, &b).is_err());
    }

    #[test]
    fn open_triangle_has_no_interior() {
        let m = Mesh::new(
            vec![Vec3::new(0.1, 0.1, 0.5), Vec3::new(0.9, 0.1, 0.5), Vec3::new(0.1, 0.9, 0.5)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let b = VoxelGrid::padded_bounds(&Aabb::new(Vec3::zeros(), Vec3::repeat(1.0)), 16).unwrap();
        let g = voxelize(&m, 16, &b).unwrap();
        // Every occupied voxel must touch the triangle: nothing is enclosed.
        let half = Vec3::repeat(0.5 * g.voxel_size * (1.0 + 1e-6));
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    if g.get(x, y, z) {
                        assert!(triangle_box_overlap(&g.voxel_center(x, y, z), &half, &m.triangle(0)));
                    }
                }
            }
        }
        assert!(g.occupied_count() > 0);
    }

    #[test]
    fn ascii_round_trip() {
        let m = Mesh::uv_sphere(1.0, 6, 8);
        let b = VoxelGrid::padded_bounds(&m.bounds().unwrap(), 8).unwrap();
        let g = voxelize(&m, 8, &b).unwrap();
        let text = g.to_ascii();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split_whitespace().count(), 5);
        assert_eq!(lines.next().unwrap().len(), 512);
        assert_eq!(VoxelGrid::from_ascii(&text).unwrap(), g);
    }
}
