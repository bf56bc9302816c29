//! Triangle meshes and the geometric kernels built on them: OBJ I/O,
//! normalization, area-weighted surface sampling, exact point-to-surface
//! distance and solid voxelization.

mod distance;
mod io;
mod sample;
mod voxel;

pub use distance::{closest_point_on_triangle, point_to_mesh_distance, point_triangle_distance, SurfaceIndex};
pub use io::{load_obj, parse_obj, save_obj, write_obj};
pub use sample::{sample_surface, SurfaceSamples};
pub use voxel::{voxelize, VoxelGrid};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb::new(first, first);
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    pub fn inflated(&self, amount: f64) -> Aabb {
        let d = Vec3::repeat(amount);
        Aabb::new(self.min - d, self.max + d)
    }
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

/// Translation followed by a uniform scale: `p' = (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeTransform {
    pub center: Vec3,
    pub scale: f64,
}

impl NormalizeTransform {
    pub fn identity() -> Self {
        Self {
            center: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    pub fn apply(&self, mesh: &Mesh) -> Mesh {
        Mesh {
            vertices: mesh.vertices.iter().map(|p| self.apply_point(p)).collect(),
            faces: mesh.faces.clone(),
        }
    }
}

impl Mesh {
    /// Builds a mesh and checks the face invariants.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::Validation(format!(
                    "face {fi} references vertex {bad} but mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Validation(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
        }
        if self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Validation("non-finite vertex coordinate".into()));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Returns a copy with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, offset: Vec3) -> Mesh {
        self.map_vertices(|p| p + offset)
    }

    /// Axis-aligned box `[min, max]` with two triangles per face, outward winding.
    pub fn cuboid(min: Vec3, max: Vec3) -> Mesh {
        let vertices = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { min.x } else { max.x },
                    if i & 2 == 0 { min.y } else { max.y },
                    if i & 4 == 0 { min.z } else { max.z },
                )
            })
            .collect();
        let faces = vec![
            [0, 2, 1], [1, 2, 3], // z = min
            [4, 5, 6], [5, 7, 6], // z = max
            [0, 1, 4], [1, 5, 4], // y = min
            [2, 6, 3], [3, 6, 7], // y = max
            [0, 4, 2], [2, 4, 6], // x = min
            [1, 3, 5], [3, 7, 5], // x = max
        ];
        Mesh { vertices, faces }
    }

    /// The cube `[0,1]^3`.
    pub fn unit_cube() -> Mesh {
        Mesh::cuboid(Vec3::zeros(), Vec3::repeat(1.0))
    }

    /// Closed UV sphere centred at the origin.
    pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> Mesh {
        assert!(rings >= 2 && segments >= 3);
        let mut vertices = vec![Vec3::new(0.0, radius, 0.0)];
        for r in 1..rings {
            let phi = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let theta = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                vertices.push(Vec3::new(
                    radius * phi.sin() * theta.cos(),
                    radius * phi.cos(),
                    radius * phi.sin() * theta.sin(),
                ));
            }
        }
        vertices.push(Vec3::new(0.0, -radius, 0.0));
        let bottom = vertices.len() - 1;
        let ring = |r: usize, s: usize| 1 + (r - 1) * segments + s % segments;

        let mut faces = Vec::new();
        for s in 0..segments {
            faces.push([0, ring(1, s + 1), ring(1, s)]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                let (a, b) = (ring(r, s), ring(r, s + 1));
                let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            }
        }
        for s in 0..segments {
            faces.push([bottom, ring(rings - 1, s), ring(rings - 1, s + 1)]);
        }
        Mesh { vertices, faces }
    }
}

/// Centers the bounding box at the origin and scales its diagonal to 1.
pub fn normalize_mesh(mesh: &Mesh) -> Result<(Mesh, NormalizeTransform)> {
    let t = normalizing_transform(mesh)?;
    Ok((t.apply(mesh), t))
}

pub fn normalizing_transform(mesh: &Mesh) -> Result<NormalizeTransform> {
    let bounds = mesh
        .bounds()
        .ok_or_else(|| Error::Degenerate("cannot normalize an empty mesh".into()))?;
    let diag = bounds.diagonal();
    if !(diag > 0.0) {
        return Err(Error::Degenerate("bounding box has zero diagonal".into()));
    }
    Ok(NormalizeTransform {
        center: bounds.center(),
        scale: 1.0 / diag,
    })
}
