//! Minimal perspective rasterizer: z-buffered flat-shaded triangles lit by a
//! headlight on a white background.

use serde::{Deserialize, Serialize};

use super::image::{GrayImage, BACKGROUND};
use crate::mesh::{Mesh, Vec3};

pub const AMBIENT: f64 = 0.2;
pub const DIFFUSE: f64 = 0.7;

/// Orbit camera around `target`, y up. Azimuth 0 looks down −z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub fov_y: f64,
    pub target: [f64; 3],
}

struct View {
    eye: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
}

impl Camera {
    pub fn eye(&self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vec3::from(self.target) + Vec3::new(ce * sa, se, ce * ca) * self.distance
    }

    fn view(&self) -> View {
        let eye = self.eye();
        let forward = (Vec3::from(self.target) - eye).normalize();
        let mut right = forward.cross(&Vec3::y());
        if right.norm() < 1e-12 {
            right = Vec3::x();
        }
        let right = right.normalize();
        let up = right.cross(&forward);
        View { eye, right, up, forward }
    }
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Renders `mesh` into a `width × height` raster. Triangles with a vertex
/// behind the near plane are dropped.
pub fn render(mesh: &Mesh, camera: &Camera, width: usize, height: usize) -> GrayImage {
    let view = camera.view();
    let near = 1e-3 * camera.distance.max(1e-9);
    let tan = (camera.fov_y * 0.5).tan();
    let aspect = width as f64 / height as f64;

    let cam: Vec<Vec3> = mesh
        .vertices
        .iter()
        .map(|p| {
            let d = p - view.eye;
            Vec3::new(d.dot(&view.right), d.dot(&view.up), d.dot(&view.forward))
        })
        .collect();
    let project = |c: &Vec3| {
        let nx = c.x / (c.z * tan * aspect);
        let ny = c.y / (c.z * tan);
        ((nx + 1.0) * 0.5 * width as f64, (1.0 - ny) * 0.5 * height as f64)
    };

    let mut image = GrayImage::filled(width, height, BACKGROUND);
    let mut depth = vec![f64::INFINITY; width * height];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let c = [cam[f[0]], cam[f[1]], cam[f[2]]];
        if c.iter().any(|v| v.z < near) {
            continue;
        }
        let [a, b, cc] = mesh.triangle(fi);
        let normal = (b - a).cross(&(cc - a));
        let norm = normal.norm();
        if norm == 0.0 {
            continue;
        }
        let lambert = (normal / norm).dot(&view.forward).abs();
        let shade = (255.0 * (AMBIENT + DIFFUSE * lambert)).round().clamp(0.0, 255.0) as u8;

        let s = [project(&c[0]), project(&c[1]), project(&c[2])];
        let area = edge(s[0], s[1], s[2]);
        if area == 0.0 {
            continue;
        }
        let min_x = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_x = (s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil().max(0.0) as usize).min(width);
        let min_y = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_y = (s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil().max(0.0) as usize).min(height);
        for y in min_y..max_y {
            for x in min_x..max_x {
                let p = (x as f64 + 0.5, y as f64 + 0.5);
                let w0 = edge(s[1], s[2], p) / area;
                let w1 = edge(s[2], s[0], p) / area;
                let w2 = edge(s[0], s[1], p) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                // Perspective-correct depth from interpolated 1/z.
                let z = 1.0 / (w0 / c[0].z + w1 / c[1].z + w2 / c[2].z);
                let i = y * width + x;
                if z < depth[i] {
                    depth[i] = z;
                    image.pixels[i] = shade;
                }
            }
        }
    }
    image
}
