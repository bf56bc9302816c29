use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mesh, Vec3};
use crate::error::{Error, Result};

/// Points drawn uniformly over a mesh surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Vec3>,
    pub seed: u64,
}

/// Draws `n` points uniformly by area. Zero-area faces are skipped.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<SurfaceSamples> {
    if n == 0 {
        return Err(Error::Validation("sample count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut faces = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    let mut skipped = 0usize;
    for f in 0..mesh.faces.len() {
        let area = mesh.face_area(f);
        if area > 0.0 {
            total += area;
            cumulative.push(total);
            faces.push(f);
        } else {
            skipped += 1;
        }
    }
    if faces.is_empty() {
        return Err(Error::Degenerate("mesh has no face with positive area".into()));
    }
    if skipped > 0 {
        log::warn!("sample_surface: skipped {skipped} zero-area faces");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            let slot = cumulative
                .partition_point(|&c| c <= target)
                .min(faces.len() - 1);
            let [a, b, c] = mesh.triangle(faces[slot]);
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
        })
        .collect();
    Ok(SurfaceSamples { points, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(a: Vec3, b: Vec3, c: Vec3) -> Mesh {
        Mesh::new(vec![a, b, c], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn points_lie_inside_single_triangle() {
        let m = tri(Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        let s = sample_surface(&m, 1000, 3).unwrap();
        for p in &s.points {
            assert!(p.z.abs() < 1e-12);
            assert!(p.x >= -1e-12 && p.y >= -1e-12);
            assert!(p.x / 2.0 + p.y <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn area_weighting() {
        // Triangles with areas 1 and 3.
        let m = Mesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(10.0, 0.0, 0.0),
                Vec3::new(16.0, 0.0, 0.0),
                Vec3::new(10.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let n = 100_000;
        let s = sample_surface(&m, n, 11).unwrap();
        let second = s.points.iter().filter(|p| p.x >= 10.0).count();
        let frac = second as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn deterministic_for_seed() {
        let m = Mesh::uv_sphere(1.0, 6, 8);
        assert_eq!(sample_surface(&m, 50, 7).unwrap(), sample_surface(&m, 50, 7).unwrap());
        assert_ne!(sample_surface(&m, 50, 7).unwrap().points, sample_surface(&m, 50, 8).unwrap().points);
    }

    #[test]
    fn all_degenerate_faces_is_error() {
        let m = tri(Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0);
        assert!(matches!(sample_surface(&m, 10, 0), Err(Error::Degenerate(_))));
    }
}
