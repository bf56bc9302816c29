#![allow(dead_code)]

use meshrecon::mesh::{Mesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_deviation(a: &[Vec3], b: &[Vec3]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Sphere with random per-axis scale, offset and radial noise.
pub fn random_blob(seed: u64) -> Mesh {
    let mut r = rng(seed);
    let rings = r.random_range(4..9);
    let segments = r.random_range(5..12);
    let scale = Vec3::new(r.random_range(0.3..2.0), r.random_range(0.3..2.0), r.random_range(0.3..2.0));
    let offset = Vec3::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
    let base = Mesh::uv_sphere(1.0, rings, segments);
    let noise: Vec<f64> = (0..base.vertices.len()).map(|_| r.random_range(0.8..1.2)).collect();
    let vertices = base
        .vertices
        .iter()
        .zip(&noise)
        .map(|(v, n)| v.component_mul(&scale) * *n + offset)
        .collect();
    Mesh {
        vertices,
        faces: base.faces,
    }
}

/// Mesh whose vertex set is mirror-symmetric across the plane x = `cx`,
/// with `pairs[i]` the index of the mirror image of vertex `i`.
pub fn mirror_symmetric_blob(seed: u64) -> (Mesh, Vec<usize>) {
    let mut r = rng(seed);
    let half: Vec<Vec3> = (0..r.random_range(10..30))
        .map(|_| Vec3::new(r.random_range(0.05..1.5), r.random_range(-1.0..1.0), r.random_range(-0.7..0.7)))
        .collect();
    let cx = r.random_range(-2.0..2.0);
    let n = half.len();
    let mut vertices: Vec<Vec3> = half.iter().map(|v| Vec3::new(cx + v.x, v.y, v.z)).collect();
    vertices.extend(half.iter().map(|v| Vec3::new(cx - v.x, v.y, v.z)));
    let pairs = (0..2 * n).map(|i| if i < n { i + n } else { i - n }).collect();
    let faces = (0..n - 2).map(|i| [i, i + 1, i + 2 + n]).collect();
    (Mesh { vertices, faces }, pairs)
}

pub fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tolerance {tol})"
    );
}

pub mod blend;
pub mod distance;
pub mod grad;
