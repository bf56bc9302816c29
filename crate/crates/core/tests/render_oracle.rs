use meshrecon::mesh::{Mesh, Vec3};
use meshrecon::synth::{render, Camera, BACKGROUND};

const W: usize = 96;
const H: usize = 72;

fn camera() -> Camera {
    // Eye at (0, 0, 5) looking down −z.
    Camera { azimuth: 0.0, elevation: 0.0, distance: 5.0, fov_y: 40f64.to_radians(), target: [0.0; 3] }
}

/// Ray parameter of the hit with triangle `t`, if any (Möller–Trumbore).
fn intersect(origin: Vec3, dir: Vec3, t: &[Vec3; 3]) -> Option<f64> {
    let (e1, e2) = (t[1] - t[0], t[2] - t[0]);
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let s = origin - t[0];
    let u = s.dot(&p) / det;
    let q = s.cross(&e1);
    let v = dir.dot(&q) / det;
    let d = e2.dot(&q) / det;
    (u >= 0.0 && v >= 0.0 && u + v <= 1.0 && d > 0.0).then_some(d)
}

/// Direction through image point `(px, py)`, scaled so its forward component is 1.
fn ray(px: f64, py: f64) -> Vec3 {
    let tan = (20f64).to_radians().tan();
    let aspect = W as f64 / H as f64;
    let nx = px / W as f64 * 2.0 - 1.0;
    let ny = 1.0 - py / H as f64 * 2.0;
    Vec3::new(nx * tan * aspect, ny * tan, -1.0)
}

fn nearest(mesh: &Mesh, px: f64, py: f64) -> Option<usize> {
    let eye = Vec3::new(0.0, 0.0, 5.0);
    (0..mesh.faces.len())
        .filter_map(|f| intersect(eye, ray(px, py), &mesh.triangle(f)).map(|d| (f, d)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(f, _)| f)
}

fn expected_shade(mesh: &Mesh, f: usize) -> f64 {
    let [a, b, c] = mesh.triangle(f);
    let n = (b - a).cross(&(c - a)).normalize();
    255.0 * (0.2 + 0.7 * n.z.abs())
}

fn two_triangles() -> Mesh {
    Mesh {
        vertices: vec![
            // far, face-on, depth 2
            Vec3::new(-0.6, -0.5, 3.0),
            Vec3::new(0.6, -0.5, 3.0),
            Vec3::new(0.0, 0.6, 3.0),
            // near and tilted, depth about 1 to 1.4
            Vec3::new(-0.25, -0.2, 4.0),
            Vec3::new(0.3, -0.05, 3.6),
            Vec3::new(-0.05, 0.3, 3.85),
        ],
        faces: vec![[0, 1, 2], [3, 4, 5]],
    }
}

#[test]
fn overlapping_triangles_match_ray_cast() {
    let mesh = two_triangles();
    let shades = [expected_shade(&mesh, 0), expected_shade(&mesh, 1)];
    assert!((shades[0] - shades[1]).abs() > 5.0, "test needs distinguishable shades");
    let img = render(&mesh, &camera(), W, H);
    let (mut checked, mut near_seen, mut far_seen) = (0, 0, 0);
    for y in 0..H {
        for x in 0..W {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            let hit = nearest(&mesh, cx, cy);
            let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
            if corners.iter().any(|(dx, dy)| nearest(&mesh, x as f64 + dx, y as f64 + dy) != hit) {
                continue;
            }
            checked += 1;
            let got = img.get(x, y) as f64;
            match hit {
                None => assert_eq!(got, BACKGROUND as f64, "pixel ({x},{y}) should be empty"),
                Some(f) => {
                    assert!((got - shades[f]).abs() <= 1.0, "pixel ({x},{y}): {got}, expected face {f} shade {}", shades[f]);
                    if f == 1 { near_seen += 1 } else { far_seen += 1 }
                }
            }
        }
    }
    assert!(checked > W * H / 2 && near_seen > 50 && far_seen > 50, "{checked} {near_seen} {far_seen}");
}

#[test]
fn face_order_does_not_change_the_image() {
    let mut mesh = two_triangles();
    let a = render(&mesh, &camera(), W, H);
    mesh.faces.reverse();
    assert_eq!(a, render(&mesh, &camera(), W, H));
}

#[test]
fn flat_face_is_uniform_and_darker_than_background() {
    let mesh = Mesh {
        vertices: vec![Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        faces: vec![[0, 1, 2]],
    };
    let img = render(&mesh, &camera(), W, H);
    let interior: Vec<u8> = (0..H)
        .flat_map(|y| (0..W).map(move |x| (x, y)))
        .filter(|&(x, y)| {
            [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
                .iter()
                .all(|(dx, dy)| nearest(&mesh, x as f64 + dx, y as f64 + dy).is_some())
        })
        .map(|(x, y)| img.get(x, y))
        .collect();
    assert!(interior.len() > 100);
    assert!(interior.iter().all(|&v| v == interior[0]));
    assert!(interior[0] < BACKGROUND);
}

#[test]
fn empty_and_clipped_scenes_are_blank() {
    let blank = |mesh: &Mesh| render(mesh, &camera(), W, H).pixels.iter().all(|&v| v == BACKGROUND);
    assert!(blank(&Mesh { vertices: vec![], faces: vec![] }));
    // Entirely behind the eye.
    let behind = Mesh {
        vertices: vec![Vec3::new(-1.0, -1.0, 6.0), Vec3::new(1.0, -1.0, 6.0), Vec3::new(0.0, 1.0, 6.0)],
        faces: vec![[0, 1, 2]],
    };
    assert!(blank(&behind));
}
