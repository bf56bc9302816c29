use meshrecon::mesh::Vec3;

/// Exact distance from `p` to the surface of the box `[lo, hi]`.
pub fn box_surface_distance(p: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    let inside = (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]);
    if inside {
        (0..3).map(|a| (p[a] - lo[a]).min(hi[a] - p[a])).fold(f64::INFINITY, f64::min)
    } else {
        let d = Vec3::from_fn(|a, _| (lo[a] - p[a]).max(0.0).max(p[a] - hi[a]));
        d.norm()
    }
}

/// Midpoints of a `k × k` grid on each face of the unit cube shifted by
/// `offset`; equal face areas make the plain mean area-uniform.
pub fn stratified_cube_points(offset: Vec3, k: usize) -> Vec<Vec3> {
    let mut pts = Vec::with_capacity(6 * k * k);
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0.0, 1.0] {
            for i in 0..k {
                for j in 0..k {
                    let mut p = Vec3::zeros();
                    p[axis] = side;
                    p[u] = (i as f64 + 0.5) / k as f64;
                    p[v] = (j as f64 + 0.5) / k as f64;
                    pts.push(p + offset);
                }
            }
        }
    }
    pts
}

/// Surface distance between the unit cube and its copy shifted by `shift`,
/// measured after scaling the cube's diagonal to 1, from about 10⁶
/// stratified points per direction.
pub fn shifted_cube_reference(shift: Vec3) -> f64 {
    let k = 409; // 6·409² ≈ 10⁶
    let mean = |pts: Vec<Vec3>, lo: Vec3, hi: Vec3| pts.iter().map(|&p| box_surface_distance(p, lo, hi)).sum::<f64>() / pts.len() as f64;
    let one = Vec3::repeat(1.0);
    let forward = mean(stratified_cube_points(shift, k), Vec3::zeros(), one);
    let backward = mean(stratified_cube_points(Vec3::zeros(), k), shift, one + shift);
    (forward + backward) / 3f64.sqrt()
}
