use super::{Aabb, Mesh, Vec3};

/// Closest point to `p` on triangle `abc`, handling the vertex, edge and
/// interior regions (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = va + vb + vc;
    if denom.abs() <= f64::MIN_POSITIVE {
        // Collinear triangle: nearest of the three edges.
        return [
            closest_point_on_segment(p, a, b),
            closest_point_on_segment(p, b, c),
            closest_point_on_segment(p, a, c),
        ]
        .into_iter()
        .min_by(|x, y| (x - p).norm_squared().total_cmp(&(y - p).norm_squared()))
        .unwrap();
    }
    let v = vb / denom;
    let w = vc / denom;
    a + ab * v + ac * w
}

fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

pub fn point_triangle_distance(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    (closest_point_on_triangle(p, &tri[0], &tri[1], &tri[2]) - p).norm()
}

/// Exact distance from `p` to the mesh surface by checking every face.
/// A mesh without faces is treated as a point cloud.
pub fn point_to_mesh_distance(p: &Vec3, mesh: &Mesh) -> f64 {
    if mesh.faces.is_empty() {
        return mesh
            .vertices
            .iter()
            .map(|v| (v - p).norm())
            .fold(f64::INFINITY, f64::min);
    }
    (0..mesh.faces.len())
        .map(|f| point_triangle_distance(p, &mesh.triangle(f)))
        .fold(f64::INFINITY, f64::min)
}

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // Leaf: range into `order`; inner: child indices.
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

/// Bounding-volume hierarchy over a mesh's triangles for nearest-surface
/// queries. Returns the same distances as [`point_to_mesh_distance`].
#[derive(Debug, Clone)]
pub struct SurfaceIndex {
    triangles: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SurfaceIndex {
    pub fn new(mesh: &Mesh) -> Self {
        let triangles: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            build(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Self {
            triangles,
            order,
            nodes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.distance_squared(p) >= best * best {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &t in &self.order[start..end] {
                        best = best.min(point_triangle_distance(p, &self.triangles[t]));
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(p);
                    let dr = self.nodes[right].bounds.distance_squared(p);
                    // Visit the nearer child first.
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}

fn build(
    triangles: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let bounds = Aabb::from_points(order[start..end].iter().flat_map(|&t| triangles[t].iter())).unwrap();
    let id = nodes.len();
    nodes.push(Node {
        bounds,
        kind: NodeKind::Leaf { start, end },
    });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let cb = Aabb::from_points(order[start..end].iter().map(|&t| &centroids[t])).unwrap();
    let ext = cb.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis])
    });
    let left = build(triangles, centroids, order, start, mid, nodes);
    let right = build(triangles, centroids, order, mid, end, nodes);
    nodes[id].kind = NodeKind::Inner { left, right };
    id
}
