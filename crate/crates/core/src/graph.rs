//! Shape-embedding graph: template meshes as nodes, edges between meshes in
//! dense vertex correspondence, and blending of a node with its neighbors.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::ffd::{FfdRig, ReducedDisplacements, DEFAULT_DIMS, DEFAULT_MARGIN};
use crate::mesh::{load_obj, save_obj, Mesh};

/// Blending weights with magnitude at or below this are dropped.
pub const DEFAULT_ZERO_TOL: f64 = 1e-3;

#[derive(Debug)]
pub struct GraphNode {
    pub id: usize,
    pub mesh: Mesh,
    pub path: PathBuf,
    rig: OnceLock<FfdRig>,
}

impl GraphNode {
    pub fn new(id: usize, mesh: Mesh, path: impl Into<PathBuf>) -> Self {
        Self {
            id,
            mesh,
            path: path.into(),
            rig: OnceLock::new(),
        }
    }
}

#[derive(Debug)]
pub struct EmbeddingGraph {
    pub nodes: Vec<GraphNode>,
    adjacency: Vec<BTreeSet<usize>>,
    /// Axis across which lattice displacements are mirrored (0 = x).
    pub mirror_axis: usize,
}

impl EmbeddingGraph {
    /// Builds a graph, normalizing edges to undirected pairs and checking the
    /// correspondence invariant on every edge.
    pub fn new(nodes: Vec<GraphNode>, edges: &[(usize, usize)], mirror_axis: usize) -> Result<Self> {
        for (pos, node) in nodes.iter().enumerate() {
            if node.id != pos {
                return Err(Error::Validation(format!(
                    "node ids must be dense from 0: position {pos} holds id {}",
                    node.id
                )));
            }
            if node.mesh.is_empty() {
                return Err(Error::Validation(format!("node {pos} has an empty mesh")));
            }
        }
        if mirror_axis > 2 {
            return Err(Error::Validation(format!("mirror axis {mirror_axis} out of range")));
        }
        let n = nodes.len();
        let mut adjacency = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            for id in [a, b] {
                if id >= n {
                    return Err(Error::InvalidNode { id, count: n });
                }
            }
            if a == b {
                return Err(Error::Validation(format!("self edge on node {a}")));
            }
            let (va, vb) = (nodes[a].mesh.vertices.len(), nodes[b].mesh.vertices.len());
            if va != vb {
                return Err(Error::Validation(format!(
                    "edge ({a},{b}) joins meshes with {va} and {vb} vertices"
                )));
            }
            adjacency[a].insert(b);
            adjacency[b].insert(a);
        }
        Ok(Self {
            nodes,
            adjacency,
            mirror_axis,
        })
    }

    pub fn from_meshes(meshes: Vec<Mesh>, edges: &[(usize, usize)]) -> Result<Self> {
        let nodes = meshes
            .into_iter()
            .enumerate()
            .map(|(i, m)| GraphNode::new(i, m, format!("node_{i:03}.obj")))
            .collect();
        Self::new(nodes, edges, 0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect()
    }

    pub fn check_node(&self, id: usize) -> Result<&GraphNode> {
        self.nodes.get(id).ok_or(Error::InvalidNode {
            id,
            count: self.nodes.len(),
        })
    }

    /// Neighbors of `c` (never `c` itself).
    pub fn subgraph(&self, c: usize) -> Result<&BTreeSet<usize>> {
        self.check_node(c)?;
        Ok(&self.adjacency[c])
    }

    /// Lattice rig of node `c`, built on first use.
    pub fn rig(&self, c: usize) -> Result<&FfdRig> {
        let node = self.check_node(c)?;
        if let Some(rig) = node.rig.get() {
            return Ok(rig);
        }
        let rig = FfdRig::new(&node.mesh, DEFAULT_DIMS, DEFAULT_MARGIN, self.mirror_axis)?;
        Ok(node.rig.get_or_init(|| rig))
    }

    /// Largest distance from `center` to any node vertex.
    pub fn radius_about(&self, center: &crate::mesh::Vec3) -> f64 {
        self.nodes
            .iter()
            .flat_map(|n| n.mesh.vertices.iter())
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max)
    }

    /// Reads a manifest of `node <id> <obj-path>` and `edge <id> <id>` lines.
    /// Relative mesh paths resolve against the manifest's directory. An
    /// optional `mirror <x|y|z>` line selects the symmetry axis.
    pub fn load(manifest: impl AsRef<Path>) -> Result<Self> {
        let manifest = manifest.as_ref();
        let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let malformed = |line: usize, message: String| Error::Malformed {
            path: manifest.to_path_buf(),
            line,
            message,
        };

        let mut nodes: Vec<(usize, PathBuf)> = Vec::new();
        let mut edges = Vec::new();
        let mut mirror_axis = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let id = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| malformed(lineno, format!("bad node id {t:?}")))
            };
            match tokens.as_slice() {
                [] => {}
                ["node", nid, path] => nodes.push((id(nid)?, PathBuf::from(path))),
                ["edge", a, b] => edges.push((id(a)?, id(b)?)),
                ["mirror", axis] => {
                    mirror_axis = match *axis {
                        "x" => 0,
                        "y" => 1,
                        "z" => 2,
                        other => return Err(malformed(lineno, format!("unknown axis {other:?}"))),
                    }
                }
                _ => return Err(malformed(lineno, format!("unrecognized line {line:?}"))),
            }
        }
        nodes.sort_by_key(|(id, _)| *id);
        let loaded = nodes
            .into_iter()
            .map(|(id, rel)| {
                let mesh = load_obj(base.join(&rel))?;
                Ok(GraphNode::new(id, mesh, rel))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(loaded, &edges, mirror_axis)
    }

    /// Writes every node mesh under `dir` (at its recorded relative path) and
    /// a manifest named `manifest_name`. Returns the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>, manifest_name: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut text = String::new();
        let _ = writeln!(text, "mirror {}", ["x", "y", "z"][self.mirror_axis]);
        for node in &self.nodes {
            let path = dir.join(&node.path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            save_obj(&node.mesh, &path)?;
            let _ = writeln!(text, "node {} {}", node.id, node.path.display());
        }
        for (a, b) in self.edges() {
            let _ = writeln!(text, "edge {a} {b}");
        }
        let manifest = dir.join(manifest_name);
        fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
        Ok(manifest)
    }
}

/// Compact shape code: template index, reduced lattice displacements and
/// per-node blending weights (indexed by global node id).
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeParams {
    pub index: usize,
    pub dp: ReducedDisplacements,
    pub alpha: Vec<f64>,
}

impl ShapeParams {
    /// Identity parameters: no displacement, all weight on `index`.
    pub fn identity(index: usize, node_count: usize, reduced: usize) -> Self {
        let mut alpha = vec![0.0; node_count];
        alpha[index] = 1.0;
        Self {
            index,
            dp: ReducedDisplacements::zeros(reduced),
            alpha,
        }
    }

    /// `dp` flattened, followed by `alpha`.
    pub fn kappa(&self) -> Vec<f64> {
        let mut k = self.dp.to_flat();
        k.extend_from_slice(&self.alpha);
        k
    }

    pub fn from_kappa(index: usize, kappa: &[f64], node_count: usize) -> Result<Self> {
        if kappa.len() < node_count || !(kappa.len() - node_count).is_multiple_of(3) {
            return Err(Error::Dimension(format!(
                "shape code of length {} does not split into displacements and {node_count} weights",
                kappa.len()
            )));
        }
        let split = kappa.len() - node_count;
        Ok(Self {
            index,
            dp: ReducedDisplacements::from_flat(&kappa[..split])?,
            alpha: kappa[split..].to_vec(),
        })
    }

    pub fn validate(&self, graph: &EmbeddingGraph) -> Result<()> {
        graph.check_node(self.index)?;
        if self.alpha.len() != graph.len() {
            return Err(Error::Dimension(format!(
                "alpha has {} entries for a {}-node graph",
                self.alpha.len(),
                graph.len()
            )));
        }
        Ok(())
    }
}

/// Neighbors of `c` whose weight survives sparsification.
pub fn participants(graph: &EmbeddingGraph, c: usize, alpha: &[f64], zero_tol: f64) -> Result<Vec<usize>> {
    Ok(graph
        .subgraph(c)?
        .iter()
        .copied()
        .filter(|&i| alpha.get(i).is_some_and(|a| a.abs() > zero_tol))
        .collect())
}

/// `alpha[c]·base + Σ alpha[i]·V_i` over neighbors `i` of `c` with
/// `|alpha[i]| > zero_tol`; faces are those of node `c`.
pub fn linear_combine(
    graph: &EmbeddingGraph,
    c: usize,
    base: &Mesh,
    alpha: &[f64],
    zero_tol: f64,
) -> Result<Mesh> {
    let center = graph.check_node(c)?;
    if alpha.len() != graph.len() {
        return Err(Error::Dimension(format!(
            "alpha has {} entries for a {}-node graph",
            alpha.len(),
            graph.len()
        )));
    }
    let n = center.mesh.vertices.len();
    if base.vertices.len() != n {
        return Err(Error::Dimension(format!(
            "base mesh has {} vertices, node {c} has {n}",
            base.vertices.len()
        )));
    }
    let mut vertices: Vec<_> = base.vertices.iter().map(|v| v * alpha[c]).collect();
    for i in participants(graph, c, alpha, zero_tol)? {
        let other = &graph.nodes[i].mesh;
        if other.vertices.len() != n {
            return Err(Error::Dimension(format!(
                "node {i} has {} vertices, node {c} has {n}",
                other.vertices.len()
            )));
        }
        for (acc, v) in vertices.iter_mut().zip(&other.vertices) {
            *acc += v * alpha[i];
        }
    }
    Ok(Mesh {
        vertices,
        faces: center.mesh.faces.clone(),
    })
}
