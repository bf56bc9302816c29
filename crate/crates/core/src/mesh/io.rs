use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, Vec3};
use crate::error::{Error, Result};

/// Loads a Wavefront OBJ file. Only `v` and `f` records are used; polygons
/// are fan-triangulated and `/vt/vn` suffixes are ignored.
pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

pub fn parse_obj(text: &str, origin: &Path) -> Result<Mesh> {
    let malformed = |line: usize, message: String| Error::Malformed {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| malformed(lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(malformed(lineno, "vertex needs 3 coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| parse_face_index(t, vertices.len()))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|m| malformed(lineno, m))?;
                if idx.len() < 3 {
                    return Err(malformed(lineno, "face needs at least 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Mesh::new(vertices, faces)
}

// Returns a 0-based index. Relative (negative) indices resolve against the
// vertices read so far; range checking against the final count is left to
// mesh validation.
fn parse_face_index(token: &str, seen: usize) -> std::result::Result<usize, String> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| format!("bad face index {token:?}"))?;
    match i {
        0 => Err("face index 0 is invalid in OBJ".into()),
        i if i > 0 => Ok((i - 1) as usize),
        i => {
            let back = (-i) as usize;
            if back > seen {
                Err(format!("relative face index {i} before start"))
            } else {
                Ok(seen - back)
            }
        }
    }
}

pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    for v in &mesh.vertices {
        // `{}` on f64 is the shortest representation that round-trips exactly.
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn save_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_obj(mesh)).map_err(|e| Error::io(path, e))
}
