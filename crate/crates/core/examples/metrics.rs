//! Surface distance and voxel IoU between a sphere and a squashed copy,
//! plus the voxel grid export.
//!
//! `cargo run --release --example metrics [out_dir]`

use std::path::PathBuf;

use meshrecon::mesh::{voxelize, Mesh, Vec3, VoxelGrid};
use meshrecon::metrics::{surface_distance, vertex_distance, voxel_iou, DEFAULT_SURFACE_SAMPLES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("meshrecon-metrics"));
    std::fs::create_dir_all(&out)?;

    let gt = Mesh::uv_sphere(1.0, 16, 32);
    for squash in [1.0, 0.9, 0.7, 0.5] {
        let est = gt.map_vertices(|v| Vec3::new(v.x, v.y * squash, v.z));
        println!(
            "y × {squash:.1}: dist3D {:.4} (vertices {:.4}), IoU {:.3}",
            surface_distance(&est, &gt, DEFAULT_SURFACE_SAMPLES, 0)?,
            vertex_distance(&est, &gt)?,
            voxel_iou(&est, &gt, 32)?
        );
    }

    let bounds = VoxelGrid::padded_bounds(&gt.bounds().unwrap(), 32)?;
    let grid = voxelize(&gt, 32, &bounds)?;
    grid.save_ascii(out.join("sphere_voxels.txt"))?;
    println!("{} of {} voxels filled", grid.occupied_count(), 32 * 32 * 32);
    Ok(())
}
