//! Lattice deformation of a sphere: pulls the top control layer up and
//! widens one side, then writes rest and deformed meshes as OBJ.
//!
//! `cargo run --example ffd_deform [out_dir]`

use std::path::PathBuf;

use meshrecon::ffd::{FfdRig, ReducedDisplacements};
use meshrecon::mesh::{save_obj, Mesh};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("meshrecon-ffd"));
    std::fs::create_dir_all(&out)?;

    let sphere = Mesh::uv_sphere(1.0, 12, 24);
    let rig = FfdRig::with_defaults(&sphere)?;
    println!(
        "{} vertices, {} control points, {} free (mirrored across x)",
        sphere.vertices.len(),
        rig.grid.len(),
        rig.symmetry.reduced_len()
    );

    // Reduced points are the x-half of the lattice; look up each one's
    // lattice position to decide how to move it.
    let mut dp = ReducedDisplacements::zeros(rig.symmetry.reduced_len());
    for pair in &rig.symmetry.pairs {
        let p = rig.grid.local_coords(&rig.grid.control_points[pair.slots[0].full]);
        if p[1] > 0.9 {
            dp.values[pair.reduced][1] = 0.15;
        }
        if p[2] > 0.9 {
            dp.values[pair.reduced][0] = -0.05;
        }
    }
    let deformed = rig.deform(&sphere, &dp)?;

    let b = deformed.bounds().unwrap();
    println!("deformed extent {:.3} {:.3} {:.3}", b.extent().x, b.extent().y, b.extent().z);
    save_obj(&sphere, out.join("rest.obj"))?;
    save_obj(&deformed, out.join("deformed.obj"))?;
    println!("wrote {}", out.display());
    Ok(())
}
