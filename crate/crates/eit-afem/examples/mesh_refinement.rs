//! Builds the initial electrode-tagged mesh, bisects a few marked
//! elements with conformity closure, and prints mesh statistics.
//!
//! Run with: `cargo run --example mesh_refinement`

use eit_afem::io::mesh_to_string;
use eit_afem::mesh::{build_initial_mesh, refine, BoundaryLabel};

fn stats(tag: &str, mesh: &eit_afem::mesh::Mesh) {
    let electrodes = mesh
        .boundary_faces
        .iter()
        .filter(|f| matches!(f.label, BoundaryLabel::Electrode(_)))
        .count();
    println!(
        "{tag}: {} vertices, {} elements, {} boundary faces ({} on electrodes), min angle {:.1} deg, total area {:.12}",
        mesh.num_vertices(),
        mesh.elements.len(),
        mesh.boundary_faces.len(),
        electrodes,
        mesh.min_angle().to_degrees(),
        mesh.total_area(),
    );
}

fn main() -> eit_afem::Result<()> {
    let mesh = build_initial_mesh(8)?;
    stats("initial", &mesh);

    // bisect the five elements closest to the top-right corner; the closure
    // keeps the mesh conforming, so a few extra elements split too
    let mut by_distance: Vec<usize> = (0..mesh.elements.len()).collect();
    by_distance.sort_by(|&a, &b| {
        let d = |t: usize| {
            let c = mesh.centroid(t);
            (c[0] - 1.0).powi(2) + (c[1] - 1.0).powi(2)
        };
        d(a).partial_cmp(&d(b)).unwrap()
    });
    let marked: Vec<usize> = {
        let mut m = by_distance[..5].to_vec();
        m.sort_unstable();
        m
    };
    let (refined, parent_map) = refine(&mesh, &marked)?;
    stats("after local refinement", &refined);
    println!(
        "{} new vertices, each the midpoint of a parent edge",
        parent_map.new_vertex_parents.len()
    );

    // uniform refinement: mark everything, element count doubles per pass
    let all: Vec<usize> = (0..refined.elements.len()).collect();
    let (uniform, _) = refine(&refined, &all)?;
    stats("after one mark-all pass", &uniform);

    // the exchange format round-trips through plain text
    let text = mesh_to_string(&mesh);
    println!("\nfirst lines of the mesh file:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
