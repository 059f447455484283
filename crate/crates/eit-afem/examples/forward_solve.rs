//! Assembles the complete electrode model for a smooth conductivity and
//! solves the full trigonometric current battery, printing the electrode
//! voltages of the first pattern and checking reciprocity.
//!
//! Run with: `cargo run --example forward_solve`

use eit_afem::fem::{assemble_system, Discretization, NodalField, DEFAULT_LAMBDA};
use eit_afem::mesh::{build_initial_mesh, NUM_ELECTRODES};
use eit_afem::solver::{measure, trigonometric_battery};
use eit_afem::synthetic::unit_impedances;

fn main() -> eit_afem::Result<()> {
    let disc = Discretization::new(build_initial_mesh(16)?);
    println!(
        "mesh: {} vertices, {} elements",
        disc.mesh.num_vertices(),
        disc.mesh.elements.len()
    );

    // single off-center inclusion
    let sigma = NodalField::new(
        &disc.mesh,
        disc.mesh
            .vertices
            .iter()
            .map(|v| 1.0 + (-8.0 * (v.x[0].powi(2) + (v.x[1] - 0.55).powi(2))).exp())
            .collect(),
    )?;

    let system = assemble_system(&disc, &sigma, &unit_impedances(), DEFAULT_LAMBDA)?;
    let battery = trigonometric_battery(NUM_ELECTRODES, 10)?;
    let voltages = measure(&system, &battery)?;

    println!("\nelectrode voltages for pattern j=1 (I_l = cos(2 pi l / 16)):");
    for (l, v) in voltages[0].values.iter().enumerate() {
        println!("  U_{:<2} = {v:+.6}", l + 1);
    }
    let mean: f64 = voltages[0].values.iter().sum();
    println!("  mean = {mean:+.2e} (grounded to zero)");

    // reciprocity: <I_j, U_k> = <I_k, U_j> for the symmetric CEM operator
    let mut worst: f64 = 0.0;
    for j in 0..battery.len() {
        for k in 0..battery.len() {
            let a = battery.patterns[j].dot(&voltages[k]);
            let b = battery.patterns[k].dot(&voltages[j]);
            worst = worst.max((a - b).abs() / a.abs().max(1e-30));
        }
    }
    println!("\nworst relative reciprocity defect over all pattern pairs: {worst:.2e}");
    Ok(())
}
