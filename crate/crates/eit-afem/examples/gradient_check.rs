//! Verifies the adjoint gradient of the Tikhonov functional against central
//! finite differences in random admissible directions.
//!
//! Run with: `cargo run --example gradient_check`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eit_afem::fem::{assemble_system, Discretization, NodalField, DEFAULT_LAMBDA};
use eit_afem::inversion::{eval_gradient, eval_objective, solve_adjoints, InversionProblem, PenaltySupport};
use eit_afem::mesh::{build_initial_mesh, NUM_ELECTRODES};
use eit_afem::solver::{measure, trigonometric_battery};
use eit_afem::synthetic::unit_impedances;

fn main() -> eit_afem::Result<()> {
    let disc = Discretization::new(build_initial_mesh(8)?);
    let battery = trigonometric_battery(NUM_ELECTRODES, 10)?;

    // data from a non-trivial truth so the misfit term is active
    let truth = NodalField::new(
        &disc.mesh,
        disc.mesh
            .vertices
            .iter()
            .map(|v| 1.0 + (-8.0 * (v.x[0].powi(2) + (v.x[1] - 0.55).powi(2))).exp())
            .collect(),
    )?;
    let data = measure(
        &assemble_system(&disc, &truth, &unit_impedances(), DEFAULT_LAMBDA)?,
        &battery,
    )?;
    let problem = InversionProblem {
        data,
        battery,
        impedances: unit_impedances(),
        alpha: 2.5e-4,
        lambda: DEFAULT_LAMBDA,
        support: PenaltySupport::WholeDomain,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let nv = disc.mesh.num_vertices();
    let t = 1e-5;
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        // random admissible sigma away from the box boundary, random mu
        let sigma = NodalField {
            values: (0..nv).map(|_| 0.8 + 0.8 * rng.random::<f64>()).collect(),
        };
        let mu: Vec<f64> = (0..nv).map(|_| rng.random::<f64>() - 0.5).collect();

        let (_, cache) = eval_objective(&disc, &problem, &sigma)?;
        let adjoints = solve_adjoints(&problem, &cache)?;
        let g = eval_gradient(&disc, &problem, &sigma, &cache, &adjoints)?;
        let directional: f64 = g.values.iter().zip(&mu).map(|(a, b)| a * b).sum();

        let shifted = |s: f64| NodalField {
            values: sigma
                .values
                .iter()
                .zip(&mu)
                .map(|(v, m)| v + s * m)
                .collect(),
        };
        let (jp, _) = eval_objective(&disc, &problem, &shifted(t))?;
        let (jm, _) = eval_objective(&disc, &problem, &shifted(-t))?;
        let fd = (jp.total - jm.total) / (2.0 * t);
        let rel = (directional - fd).abs() / fd.abs().max(1e-30);
        worst = worst.max(rel);
        println!(
            "trial {trial}: J'(sigma)[mu] = {directional:+.10e}, central FD = {fd:+.10e}, rel diff {rel:.2e}"
        );
    }
    println!("\nworst relative difference: {worst:.2e} (tolerance 1e-4)");
    assert!(worst < 1e-4);
    Ok(())
}
