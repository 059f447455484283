//! Reconstructs a conductivity on one fixed mesh: generates noisy data on
//! an independent fine mesh, then runs the projected nonlinear CG minimizer
//! and prints its convergence trace.
//!
//! Run with: `cargo run --example single_inversion`

use eit_afem::fem::{Discretization, NodalField, DEFAULT_LAMBDA};
use eit_afem::inversion::{minimize, InversionProblem, OptimControls};
use eit_afem::mesh::{build_initial_mesh, NUM_ELECTRODES};
use eit_afem::solver::trigonometric_battery;
use eit_afem::synthetic::{add_noise, generate_exact_data, truth_field, unit_impedances, TruthSpec};

fn main() -> eit_afem::Result<()> {
    let spec = TruthSpec::SingleInclusion;
    let battery = trigonometric_battery(NUM_ELECTRODES, 10)?;
    let impedances = unit_impedances();

    // measurements from a fine, independently refined forward mesh
    let exact = generate_exact_data(spec, &battery, &impedances, 20_000, 8)?;
    let noisy = add_noise(&exact.voltages, 1e-3, 0)?;
    println!(
        "data: {} patterns on a {}-vertex forward mesh, noise 1e-3",
        noisy.noisy.len(),
        exact.mesh.num_vertices()
    );

    // invert on a uniformly refined coarse mesh
    let mut mesh = build_initial_mesh(8)?;
    for _ in 0..2 {
        let all: Vec<usize> = (0..mesh.elements.len()).collect();
        mesh = eit_afem::mesh::refine(&mesh, &all)?.0;
    }
    let disc = Discretization::new(mesh);
    println!("inversion mesh: {} vertices\n", disc.mesh.num_vertices());

    let problem = InversionProblem {
        data: noisy.noisy,
        battery,
        impedances,
        alpha: 2.5e-4,
        lambda: DEFAULT_LAMBDA,
        support: spec.support(),
    };
    let sigma0 = NodalField::constant(&disc.mesh, 1.0);
    let controls = OptimControls {
        max_iters: 100,
        ..OptimControls::default()
    };
    let state = minimize(&disc, &problem, &sigma0, &controls)?;

    println!("iter  objective      misfit        penalty       |P(grad)|     step");
    for r in state
        .trace
        .iter()
        .step_by((state.trace.len() / 15).max(1))
        .chain(state.trace.last())
    {
        println!(
            "{:>4}  {:<12.6e}  {:<12.6e}  {:<12.6e}  {:<12.6e}  {:.3e}",
            r.iter, r.objective, r.misfit, r.penalty, r.proj_grad_norm, r.step
        );
    }
    println!("\nterminated after {} iterations: {:?}", state.iterations, state.termination);

    // compare the recovery to the interpolated truth
    let truth = truth_field(spec, &disc.mesh);
    let peak_rec = state.sigma.values.iter().cloned().fold(f64::MIN, f64::max);
    let peak_true = truth.values.iter().cloned().fold(f64::MIN, f64::max);
    println!("peak conductivity: recovered {peak_rec:.3} vs truth {peak_true:.3}");
    Ok(())
}
