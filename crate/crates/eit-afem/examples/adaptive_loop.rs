//! Runs the full adaptive loop (SOLVE -> ESTIMATE -> MARK -> REFINE) at a
//! small scale next to the uniform baseline and prints the level summaries
//! and fitted convergence rates.
//!
//! Run with: `cargo run --example adaptive_loop`

use eit_afem::afem::{afem_run, error_vs_dof, uniform_run, RunSpec};
use eit_afem::fem::DEFAULT_LAMBDA;
use eit_afem::inversion::OptimControls;
use eit_afem::mesh::{build_initial_mesh, NUM_ELECTRODES};
use eit_afem::solver::trigonometric_battery;
use eit_afem::synthetic::{add_noise, generate_exact_data, unit_impedances, TruthSpec};

fn main() -> eit_afem::Result<()> {
    let battery = trigonometric_battery(NUM_ELECTRODES, 10)?;
    let impedances = unit_impedances();
    let exact = generate_exact_data(TruthSpec::SingleInclusion, &battery, &impedances, 20_000, 8)?;
    let noisy = add_noise(&exact.voltages, 1e-3, 0)?;

    let spec = RunSpec {
        initial_mesh: build_initial_mesh(8)?,
        data: noisy.noisy,
        battery,
        impedances,
        alpha: 2.5e-4,
        lambda: DEFAULT_LAMBDA,
        support: eit_afem::inversion::PenaltySupport::WholeDomain,
        controls: OptimControls {
            max_iters: 120,
            ..OptimControls::default()
        },
        theta: 0.7,
        max_levels: 6,
        dof_budget: 6_000,
    };

    println!("adaptive run (theta = 0.7):");
    let adaptive = afem_run(&spec)?;
    print_levels(&adaptive);

    println!("\nuniform baseline (mark everything):");
    let uniform = uniform_run(&spec)?;
    print_levels(&uniform);

    let at = error_vs_dof(&adaptive, &spec.support)?;
    let ut = error_vs_dof(&uniform, &spec.support)?;
    println!("\nfitted rates in error ~ N^(-r), each against its own finest recovery:");
    println!("  adaptive: L2 {:.2}, H1 {:.2}", at.l2_rate, at.h1_rate);
    println!("  uniform:  L2 {:.2}, H1 {:.2}", ut.l2_rate, ut.h1_rate);
    Ok(())
}

fn print_levels(run: &eit_afem::afem::RunResult) {
    println!("  level    dofs  elements  marked   objective     eta_total");
    for r in &run.records {
        let eta = (r.eta1_sq + r.eta2_sq + r.eta3_sq).sqrt();
        println!(
            "  {:>5}  {:>6}  {:>8}  {:>6}   {:<10.4e}  {:.4e}",
            r.level, r.dofs, r.elements, r.n_marked, r.objective, eta
        );
    }
}
