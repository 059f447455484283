//! Batch front end: `gendata` produces a measurement bundle, `afem` and
//! `uniform` run the adaptive and baseline reconstructions, and `rates`
//! fits convergence rates from two finished runs.
//!
//! Exit codes: 0 success, 2 configuration/input errors, 3 numerical
//! failures, 4 I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eit_afem::afem::{afem_run, error_vs_dof, fit_tail_rates, uniform_run, RunSpec};
use eit_afem::config::ExperimentConfig;
use eit_afem::io;
use eit_afem::mesh::{build_initial_mesh, NUM_ELECTRODES};
use eit_afem::solver::trigonometric_battery;
use eit_afem::synthetic::{add_noise, generate_exact_data, unit_impedances, TruthSpec};
use eit_afem::EitError;

#[derive(Parser)]
#[command(name = "eit", about = "Adaptive FEM reconstruction for EIT", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (key=value text).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic measurements on an independent fine mesh.
    Gendata {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Adaptive reconstruction run.
    Afem {
        #[command(flatten)]
        common: CommonArgs,
        /// Data bundle directory produced by `gendata`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Uniform-refinement baseline run.
    Uniform {
        #[command(flatten)]
        common: CommonArgs,
        /// Data bundle directory produced by `gendata`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Fit convergence rates from two finished runs.
    Rates {
        /// Adaptive run directory.
        #[arg(long)]
        adaptive: PathBuf,
        /// Uniform run directory.
        #[arg(long)]
        uniform: PathBuf,
        /// Output directory for rates.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, EitError> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_gendata(common: &CommonArgs) -> Result<(), EitError> {
    let cfg = load_config(common)?;
    let truth = TruthSpec::from_example(cfg.example)?;
    let battery = trigonometric_battery(NUM_ELECTRODES, 10)?;
    let impedances = unit_impedances();
    let exact = generate_exact_data(
        truth,
        &battery,
        &impedances,
        cfg.data_dof_target,
        cfg.n_per_side,
    )?;
    let noisy = add_noise(&exact.voltages, cfg.epsilon, cfg.seed)?;
    io::write_data_bundle(&common.out, &cfg, &noisy, &exact.mesh)?;
    let checksum = io::dir_checksum(&common.out)?;
    println!("bundle {} checksum {checksum}", common.out.display());
    Ok(())
}

fn build_run_spec(cfg: &ExperimentConfig, data_dir: &PathBuf) -> Result<RunSpec, EitError> {
    let (noisy, bundle_example) = io::read_data_bundle(data_dir)?;
    if bundle_example != cfg.example {
        return Err(EitError::Config(format!(
            "bundle was generated for example {bundle_example} but config requests example {}",
            cfg.example
        )));
    }
    let battery = trigonometric_battery(NUM_ELECTRODES, noisy.len())?;
    Ok(RunSpec {
        initial_mesh: build_initial_mesh(cfg.n_per_side)?,
        data: noisy,
        battery,
        impedances: unit_impedances(),
        alpha: cfg.alpha,
        lambda: cfg.lambda,
        support: cfg.support(),
        controls: cfg.controls(),
        theta: cfg.theta,
        max_levels: cfg.max_levels,
        dof_budget: cfg.dof_budget,
    })
}

fn cmd_run(common: &CommonArgs, data: &PathBuf, adaptive: bool) -> Result<(), EitError> {
    let cfg = load_config(common)?;
    let spec = build_run_spec(&cfg, data)?;
    let result = if adaptive {
        afem_run(&spec)?
    } else {
        uniform_run(&spec)?
    };
    let errors = if result.records.len() >= 4 {
        Some(error_vs_dof(&result, &spec.support)?)
    } else {
        None
    };
    io::write_run_dir(&common.out, &result, errors.as_ref())?;
    let last = result.records.last().expect("at least one level");
    println!(
        "run {} levels {} final_dofs {} objective {}",
        common.out.display(),
        result.records.len(),
        last.dofs,
        last.objective
    );
    Ok(())
}

fn cmd_rates(adaptive: &PathBuf, uniform: &PathBuf, out: &PathBuf) -> Result<(), EitError> {
    for dir in [adaptive, uniform] {
        if !dir.join("errors.csv").is_file() {
            return Err(EitError::InvalidArgument(format!(
                "{} has no errors.csv; the run needs at least 4 levels",
                dir.display()
            )));
        }
    }
    let a = io::read_errors_csv(&adaptive.join("errors.csv"))?;
    let u = io::read_errors_csv(&uniform.join("errors.csv"))?;
    if a.len() < 3 || u.len() < 3 {
        return Err(EitError::InvalidArgument(format!(
            "need at least 4 levels per run to fit rates (adaptive {} rows, uniform {} rows)",
            a.len(),
            u.len()
        )));
    }
    let (al2, ah1) = fit_tail_rates(&a);
    let (ul2, uh1) = fit_tail_rates(&u);
    std::fs::create_dir_all(out)?;
    let csv = io::rates_to_csv(&[
        ("adaptive", "l2", al2),
        ("adaptive", "h1", ah1),
        ("uniform", "l2", ul2),
        ("uniform", "h1", uh1),
    ]);
    std::fs::write(out.join("rates.csv"), csv)?;
    println!("rates adaptive l2 {al2} h1 {ah1} uniform l2 {ul2} h1 {uh1}");
    Ok(())
}

fn exit_code_for(err: &EitError) -> u8 {
    match err {
        EitError::Config(_)
        | EitError::InvalidArgument(_)
        | EitError::Parse(_)
        | EitError::InvalidMesh(_) => 2,
        EitError::LinearSolve(_)
        | EitError::LineSearch { .. }
        | EitError::ClosureDepth(_)
        | EitError::InadmissibleConductivity { .. } => 3,
        EitError::Io(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gendata { common } => cmd_gendata(common),
        Command::Afem { common, data } => cmd_run(common, data, true),
        Command::Uniform { common, data } => cmd_run(common, data, false),
        Command::Rates {
            adaptive,
            uniform,
            out,
        } => cmd_rates(adaptive, uniform, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
