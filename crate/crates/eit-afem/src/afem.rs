//! The adaptive loop (SOLVE -> ESTIMATE -> MARK -> REFINE), the
//! uniform-refinement baseline, and convergence-rate analysis of a run.

use std::time::Instant;

use crate::estimator::{compute_estimator, mark, EstimatorField};
use crate::fem::{prolong, Discretization, ElectrodeVector, NodalField};
use crate::inversion::{
    minimize, solve_adjoints, InversionProblem, OptimControls, PenaltySupport, TraceRow,
};
use crate::mesh::{refine, Mesh, ParentMap};
use crate::solver::CurrentBattery;
use crate::{EitError, Result};

/// Full specification of one adaptive or uniform run.
pub struct RunSpec {
    pub initial_mesh: Mesh,
    pub data: Vec<ElectrodeVector>,
    pub battery: CurrentBattery,
    pub impedances: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub support: PenaltySupport,
    pub controls: OptimControls,
    /// Bulk-marking parameter; `1.0` marks every element.
    pub theta: f64,
    /// Stop after this many completed levels.
    pub max_levels: usize,
    /// Do not start a level whose vertex count exceeds this budget.
    pub dof_budget: usize,
}

impl RunSpec {
    fn problem(&self) -> InversionProblem {
        InversionProblem {
            data: self.data.clone(),
            battery: self.battery.clone(),
            impedances: self.impedances.clone(),
            alpha: self.alpha,
            lambda: self.lambda,
            support: self.support,
        }
    }

    fn validate(&self) -> Result<()> {
        self.problem().validate()?;
        if !(0.0 < self.theta && self.theta <= 1.0) {
            return Err(EitError::InvalidArgument(format!(
                "marking parameter theta = {} must lie in (0, 1]",
                self.theta
            )));
        }
        if self.max_levels == 0 {
            return Err(EitError::InvalidArgument("max_levels must be positive".into()));
        }
        Ok(())
    }
}

/// Summary of one completed level.
#[derive(Debug, Clone, Copy)]
pub struct LevelRecord {
    pub level: usize,
    pub dofs: usize,
    pub elements: usize,
    pub objective: f64,
    pub misfit: f64,
    pub penalty: f64,
    pub eta1_sq: f64,
    pub eta2_sq: f64,
    pub eta3_sq: f64,
    /// Largest per-element indicator among the marked set.
    pub max_marked_indicator: f64,
    pub n_marked: usize,
    pub optimizer_iterations: usize,
    pub wall_time_s: f64,
}

/// Everything produced by a run: per-level summaries, meshes, minimizers,
/// estimator fields, optimizer traces and the refinement history needed to
/// transfer fields between levels.
pub struct RunResult {
    pub records: Vec<LevelRecord>,
    pub meshes: Vec<Mesh>,
    pub sigmas: Vec<NodalField>,
    pub estimators: Vec<EstimatorField>,
    pub marked: Vec<Vec<usize>>,
    pub traces: Vec<Vec<TraceRow>>,
    /// `history[k]` holds the parent maps from mesh `k` to mesh `k + 1`
    /// (one map per bisection pass).
    pub history: Vec<Vec<ParentMap>>,
}

impl RunResult {
    pub fn final_sigma(&self) -> &NodalField {
        self.sigmas.last().expect("run produced at least one level")
    }

    pub fn final_mesh(&self) -> &Mesh {
        self.meshes.last().expect("run produced at least one level")
    }
}

/// Refines the marked elements and then the elements they were split into,
/// so every marked element is quartered (plus conformity closure). Uniform
/// marking therefore exactly quadruples the element count per level.
pub fn refine_marked(mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, Vec<ParentMap>)> {
    let (mid, pm1) = refine(mesh, marked)?;
    let mut second: Vec<usize> = (0..mid.elements.len())
        .filter(|&t| marked.binary_search(&pm1.element_parent[t]).is_ok())
        .collect();
    second.dedup();
    let (fine, pm2) = refine(&mid, &second)?;
    Ok((fine, vec![pm1, pm2]))
}

fn run(spec: &RunSpec, theta: f64) -> Result<RunResult> {
    spec.validate()?;
    let problem = spec.problem();
    let mut mesh = spec.initial_mesh.clone();
    let mut sigma = NodalField::constant(&mesh, 1.0);

    let mut result = RunResult {
        records: Vec::new(),
        meshes: Vec::new(),
        sigmas: Vec::new(),
        estimators: Vec::new(),
        marked: Vec::new(),
        traces: Vec::new(),
        history: Vec::new(),
    };

    for level in 0..spec.max_levels {
        let started = Instant::now();
        let disc = Discretization::new(mesh);

        // SOLVE: minimize from the (transferred) previous minimizer
        let state = minimize(&disc, &problem, &sigma, &spec.controls)?;
        let adjoints = solve_adjoints(&problem, &state.cache)?;

        // ESTIMATE
        let est = compute_estimator(
            &disc,
            &state.sigma,
            &state.cache.forward,
            &adjoints,
            &problem.impedances,
            problem.alpha,
            &problem.support,
        )?;

        // MARK
        let mut marked = mark(&est, theta)?;
        marked.sort_unstable();
        let max_marked = marked
            .iter()
            .map(|&t| est.total_sq(t).sqrt())
            .fold(0.0f64, f64::max);
        let [e1, e2, e3] = est.totals();

        result.records.push(LevelRecord {
            level,
            dofs: disc.mesh.num_vertices(),
            elements: disc.mesh.elements.len(),
            objective: state.objective.total,
            misfit: state.objective.misfit,
            penalty: state.objective.penalty,
            eta1_sq: e1,
            eta2_sq: e2,
            eta3_sq: e3,
            max_marked_indicator: max_marked,
            n_marked: marked.len(),
            optimizer_iterations: state.iterations,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        result.traces.push(state.trace.clone());
        result.estimators.push(est);
        result.sigmas.push(state.sigma.clone());
        result.marked.push(marked.clone());
        let last_level = level + 1 == spec.max_levels || marked.is_empty();
        result.meshes.push(disc.mesh);
        if last_level {
            break;
        }

        // REFINE + warm start
        let current = result.meshes.last().unwrap();
        let (next, maps) = refine_marked(current, &marked)?;
        if next.num_vertices() > spec.dof_budget {
            break;
        }
        sigma = state.sigma;
        for pm in &maps {
            sigma = prolong(&sigma, pm)?;
        }
        result.history.push(maps);
        mesh = next;
    }
    Ok(result)
}

/// Adaptive run with the spec's marking parameter.
pub fn afem_run(spec: &RunSpec) -> Result<RunResult> {
    run(spec, spec.theta)
}

/// Uniform-refinement baseline: every element is marked on every level, so
/// the meshes coincide with global quartering.
pub fn uniform_run(spec: &RunSpec) -> Result<RunResult> {
    run(spec, 1.0)
}

/// One row of the error-versus-size table: errors of the level-`k`
/// minimizer against the run's own finest minimizer, measured on the finest
/// mesh over the penalty support.
#[derive(Debug, Clone, Copy)]
pub struct ErrorRow {
    pub level: usize,
    pub dofs: usize,
    pub l2_error: f64,
    pub h1_error: f64,
}

/// Error table plus least-squares convergence rates.
#[derive(Debug, Clone)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    pub l2_rate: f64,
    pub h1_rate: f64,
}

/// `L2(support)` and full `H1(support)` norms of a nodal field.
pub fn support_norms(disc: &Discretization, f: &NodalField, support: &PenaltySupport) -> (f64, f64) {
    let mut l2_sq = 0.0;
    let mut semi_sq = 0.0;
    for t in support.elements(&disc.mesh) {
        let el = &disc.mesh.elements[t];
        let v: Vec<f64> = el.vertex_ids.iter().map(|&i| f.values[i]).collect();
        // exact P1 mass: |T|/12 * [[2,1,1],[1,2,1],[1,1,2]]
        let a = disc.areas[t];
        l2_sq += a / 6.0
            * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[0] * v[1] + v[1] * v[2] + v[0] * v[2]);
        let g = disc.field_gradient(t, f);
        semi_sq += a * (g[0] * g[0] + g[1] * g[1]);
    }
    (l2_sq.sqrt(), (l2_sq + semi_sq).sqrt())
}

/// Ordinary least-squares slope of `log(err)` against `log(dofs)`, negated
/// so a positive value means decay `err ~ dofs^{-rate}`.
pub fn fit_rate(points: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, e)| e > 0.0)
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    -(n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Errors of every pre-final level against the finest minimizer, with rates
/// fitted on the last `max(3, levels - 2)` pre-final levels.
pub fn error_vs_dof(run: &RunResult, support: &PenaltySupport) -> Result<ErrorTable> {
    if run.sigmas.len() < 4 {
        return Err(EitError::InvalidArgument(format!(
            "need at least 4 levels to fit rates, got {}",
            run.sigmas.len()
        )));
    }
    let k_final = run.sigmas.len() - 1;
    let fine_disc = Discretization::new(run.meshes[k_final].clone());
    let reference = &run.sigmas[k_final];
    let mut rows = Vec::new();
    for k in 0..k_final {
        // transfer through the nested hierarchy to the finest mesh
        let mut f = run.sigmas[k].clone();
        for maps in &run.history[k..k_final] {
            for pm in maps {
                f = prolong(&f, pm)?;
            }
        }
        let diff = NodalField {
            values: f
                .values
                .iter()
                .zip(&reference.values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        let (l2, h1) = support_norms(&fine_disc, &diff, support);
        rows.push(ErrorRow {
            level: k,
            dofs: run.records[k].dofs,
            l2_error: l2,
            h1_error: h1,
        });
    }
    let (l2_rate, h1_rate) =
        fit_tail_rates(&rows.iter().map(|r| (r.dofs, r.l2_error, r.h1_error)).collect::<Vec<_>>());
    Ok(ErrorTable {
        rows,
        l2_rate,
        h1_rate,
    })
}

/// Fits both rates on the last `max(3, levels - 2)` pre-final levels, where
/// `levels` counts the run's levels (one more than the error rows).
pub fn fit_tail_rates(rows: &[(usize, f64, f64)]) -> (f64, f64) {
    let levels = rows.len() + 1;
    let window = rows.len().min(3.max(levels.saturating_sub(2)));
    let tail = &rows[rows.len() - window..];
    (
        fit_rate(&tail.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>()),
        fit_rate(&tail.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_system, DEFAULT_LAMBDA};
    use crate::mesh::build_initial_mesh;
    use crate::solver::{measure, trigonometric_battery};
    use crate::synthetic::{truth_field, TruthSpec};

    fn small_spec(theta: f64, max_levels: usize, dof_budget: usize) -> RunSpec {
        let mesh = build_initial_mesh(8).unwrap();
        let battery = trigonometric_battery(16, 10).unwrap();
        // data from the truth on a finer, adaptively grown mesh
        let data = crate::synthetic::generate_exact_data(
            TruthSpec::SingleInclusion,
            &battery,
            &vec![1.0; 16],
            700,
            8,
        )
        .unwrap();
        RunSpec {
            initial_mesh: mesh,
            data: data.voltages,
            battery,
            impedances: vec![1.0; 16],
            alpha: 2.5e-4,
            lambda: DEFAULT_LAMBDA,
            support: PenaltySupport::WholeDomain,
            controls: OptimControls {
                max_iters: 40,
                ..OptimControls::default()
            },
            theta,
            max_levels,
            dof_budget,
        }
    }

    #[test]
    fn refine_marked_quarters_marked_elements() {
        let mesh = build_initial_mesh(8).unwrap();
        let all: Vec<usize> = (0..mesh.elements.len()).collect();
        let (fine, maps) = refine_marked(&mesh, &all).unwrap();
        assert_eq!(fine.elements.len(), 4 * mesh.elements.len());
        assert_eq!(maps.len(), 2);
        // uniform DOF ladder: 81 -> 289
        assert_eq!(mesh.num_vertices(), 81);
        assert_eq!(fine.num_vertices(), 289);
        let (finer, _) = refine_marked(&fine, &(0..fine.elements.len()).collect::<Vec<_>>()).unwrap();
        assert_eq!(finer.num_vertices(), 1089);
    }

    #[test]
    fn uniform_run_follows_dof_ladder_and_respects_budget() {
        let spec = small_spec(0.7, 10, 1100);
        let result = uniform_run(&spec).unwrap();
        let dofs: Vec<usize> = result.records.iter().map(|r| r.dofs).collect();
        assert_eq!(dofs, vec![81, 289, 1089]);
        // every element marked on every level
        for (rec, marked) in result.records.iter().zip(&result.marked) {
            assert_eq!(marked.len(), rec.elements);
        }
    }

    #[test]
    fn adaptive_theta_one_matches_uniform_meshes() {
        let spec = small_spec(1.0, 3, 100_000);
        let adaptive = afem_run(&spec).unwrap();
        let uniform = uniform_run(&spec).unwrap();
        for (a, u) in adaptive.records.iter().zip(&uniform.records) {
            assert_eq!(a.dofs, u.dofs);
            assert_eq!(a.elements, u.elements);
        }
    }

    #[test]
    fn adaptive_run_monotone_dofs_and_recorded_invariants() {
        let spec = small_spec(0.7, 4, 100_000);
        let result = afem_run(&spec).unwrap();
        assert!(result.records.len() >= 2);
        for w in result.records.windows(2) {
            assert!(w[1].dofs > w[0].dofs);
        }
        for (k, rec) in result.records.iter().enumerate() {
            assert_eq!(rec.level, k);
            assert_eq!(result.meshes[k].num_vertices(), rec.dofs);
            assert_eq!(result.sigmas[k].len(), rec.dofs);
            assert!(rec.n_marked > 0 && rec.n_marked <= rec.elements);
            assert!(rec.eta1_sq >= 0.0 && rec.eta2_sq >= 0.0 && rec.eta3_sq >= 0.0);
            assert!(rec.max_marked_indicator > 0.0);
        }
        // adaptive marks strictly fewer than all elements
        assert!(result.records[0].n_marked < result.records[0].elements);
        // warm start: level 1 starts exactly at the prolonged level-0
        // minimizer
        let start1 = result.traces[1].first().unwrap().objective;
        let mut carried = result.sigmas[0].clone();
        for pm in &result.history[0] {
            carried = prolong(&carried, pm).unwrap();
        }
        let disc1 = Discretization::new(result.meshes[1].clone());
        let problem = spec.problem();
        let carried_obj = crate::inversion::eval_objective(&disc1, &problem, &carried)
            .unwrap()
            .0;
        assert!(
            (start1 - carried_obj.total).abs() <= 1e-12 * (1.0 + carried_obj.total.abs()),
            "level 1 did not start from the prolonged minimizer: {start1} vs {}",
            carried_obj.total
        );
    }

    #[test]
    fn estimator_totals_decrease_along_adaptive_run() {
        let spec = small_spec(0.7, 4, 100_000);
        let result = afem_run(&spec).unwrap();
        let first: f64 = result.records.first().unwrap().eta1_sq;
        let last: f64 = result.records.last().unwrap().eta1_sq;
        assert!(last < first, "eta1 did not decrease: {first} -> {last}");
    }

    #[test]
    fn support_norms_match_closed_forms() {
        let disc = Discretization::new(build_initial_mesh(8).unwrap());
        // f = x1 on (-1,1)^2: |f|_L2^2 = int x^2 = 4/3, |grad f|^2 = 4
        let f = NodalField {
            values: disc.mesh.vertices.iter().map(|v| v.x[0]).collect(),
        };
        let (l2, h1) = support_norms(&disc, &f, &PenaltySupport::WholeDomain);
        assert!((l2 * l2 - 4.0 / 3.0).abs() < 1e-13);
        assert!((h1 * h1 - (4.0 / 3.0 + 4.0)).abs() < 1e-12);
        // constant 1 on omega': area 1/4
        let c = NodalField::constant(&disc.mesh, 1.0);
        let (l2c, _) = support_norms(&disc, &c, &PenaltySupport::omega_prime());
        assert!((l2c * l2c - 0.25).abs() < 1e-13);
    }

    #[test]
    fn fit_rate_recovers_exact_power_law() {
        let pts: Vec<(usize, f64)> = [100usize, 400, 1600, 6400]
            .iter()
            .map(|&n| (n, 7.0 * (n as f64).powf(-0.75)))
            .collect();
        assert!((fit_rate(&pts) - 0.75).abs() < 1e-12);
        assert!(fit_rate(&pts[..1]).is_nan());
    }

    #[test]
    fn error_vs_dof_errors_decrease_and_reference_is_finest() {
        let spec = small_spec(0.7, 4, 100_000);
        let result = afem_run(&spec).unwrap();
        let table = error_vs_dof(&result, &PenaltySupport::WholeDomain).unwrap();
        assert_eq!(table.rows.len(), result.records.len() - 1);
        for w in table.rows.windows(2) {
            assert!(w[1].l2_error <= w[0].l2_error * 1.5);
        }
        assert!(table.rows.last().unwrap().l2_error > 0.0);
    }

    #[test]
    fn run_rejects_invalid_spec() {
        let mut spec = small_spec(0.7, 3, 100_000);
        spec.theta = 0.0;
        assert!(afem_run(&spec).is_err());
        let mut spec = small_spec(0.7, 3, 100_000);
        spec.alpha = -1.0;
        assert!(afem_run(&spec).is_err());
        let mut spec = small_spec(0.7, 3, 100_000);
        spec.max_levels = 0;
        assert!(afem_run(&spec).is_err());
    }

    #[test]
    fn uniform_matches_direct_solve_without_warm_start_effects() {
        // one-level uniform run equals direct minimize on the same mesh
        let spec = small_spec(1.0, 1, 100_000);
        let result = uniform_run(&spec).unwrap();
        let disc = Discretization::new(spec.initial_mesh.clone());
        let problem = spec.problem();
        let sigma0 = NodalField::constant(&disc.mesh, 1.0);
        let direct = minimize(&disc, &problem, &sigma0, &spec.controls).unwrap();
        assert_eq!(result.sigmas[0].values, direct.sigma.values);
    }

    #[test]
    fn truth_data_on_same_mesh_gives_tiny_misfit_floor() {
        // sanity for the pipeline: solving with data generated on the same
        // coarse mesh at the truth yields near-zero misfit at the truth
        let disc = Discretization::new(build_initial_mesh(8).unwrap());
        let battery = trigonometric_battery(16, 10).unwrap();
        let truth = truth_field(TruthSpec::SingleInclusion, &disc.mesh);
        let sys = assemble_system(&disc, &truth, &vec![1.0; 16], DEFAULT_LAMBDA).unwrap();
        let data = measure(&sys, &battery).unwrap();
        let problem = InversionProblem {
            data,
            battery,
            impedances: vec![1.0; 16],
            alpha: 2.5e-4,
            lambda: DEFAULT_LAMBDA,
            support: PenaltySupport::WholeDomain,
        };
        let (obj, _) = crate::inversion::eval_objective(&disc, &problem, &truth).unwrap();
        assert!(obj.misfit < 1e-20);
    }
}
