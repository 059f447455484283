//! Plain-text artifacts: mesh files, CSV tables, data bundles and run
//! directories. All floating-point values are written with Rust's shortest
//! round-trip formatting, so writing is deterministic and reading is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::afem::{ErrorTable, RunResult};
use crate::config::ExperimentConfig;
use crate::estimator::EstimatorField;
use crate::fem::{ElectrodeVector, NodalField};
use crate::inversion::TraceRow;
use crate::mesh::{BoundaryFace, BoundaryLabel, Element, Mesh, Vertex};
use crate::synthetic::NoisyData;
use crate::{EitError, Result};

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> EitError {
    EitError::Parse(format!("{}: {msg}", path.display()))
}

// ---------------------------------------------------------------- meshes

/// Serializes a mesh in the plain-text exchange format: a header line
/// `vertices N elements M boundary B`, then `x y` per vertex,
/// `v0 v1 v2 refedge generation` per element and `v0 v1 label` per
/// boundary face (label `e<l>` or `ins`, 0-based indices).
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "vertices {} elements {} boundary {}",
        mesh.vertices.len(),
        mesh.elements.len(),
        mesh.boundary_faces.len()
    )
    .unwrap();
    for v in &mesh.vertices {
        writeln!(s, "{} {}", v.x[0], v.x[1]).unwrap();
    }
    for e in &mesh.elements {
        writeln!(
            s,
            "{} {} {} {} {}",
            e.vertex_ids[0], e.vertex_ids[1], e.vertex_ids[2], e.refinement_edge, e.generation
        )
        .unwrap();
    }
    for f in &mesh.boundary_faces {
        let label = match f.label {
            BoundaryLabel::Electrode(l) => format!("e{l}"),
            BoundaryLabel::Insulated => "ins".to_string(),
        };
        writeln!(s, "{} {} {}", f.vertex_ids[0], f.vertex_ids[1], label).unwrap();
    }
    s
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty mesh file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[0] != "vertices" || h[2] != "elements" || h[4] != "boundary" {
        return Err(parse_err(path, format!("bad header {header:?}")));
    }
    let bad = |what: &str| parse_err(path, format!("bad {what}"));
    let n: usize = h[1].parse().map_err(|_| bad("vertex count"))?;
    let m: usize = h[3].parse().map_err(|_| bad("element count"))?;
    let b: usize = h[5].parse().map_err(|_| bad("boundary count"))?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("vertex line"))?;
        let p: Vec<&str> = line.split_whitespace().collect();
        if p.len() != 2 {
            return Err(bad("vertex line"));
        }
        vertices.push(Vertex {
            x: [
                p[0].parse().map_err(|_| bad("vertex coordinate"))?,
                p[1].parse().map_err(|_| bad("vertex coordinate"))?,
            ],
        });
    }
    let mut elements = Vec::with_capacity(m);
    for _ in 0..m {
        let line = lines.next().ok_or_else(|| bad("element line"))?;
        let p: Vec<&str> = line.split_whitespace().collect();
        if p.len() != 5 {
            return Err(bad("element line"));
        }
        elements.push(Element {
            vertex_ids: [
                p[0].parse().map_err(|_| bad("element vertex"))?,
                p[1].parse().map_err(|_| bad("element vertex"))?,
                p[2].parse().map_err(|_| bad("element vertex"))?,
            ],
            refinement_edge: p[3].parse().map_err(|_| bad("refinement edge"))?,
            generation: p[4].parse().map_err(|_| bad("generation"))?,
        });
    }
    let mut boundary_faces = Vec::with_capacity(b);
    for _ in 0..b {
        let line = lines.next().ok_or_else(|| bad("boundary line"))?;
        let p: Vec<&str> = line.split_whitespace().collect();
        if p.len() != 3 {
            return Err(bad("boundary line"));
        }
        let label = if p[2] == "ins" {
            BoundaryLabel::Insulated
        } else if let Some(l) = p[2].strip_prefix('e') {
            BoundaryLabel::Electrode(l.parse().map_err(|_| bad("electrode label"))?)
        } else {
            return Err(bad("boundary label"));
        };
        boundary_faces.push(BoundaryFace {
            vertex_ids: [
                p[0].parse().map_err(|_| bad("boundary vertex"))?,
                p[1].parse().map_err(|_| bad("boundary vertex"))?,
            ],
            label,
        });
    }
    Mesh::new(vertices, elements, boundary_faces)
}

// ---------------------------------------------------------------- fields

pub fn field_to_csv(field: &NodalField) -> String {
    let mut s = String::from("vertex,value\n");
    for (i, v) in field.values.iter().enumerate() {
        writeln!(s, "{i},{v}").unwrap();
    }
    s
}

pub fn read_field(path: &Path) -> Result<NodalField> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "vertex,value" {
                return Err(parse_err(path, format!("bad header {line:?}")));
            }
            continue;
        }
        let (idx, val) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, format!("bad row {line:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_err(path, format!("bad vertex index {line:?}")))?;
        if idx != values.len() {
            return Err(parse_err(path, format!("out-of-order vertex {idx}")));
        }
        values.push(
            val.parse()
                .map_err(|_| parse_err(path, format!("bad value {line:?}")))?,
        );
    }
    Ok(NodalField { values })
}

// ----------------------------------------------------------- measurements

/// `pattern,electrode,value` rows, both indices 1-based in battery order.
pub fn measurements_to_csv(data: &[ElectrodeVector]) -> String {
    let mut s = String::from("pattern,electrode,value\n");
    for (j, u) in data.iter().enumerate() {
        for (l, v) in u.values.iter().enumerate() {
            writeln!(s, "{},{},{v}", j + 1, l + 1).unwrap();
        }
    }
    s
}

pub fn read_measurements(path: &Path) -> Result<Vec<ElectrodeVector>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "pattern,electrode,value" {
                return Err(parse_err(path, format!("bad header {line:?}")));
            }
            continue;
        }
        let p: Vec<&str> = line.split(',').collect();
        if p.len() != 3 {
            return Err(parse_err(path, format!("bad row {line:?}")));
        }
        let bad = || parse_err(path, format!("bad row {line:?}"));
        rows.push((
            p[0].parse().map_err(|_| bad())?,
            p[1].parse().map_err(|_| bad())?,
            p[2].parse().map_err(|_| bad())?,
        ));
    }
    let n_patterns = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let n_electrodes = rows.iter().map(|r| r.1).max().unwrap_or(0);
    if rows.len() != n_patterns * n_electrodes {
        return Err(parse_err(path, "incomplete measurement table"));
    }
    let mut out = vec![vec![f64::NAN; n_electrodes]; n_patterns];
    for (j, l, v) in rows {
        out[j - 1][l - 1] = v;
    }
    out.into_iter()
        .map(|values| {
            if values.iter().any(|v| v.is_nan()) {
                Err(parse_err(path, "duplicate or missing measurement row"))
            } else {
                Ok(ElectrodeVector { values })
            }
        })
        .collect()
}

// ------------------------------------------------------------- run tables

pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iter,objective,misfit,penalty,proj_grad_norm,step\n");
    for r in trace {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iter, r.objective, r.misfit, r.penalty, r.proj_grad_norm, r.step
        )
        .unwrap();
    }
    s
}

pub fn estimator_to_csv(est: &EstimatorField, marked: &[usize]) -> String {
    let mut is_marked = vec![false; est.eta1_sq.len()];
    for &t in marked {
        is_marked[t] = true;
    }
    let mut s = String::from("element,eta1_sq,eta2_sq,eta3_sq,marked\n");
    for t in 0..est.eta1_sq.len() {
        writeln!(
            s,
            "{t},{},{},{},{}",
            est.eta1_sq[t],
            est.eta2_sq[t],
            est.eta3_sq[t],
            if is_marked[t] { 1 } else { 0 }
        )
        .unwrap();
    }
    s
}

/// Per-level summary; wall-clock timing is deliberately kept out of the CSV
/// (it would break bit-identical reruns) and lands in `timings.txt`.
pub fn levels_to_csv(result: &RunResult) -> String {
    let mut s = String::from(
        "level,dofs,elements,objective,misfit,penalty,eta1_sq,eta2_sq,eta3_sq,\
         max_marked_indicator,n_marked,optimizer_iterations\n",
    );
    for r in &result.records {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            r.dofs,
            r.elements,
            r.objective,
            r.misfit,
            r.penalty,
            r.eta1_sq,
            r.eta2_sq,
            r.eta3_sq,
            r.max_marked_indicator,
            r.n_marked,
            r.optimizer_iterations
        )
        .unwrap();
    }
    s
}

pub fn errors_to_csv(table: &ErrorTable) -> String {
    let mut s = String::from("level,dofs,l2_error,h1_error\n");
    for r in &table.rows {
        writeln!(s, "{},{},{},{}", r.level, r.dofs, r.l2_error, r.h1_error).unwrap();
    }
    s
}

/// Reads an `errors.csv` back as `(dofs, l2, h1)` rows.
pub fn read_errors_csv(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "level,dofs,l2_error,h1_error" {
                return Err(parse_err(path, format!("bad header {line:?}")));
            }
            continue;
        }
        let p: Vec<&str> = line.split(',').collect();
        if p.len() != 4 {
            return Err(parse_err(path, format!("bad row {line:?}")));
        }
        let bad = || parse_err(path, format!("bad row {line:?}"));
        rows.push((
            p[1].parse().map_err(|_| bad())?,
            p[2].parse().map_err(|_| bad())?,
            p[3].parse().map_err(|_| bad())?,
        ));
    }
    Ok(rows)
}

pub fn rates_to_csv(rates: &[(&str, &str, f64)]) -> String {
    let mut s = String::from("run,norm,rate\n");
    for (run, norm, rate) in rates {
        writeln!(s, "{run},{norm},{rate}").unwrap();
    }
    s
}

// ------------------------------------------------------------- directories

/// Writes a complete run directory: per-level meshes, minimizers, estimator
/// dumps and optimizer traces, plus `levels.csv`, `errors.csv` and
/// `timings.txt`.
pub fn write_run_dir(dir: &Path, result: &RunResult, errors: Option<&ErrorTable>) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, mesh) in result.meshes.iter().enumerate() {
        write_mesh(&dir.join(format!("mesh_{k:03}.txt")), mesh)?;
        fs::write(
            dir.join(format!("sigma_{k:03}.csv")),
            field_to_csv(&result.sigmas[k]),
        )?;
        fs::write(
            dir.join(format!("estimator_{k:03}.csv")),
            estimator_to_csv(&result.estimators[k], &result.marked[k]),
        )?;
        fs::write(
            dir.join(format!("trace_{k:03}.csv")),
            trace_to_csv(&result.traces[k]),
        )?;
    }
    fs::write(dir.join("levels.csv"), levels_to_csv(result))?;
    if let Some(table) = errors {
        fs::write(dir.join("errors.csv"), errors_to_csv(table))?;
    }
    let mut timings = String::new();
    for r in &result.records {
        writeln!(timings, "level {} wall_time_s {}", r.level, r.wall_time_s).unwrap();
    }
    fs::write(dir.join("timings.txt"), timings)?;
    Ok(())
}

/// Writes a data bundle: `exact.csv`, `noisy.csv` and `meta.toml`.
pub fn write_data_bundle(
    dir: &Path,
    config: &ExperimentConfig,
    data: &NoisyData,
    data_mesh: &Mesh,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("exact.csv"), measurements_to_csv(&data.exact))?;
    fs::write(dir.join("noisy.csv"), measurements_to_csv(&data.noisy))?;
    let layout_hash = electrode_layout_hash(data_mesh);
    let support = if config.penalty_omega_prime {
        "omega_prime (1/4,3/4)x(0,1/2)"
    } else {
        "whole"
    };
    let meta = format!(
        "example = {}\nepsilon = {}\nseed = {}\ndof = {}\nn_patterns = {}\n\
         noise_max_convention = \"per-pattern\"\npenalty_support = \"{}\"\n\
         electrode_layout_hash = \"{}\"\n",
        config.example,
        data.epsilon,
        data.seed,
        data_mesh.num_vertices(),
        data.exact.len(),
        support,
        layout_hash,
    );
    fs::write(dir.join("meta.toml"), meta)?;
    Ok(())
}

/// Reads the noisy measurements and the recorded example id of a bundle.
pub fn read_data_bundle(dir: &Path) -> Result<(Vec<ElectrodeVector>, u8)> {
    let noisy = read_measurements(&dir.join("noisy.csv"))?;
    let meta_path = dir.join("meta.toml");
    let meta = fs::read_to_string(&meta_path)?;
    let example = meta
        .lines()
        .find_map(|l| l.strip_prefix("example = "))
        .ok_or_else(|| parse_err(&meta_path, "missing example"))?
        .trim()
        .parse()
        .map_err(|_| parse_err(&meta_path, "bad example"))?;
    Ok((noisy, example))
}

/// SHA-256 over the electrode arcs of the boundary, a stable fingerprint of
/// the electrode layout (positions, lengths and labels).
pub fn electrode_layout_hash(mesh: &Mesh) -> String {
    let mut arcs: Vec<String> = mesh
        .boundary_faces
        .iter()
        .filter_map(|f| match f.label {
            BoundaryLabel::Electrode(l) => {
                let a = mesh.vertices[f.vertex_ids[0]].x;
                let b = mesh.vertices[f.vertex_ids[1]].x;
                Some(format!("e{l}:{},{}-{},{}", a[0], a[1], b[0], b[1]))
            }
            BoundaryLabel::Insulated => None,
        })
        .collect();
    arcs.sort();
    let mut hasher = Sha256::new();
    for a in arcs {
        hasher.update(a.as_bytes());
        hasher.update(b"\n");
    }
    hex(&hasher.finalize())
}

/// SHA-256 of every regular file in a directory, keyed by relative path.
pub fn dir_checksum(dir: &Path) -> Result<String> {
    let mut names: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name())
        .collect();
    names.sort();
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.to_string_lossy().as_bytes());
        hasher.update(b"\0");
        hasher.update(&fs::read(dir.join(&name))?);
        hasher.update(b"\0");
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
