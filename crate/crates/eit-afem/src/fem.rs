//! Piecewise-linear finite element machinery: nodal fields, the coupled
//! complete-electrode-model system for a given conductivity, and nodal
//! transfer between nested meshes.
//!
//! The coupled unknown is `(u, w)` where `u` holds vertex values of the
//! potential and `w` are coordinates of the electrode voltages in a fixed
//! orthonormal basis of the zero-mean subspace of `R^L`, which keeps the
//! system symmetric positive definite without Lagrange multipliers.

use nalgebra::DMatrix;

use crate::mesh::{FaceKind, FacePartition, Mesh, ParentMap, classify_faces};
use crate::sparse::{LdlFactor, SymCsc, SymTripletBuilder, reverse_cuthill_mckee};
use crate::{EitError, Result};

/// Relative residual demanded from every linear solve.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Default lower admissibility bound; the box is `[lambda, 1/lambda]`.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// A continuous piecewise-linear scalar field given by one value per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(EitError::InvalidArgument(format!(
                "field has {} values for a mesh with {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            values: vec![c; mesh.num_vertices()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A real vector indexed by electrode with (approximately) zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeVector {
    pub values: Vec<f64>,
}

impl ElectrodeVector {
    /// Wraps values, enforcing the zero-mean invariant.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sum.abs() > 1e-12 * max.max(1.0) {
            return Err(EitError::InvalidArgument(format!(
                "electrode vector has nonzero mean: sum {sum}"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(l: usize) -> Self {
        Self {
            values: vec![0.0; l],
        }
    }

    /// Re-centers arbitrary values to zero mean.
    pub fn centered(mut values: Vec<f64>) -> Self {
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|v| *v -= mean);
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Orthonormal basis of the zero-mean subspace of `R^l`, obtained by
/// Gram-Schmidt on `{e_1 - e_l, ..., e_{l-1} - e_l}`. Columns are the basis
/// vectors; the matrix is `l x (l-1)`.
pub fn zero_mean_basis(l: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(l, l - 1);
    for j in 0..l - 1 {
        let mut col = nalgebra::DVector::zeros(l);
        col[j] = 1.0;
        col[l - 1] = -1.0;
        for i in 0..j {
            let q = b.column(i);
            let proj = q.dot(&col);
            col -= proj * q;
        }
        col /= col.norm();
        b.set_column(j, &col);
    }
    b
}

/// Per-mesh geometric context shared by assembly, estimation and norms:
/// face classification, constant basis gradients, areas and the fill-in
/// reducing ordering reused by every factorization on this mesh.
pub struct Discretization {
    pub mesh: Mesh,
    pub faces: FacePartition,
    /// `grads[t][i]` is the gradient of the hat function of local vertex `i`.
    pub grads: Vec<[[f64; 2]; 3]>,
    pub areas: Vec<f64>,
    perm: Vec<usize>,
    electrode_basis: DMatrix<f64>,
    num_electrodes: usize,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Self {
        let faces = classify_faces(&mesh);
        let mut grads = Vec::with_capacity(mesh.elements.len());
        let mut areas = Vec::with_capacity(mesh.elements.len());
        for t in 0..mesh.elements.len() {
            let el = &mesh.elements[t];
            let p: Vec<[f64; 2]> = el.vertex_ids.iter().map(|&v| mesh.vertices[v].x).collect();
            let a = mesh.element_area(t);
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                g[i] = [(b[1] - c[1]) / (2.0 * a), (c[0] - b[0]) / (2.0 * a)];
            }
            grads.push(g);
            areas.push(a);
        }
        let num_electrodes = faces
            .faces
            .iter()
            .filter_map(|f| match f.kind {
                FaceKind::Electrode(l) => Some(l as usize),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        // Nodal RCM ordering; electrode coordinates go last so their dense
        // coupling rows do not inflate fill-in among nodal columns.
        let nv = mesh.num_vertices();
        let mut adj = vec![Vec::new(); nv];
        for el in &mesh.elements {
            for e in 0..3 {
                let [a, b] = el.edge(e);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut perm = reverse_cuthill_mckee(&adj);
        perm.extend(nv..nv + num_electrodes.saturating_sub(1));
        let electrode_basis = zero_mean_basis(num_electrodes.max(2));
        Self {
            mesh,
            faces,
            grads,
            areas,
            perm,
            electrode_basis,
            num_electrodes,
        }
    }

    pub fn num_electrodes(&self) -> usize {
        self.num_electrodes
    }

    /// Gradient of a nodal field on element `t` (constant per element).
    pub fn field_gradient(&self, t: usize, field: &NodalField) -> [f64; 2] {
        let el = &self.mesh.elements[t];
        let mut g = [0.0, 0.0];
        for i in 0..3 {
            let v = field.values[el.vertex_ids[i]];
            g[0] += v * self.grads[t][i][0];
            g[1] += v * self.grads[t][i][1];
        }
        g
    }

    /// `int_supp grad(f) . grad(g)` over the given element subset.
    pub fn stiffness_inner_product(
        &self,
        f: &NodalField,
        g: &NodalField,
        elements: impl Iterator<Item = usize>,
    ) -> f64 {
        elements
            .map(|t| {
                let gf = self.field_gradient(t, f);
                let gg = self.field_gradient(t, g);
                self.areas[t] * (gf[0] * gg[0] + gf[1] * gg[1])
            })
            .sum()
    }
}

/// The assembled coupled CEM operator for one conductivity, with its sparse
/// factorization and the fixed zero-mean electrode basis.
pub struct CemSystem {
    pub matrix: SymCsc,
    pub impedances: Vec<f64>,
    pub n_vertices: usize,
    pub num_electrodes: usize,
    electrode_basis: DMatrix<f64>,
    factor: LdlFactor,
}

/// Checks `lambda <= sigma <= 1/lambda` vertexwise.
pub fn check_admissible(sigma: &NodalField, lambda: f64) -> Result<()> {
    let hi = 1.0 / lambda;
    let tol = 1e-12;
    for (i, &v) in sigma.values.iter().enumerate() {
        if !(v >= lambda - tol && v <= hi + tol) {
            return Err(EitError::InadmissibleConductivity {
                lambda,
                value: v,
                vertex: i,
            });
        }
    }
    Ok(())
}

/// Assembles the coupled CEM system for conductivity `sigma` and contact
/// impedances `z`. The quadratic form of the result equals
/// `(sigma grad u, grad v) + sum_l z_l^{-1} (u - U_l, v - V_l)_{L2(e_l)}`
/// with `sigma` the piecewise-linear interpolant; element stiffness uses the
/// vertex-average of `sigma` per element, exact for linear `sigma`, and the
/// electrode face integrals are exact for linear traces.
pub fn assemble_system(
    disc: &Discretization,
    sigma: &NodalField,
    impedances: &[f64],
    lambda: f64,
) -> Result<CemSystem> {
    check_admissible(sigma, lambda)?;
    if impedances.len() != disc.num_electrodes {
        return Err(EitError::InvalidArgument(format!(
            "{} impedances for {} electrodes",
            impedances.len(),
            disc.num_electrodes
        )));
    }
    if let Some((l, &z)) = impedances.iter().enumerate().find(|(_, &z)| z <= 0.0) {
        return Err(EitError::InvalidArgument(format!(
            "non-positive contact impedance z_{} = {z}",
            l + 1
        )));
    }
    let nv = disc.mesh.num_vertices();
    let lm1 = disc.num_electrodes - 1;
    let n = nv + lm1;
    let b = &disc.electrode_basis;

    let mut trip = SymTripletBuilder::new(n);
    // volume stiffness with elementwise-averaged sigma (exact for P1 sigma)
    for (t, el) in disc.mesh.elements.iter().enumerate() {
        let sbar = el
            .vertex_ids
            .iter()
            .map(|&v| sigma.values[v])
            .sum::<f64>()
            / 3.0;
        let coef = sbar * disc.areas[t];
        for i in 0..3 {
            for j in i..3 {
                let gi = disc.grads[t][i];
                let gj = disc.grads[t][j];
                trip.add(
                    el.vertex_ids[i],
                    el.vertex_ids[j],
                    coef * (gi[0] * gj[0] + gi[1] * gj[1]),
                );
            }
        }
    }
    // electrode coupling terms
    for face in &disc.faces.faces {
        let l = match face.kind {
            FaceKind::Electrode(l) => l as usize - 1,
            _ => continue,
        };
        let zinv = 1.0 / impedances[l];
        let [a, c] = face.vertex_ids;
        let len = disc.mesh.face_size(face.vertex_ids);
        // face mass matrix of linear traces: len/6 * [[2,1],[1,2]]
        trip.add(a, a, zinv * len / 3.0);
        trip.add(c, c, zinv * len / 3.0);
        trip.add(a, c, zinv * len / 6.0);
        for m in 0..lm1 {
            let bm = b[(l, m)];
            // -z^{-1} (phi_i, 1)_{e_l} against electrode coordinate m
            trip.add(a, nv + m, -zinv * 0.5 * len * bm);
            trip.add(c, nv + m, -zinv * 0.5 * len * bm);
            for m2 in m..lm1 {
                trip.add(nv + m, nv + m2, zinv * len * bm * b[(l, m2)]);
            }
        }
    }
    let matrix = trip.build();
    let factor = LdlFactor::new(&matrix, disc.perm.clone())?;
    Ok(CemSystem {
        matrix,
        impedances: impedances.to_vec(),
        n_vertices: nv,
        num_electrodes: disc.num_electrodes,
        electrode_basis: b.clone(),
        factor,
    })
}

impl CemSystem {
    /// Right-hand side in coupled coordinates pairing to `<I, V>` for every
    /// discrete test pair; the nodal block is zero.
    pub fn current_rhs(&self, current: &ElectrodeVector) -> Result<Vec<f64>> {
        if current.len() != self.num_electrodes {
            return Err(EitError::InvalidArgument(format!(
                "current has {} entries for {} electrodes",
                current.len(),
                self.num_electrodes
            )));
        }
        let sum: f64 = current.values.iter().sum();
        let max = current.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sum.abs() > 1e-12 * max.max(1.0) {
            return Err(EitError::InvalidArgument(format!(
                "current has nonzero mean: sum {sum}"
            )));
        }
        let mut rhs = vec![0.0; self.n_vertices + self.num_electrodes - 1];
        for m in 0..self.num_electrodes - 1 {
            let mut s = 0.0;
            for l in 0..self.num_electrodes {
                s += self.electrode_basis[(l, m)] * current.values[l];
            }
            rhs[self.n_vertices + m] = s;
        }
        Ok(rhs)
    }

    /// Solves the coupled system, verifying the relative-residual contract.
    pub fn solve(&self, rhs: &[f64]) -> Result<(NodalField, ElectrodeVector)> {
        let x = self.factor.solve(rhs);
        let mut ax = vec![0.0; rhs.len()];
        self.matrix.matvec(&x, &mut ax);
        let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res = rhs
            .iter()
            .zip(&ax)
            .map(|(b, a)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        if rhs_norm > 0.0 && res > SOLVER_TOLERANCE * rhs_norm {
            return Err(EitError::LinearSolve(format!(
                "relative residual {} exceeds {}",
                res / rhs_norm,
                SOLVER_TOLERANCE
            )));
        }
        let potential = NodalField {
            values: x[..self.n_vertices].to_vec(),
        };
        let mut voltages = vec![0.0; self.num_electrodes];
        for l in 0..self.num_electrodes {
            for m in 0..self.num_electrodes - 1 {
                voltages[l] += self.electrode_basis[(l, m)] * x[self.n_vertices + m];
            }
        }
        Ok((potential, ElectrodeVector { values: voltages }))
    }

    /// Quadratic form `a(sigma, (u,U), (v,V))` of the assembled operator on
    /// two discrete pairs, via the coupled matrix.
    pub fn quadratic_form(
        &self,
        u: &NodalField,
        cap_u: &ElectrodeVector,
        v: &NodalField,
        cap_v: &ElectrodeVector,
    ) -> f64 {
        let x = self.coupled_coords(u, cap_u);
        let y = self.coupled_coords(v, cap_v);
        self.matrix.bilinear(&x, &y)
    }

    /// Coupled coordinates of a pair `(v, V)`; `V` must be zero-mean so it
    /// lies in the span of the electrode basis.
    pub fn coupled_coords(&self, v: &NodalField, cap_v: &ElectrodeVector) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_vertices + self.num_electrodes - 1);
        x.extend_from_slice(&v.values);
        for m in 0..self.num_electrodes - 1 {
            let mut s = 0.0;
            for l in 0..self.num_electrodes {
                s += self.electrode_basis[(l, m)] * cap_v.values[l];
            }
            x.push(s);
        }
        x
    }
}

/// Transfers a nodal field to a refined mesh: surviving vertices keep their
/// values, new vertices take the average of their parent edge's endpoints.
/// As a function the result is pointwise identical to the input.
pub fn prolong(field: &NodalField, parent_map: &ParentMap) -> Result<NodalField> {
    if field.len() != parent_map.n_parent_vertices {
        return Err(EitError::InvalidArgument(format!(
            "field has {} values but parent mesh has {} vertices",
            field.len(),
            parent_map.n_parent_vertices
        )));
    }
    let mut values = field.values.clone();
    values.reserve(parent_map.new_vertex_parents.len());
    for &[a, b] in &parent_map.new_vertex_parents {
        // endpoints always precede the midpoint in creation order
        let v = 0.5 * (values[a] + values[b]);
        values.push(v);
    }
    Ok(NodalField { values })
}
