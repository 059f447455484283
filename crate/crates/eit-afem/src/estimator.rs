//! Residual a posteriori error estimator evaluated at the discrete
//! minimizer, and bulk (Dorfler) marking.
//!
//! Three elementwise indicators are tracked:
//!
//! - `eta1_sq`: residual of the state equation, summed over patterns:
//!   `h_T^2 |grad sigma . grad u|^2_T + sum_F h_F |J_F(u, U)|^2_F`,
//! - `eta2_sq`: the same for the adjoint pair `(p, P)`,
//! - `eta3_sq`: residual of the optimality condition, restricted to the
//!   penalty support: `h_T^4 |sum_j grad u_j . grad p_j|^2_T
//!   + sum_F h_F^3 |J_F(sigma)|^2_F`.
//!
//! All face integrals are exact for the piecewise-linear integrands
//! (closed-form `int_0^1 (a(1-s) + b s)^2 ds = (a^2 + ab + b^2)/3`).
//! Interior-face contributions are added in full to both adjacent elements.

use crate::fem::{Discretization, NodalField};
use crate::inversion::PenaltySupport;
use crate::solver::CemSolution;
use crate::{EitError, Result};

/// Per-element squared indicators and their totals.
#[derive(Debug, Clone)]
pub struct EstimatorField {
    pub eta1_sq: Vec<f64>,
    pub eta2_sq: Vec<f64>,
    pub eta3_sq: Vec<f64>,
}

impl EstimatorField {
    pub fn total_sq(&self, t: usize) -> f64 {
        self.eta1_sq[t] + self.eta2_sq[t] + self.eta3_sq[t]
    }

    pub fn totals(&self) -> [f64; 3] {
        [
            self.eta1_sq.iter().sum(),
            self.eta2_sq.iter().sum(),
            self.eta3_sq.iter().sum(),
        ]
    }

    pub fn grand_total_sq(&self) -> f64 {
        self.totals().iter().sum()
    }
}

/// `int_F g^2` for a linear function on a face with endpoint values a, b.
pub fn face_sq_norm(len: f64, a: f64, b: f64) -> f64 {
    len * (a * a + a * b + b * b) / 3.0
}

/// Flux-jump contribution of one solution pair on every face, accumulated
/// into `out[t] += h_F * |J_F|^2_F` for both adjacent elements.
fn accumulate_state_jumps(
    disc: &Discretization,
    sigma: &NodalField,
    sol: &CemSolution,
    impedances: &[f64],
    out: &mut [f64],
) {
    use crate::mesh::FaceKind;
    for face in &disc.faces.faces {
        let [va, vb] = face.vertex_ids;
        let len = disc.mesh.face_size(face.vertex_ids);
        let n = face.normal;
        let t0 = face.elements.0;
        let g0 = disc.field_gradient(t0, &sol.potential);
        let flux0 = g0[0] * n[0] + g0[1] * n[1];
        let (a, b) = match face.kind {
            FaceKind::Interior => {
                let t1 = face.elements.1.expect("interior face has two elements");
                let g1 = disc.field_gradient(t1, &sol.potential);
                let dflux = flux0 - (g1[0] * n[0] + g1[1] * n[1]);
                // jump [sigma grad u . n] = sigma(x) (grad u|_0 - grad u|_1) . n
                (sigma.values[va] * dflux, sigma.values[vb] * dflux)
            }
            FaceKind::Electrode(l) => {
                let z = impedances[l as usize - 1];
                let ul = sol.voltages.values[l as usize - 1];
                (
                    sigma.values[va] * flux0 + (sol.potential.values[va] - ul) / z,
                    sigma.values[vb] * flux0 + (sol.potential.values[vb] - ul) / z,
                )
            }
            FaceKind::Insulated => (sigma.values[va] * flux0, sigma.values[vb] * flux0),
        };
        let contrib = len * face_sq_norm(len, a, b);
        out[t0] += contrib;
        if let Some(t1) = face.elements.1 {
            out[t1] += contrib;
        }
    }
}

/// Computes all three estimator components for the discrete minimizer
/// `sigma` with its forward and adjoint battery solutions.
pub fn compute_estimator(
    disc: &Discretization,
    sigma: &NodalField,
    forward: &[CemSolution],
    adjoint: &[CemSolution],
    impedances: &[f64],
    alpha: f64,
    support: &PenaltySupport,
) -> Result<EstimatorField> {
    use crate::mesh::FaceKind;
    if forward.len() != adjoint.len() || forward.is_empty() {
        return Err(EitError::InvalidArgument(format!(
            "{} forward vs {} adjoint solutions",
            forward.len(),
            adjoint.len()
        )));
    }
    let ne = disc.mesh.elements.len();
    let h = disc.mesh.element_sizes();
    let mut eta1 = vec![0.0; ne];
    let mut eta2 = vec![0.0; ne];
    let mut eta3 = vec![0.0; ne];

    // element residuals: div(sigma grad u) = grad sigma . grad u on P1
    for t in 0..ne {
        let gs = disc.field_gradient(t, sigma);
        let h2 = h[t] * h[t];
        let mut cross = 0.0;
        for (fwd, adj) in forward.iter().zip(adjoint) {
            let gu = disc.field_gradient(t, &fwd.potential);
            let gp = disc.field_gradient(t, &adj.potential);
            let ru = gs[0] * gu[0] + gs[1] * gu[1];
            let rp = gs[0] * gp[0] + gs[1] * gp[1];
            eta1[t] += h2 * ru * ru * disc.areas[t];
            eta2[t] += h2 * rp * rp * disc.areas[t];
            cross += gu[0] * gp[0] + gu[1] * gp[1];
        }
        eta3[t] = h2 * h2 * cross * cross * disc.areas[t];
    }

    // state and adjoint flux jumps
    for (fwd, adj) in forward.iter().zip(adjoint) {
        accumulate_state_jumps(disc, sigma, fwd, impedances, &mut eta1);
        accumulate_state_jumps(disc, sigma, adj, impedances, &mut eta2);
    }

    // optimality-condition jumps of alpha grad sigma, once (not per pattern)
    for face in &disc.faces.faces {
        let len = disc.mesh.face_size(face.vertex_ids);
        let n = face.normal;
        let t0 = face.elements.0;
        let gs0 = disc.field_gradient(t0, sigma);
        let flux0 = alpha * (gs0[0] * n[0] + gs0[1] * n[1]);
        let jump = match face.kind {
            FaceKind::Interior => {
                let t1 = face.elements.1.expect("interior face has two elements");
                let gs1 = disc.field_gradient(t1, sigma);
                flux0 - alpha * (gs1[0] * n[0] + gs1[1] * n[1])
            }
            _ => flux0,
        };
        let contrib = len * len * len * jump * jump * len;
        eta3[t0] += contrib;
        if let Some(t1) = face.elements.1 {
            eta3[t1] += contrib;
        }
    }

    // restrict the optimality residual to the penalty support
    if let PenaltySupport::Rectangle { .. } = support {
        let mut inside = vec![false; ne];
        for t in support.elements(&disc.mesh) {
            inside[t] = true;
        }
        for t in 0..ne {
            if !inside[t] {
                eta3[t] = 0.0;
            }
        }
    }

    Ok(EstimatorField {
        eta1_sq: eta1,
        eta2_sq: eta2,
        eta3_sq: eta3,
    })
}

/// Bulk marking: the minimal set `M` (by count, elements sorted by
/// decreasing indicator, ties by index) with
/// `sum_{T in M} eta^2(T) >= theta^2 sum_T eta^2(T)`.
pub fn mark(estimator: &EstimatorField, theta: f64) -> Result<Vec<usize>> {
    if !(0.0 < theta && theta <= 1.0) {
        return Err(EitError::InvalidArgument(format!(
            "marking parameter theta = {theta} must lie in (0, 1]"
        )));
    }
    let ne = estimator.eta1_sq.len();
    if ne == 0 {
        return Err(EitError::InvalidArgument(
            "cannot mark on an empty mesh".into(),
        ));
    }
    let mut order: Vec<usize> = (0..ne).collect();
    order.sort_by(|&a, &b| {
        estimator
            .total_sq(b)
            .partial_cmp(&estimator.total_sq(a))
            .unwrap()
            .then(a.cmp(&b))
    });
    let total = estimator.grand_total_sq();
    let target = theta * theta * total;
    let mut marked = Vec::new();
    let mut cum = 0.0;
    for &t in &order {
        if cum >= target - 1e-12 * total || estimator.total_sq(t) == 0.0 {
            break;
        }
        marked.push(t);
        cum += estimator.total_sq(t);
    }
    Ok(marked)
}
