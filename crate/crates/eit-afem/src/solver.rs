//! Forward and adjoint solves of the complete electrode model and the
//! synthetic measurement map.

use crate::fem::{CemSystem, ElectrodeVector, NodalField};
use crate::{EitError, Result};

/// One forward (or adjoint) solve: interior potential and electrode values.
#[derive(Debug, Clone)]
pub struct CemSolution {
    pub potential: NodalField,
    pub voltages: ElectrodeVector,
}

/// An ordered set of zero-mean current patterns driven simultaneously
/// through the same system.
#[derive(Debug, Clone)]
pub struct CurrentBattery {
    pub patterns: Vec<ElectrodeVector>,
}

impl CurrentBattery {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// Trigonometric battery `I_l^{(j)} = cos(2 pi j l / L)` for `j = 1..=j_max`
/// and electrodes `l = 1..=L`. Each pattern has zero mean for `j < L`.
pub fn trigonometric_battery(num_electrodes: usize, j_max: usize) -> Result<CurrentBattery> {
    if j_max == 0 || j_max >= num_electrodes {
        return Err(EitError::InvalidArgument(format!(
            "battery size {j_max} must lie in 1..{num_electrodes}"
        )));
    }
    let mut patterns = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let values: Vec<f64> = (1..=num_electrodes)
            .map(|l| (2.0 * std::f64::consts::PI * (j * l) as f64 / num_electrodes as f64).cos())
            .collect();
        patterns.push(ElectrodeVector::new(values)?);
    }
    Ok(CurrentBattery { patterns })
}

/// Solves the forward problem for one current pattern.
pub fn solve_forward(system: &CemSystem, current: &ElectrodeVector) -> Result<CemSolution> {
    let rhs = system.current_rhs(current)?;
    let (potential, voltages) = system.solve(&rhs)?;
    Ok(CemSolution {
        potential,
        voltages,
    })
}

/// Solves the adjoint problem driven by a voltage misfit `U - U^delta`.
/// The misfit is projected to zero mean (the data functional only sees the
/// zero-mean part). The adjoint operator equals the forward operator because
/// the coupled system is symmetric.
pub fn solve_adjoint(system: &CemSystem, misfit: &[f64]) -> Result<CemSolution> {
    if misfit.len() != system.num_electrodes {
        return Err(EitError::InvalidArgument(format!(
            "misfit has {} entries for {} electrodes",
            misfit.len(),
            system.num_electrodes
        )));
    }
    let centered = ElectrodeVector::centered(misfit.to_vec());
    let rhs = system.current_rhs(&centered)?;
    let (potential, voltages) = system.solve(&rhs)?;
    Ok(CemSolution {
        potential,
        voltages,
    })
}

/// Electrode voltages for every pattern of the battery, in battery order.
pub fn measure(system: &CemSystem, battery: &CurrentBattery) -> Result<Vec<ElectrodeVector>> {
    battery
        .patterns
        .iter()
        .map(|i| Ok(solve_forward(system, i)?.voltages))
        .collect()
}

/// Solves the whole battery, keeping the interior potentials.
pub fn solve_battery(system: &CemSystem, battery: &CurrentBattery) -> Result<Vec<CemSolution>> {
    battery.patterns.iter().map(|i| solve_forward(system, i)).collect()
}
