//! The multi-period ACOPF with storage as a smooth NLP.
//!
//! Variables are laid out by [`VariableLayout`]; every constraint row carries a
//! [`ConstraintHandle`]. The state of charge is not a variable: it is replaced
//! by its closed form in the charge/discharge powers.

mod flows;
mod handle;
mod layout;
mod problem;

pub use flows::{BranchTerm, FlowEnd, FlowEval};
pub use handle::{ConstraintHandle, ConstraintKind};
pub use layout::{VarId, VarKind, VariableLayout};
pub use problem::{FormulationError, NlpProblem};

use serde::{Deserialize, Serialize};

use crate::network::{NetworkCase, StorageUnit};

/// Operating mode of one storage unit in one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Free,
    /// Discharge forced to zero.
    ChargeOnly,
    /// Charge forced to zero.
    DischargeOnly,
}

/// `modes[n][t]` for every storage unit and period.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeAssignment {
    modes: Vec<Vec<Mode>>,
    periods: usize,
}

impl ModeAssignment {
    pub fn free(storages: usize, periods: usize) -> Self {
        Self { modes: vec![vec![Mode::Free; periods]; storages], periods }
    }

    pub fn storages(&self) -> usize {
        self.modes.len()
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn get(&self, n: usize, t: usize) -> Mode {
        self.modes[n][t]
    }

    pub fn set(&mut self, n: usize, t: usize, mode: Mode) {
        self.modes[n][t] = mode;
    }

    pub fn with(&self, n: usize, t: usize, mode: Mode) -> Self {
        let mut m = self.clone();
        m.set(n, t, mode);
        m
    }

    /// Number of slots that are not free.
    pub fn fixed_count(&self) -> usize {
        self.modes.iter().flatten().filter(|m| **m != Mode::Free).count()
    }
}

/// Relaxed model: complementarity between charging and discharging dropped.
pub fn build_relaxed(case: &NetworkCase) -> Result<NlpProblem, FormulationError> {
    NlpProblem::relaxed(case)
}

/// Relaxed model with the given modes enforced by equality rows.
pub fn build_exact(case: &NetworkCase, modes: &ModeAssignment) -> Result<NlpProblem, FormulationError> {
    NlpProblem::exact(case, modes)
}

/// Coefficients of the SOC at 0-based period `t`:
/// `E_t = decay·E_0 + Σ_τ (ch_τ p^ch_τ + dc_τ p^dc_τ)` for `τ = 0..=t`.
pub fn soc_row_coefficients(s: &StorageUnit, dt: f64, t: usize) -> (f64, Vec<(f64, f64)>) {
    let keep = 1.0 - s.self_discharge;
    let decay0 = keep.powi(t as i32 + 1);
    let coeffs = (0..=t)
        .map(|tau| {
            let d = keep.powi((t - tau) as i32);
            (d * s.eta_ch * dt, -d * dt / s.eta_dc)
        })
        .collect();
    (decay0, coeffs)
}

/// SOC trajectory `E_1..E_T` of storage `n` for the given power schedules.
pub fn soc_trajectory(case: &NetworkCase, n: usize, p_ch: &[f64], p_dc: &[f64]) -> Vec<f64> {
    let s = &case.storages[n];
    let dt = case.time_grid.interval;
    let keep = 1.0 - s.self_discharge;
    let mut e = s.soc_initial;
    p_ch.iter()
        .zip(p_dc)
        .map(|(c, d)| {
            e = keep * e + (s.eta_ch * c - d / s.eta_dc) * dt;
            e
        })
        .collect()
}
