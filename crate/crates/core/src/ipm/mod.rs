//! Primal-dual interior-point method for `min f(x) s.t. c_E(x) = 0, c_I(x) <= 0`.
//!
//! Inequalities get slacks `c_I(x) + s = 0, s > 0` with a log barrier on `s`.
//! Newton steps come from the reduced KKT system factored by
//! [`LdlFactor`](crate::linalg::LdlFactor) with inertia correction, and steps
//! are globalized by an ℓ1-penalty merit line search.

mod fixed;
mod restoration;
mod solver;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::formulation::{ConstraintHandle, ConstraintKind};
use crate::nlp::{EvalError, Nlp};

pub use solver::solve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub kkt_tolerance: f64,
    pub barrier_initial: f64,
    pub barrier_shrink: f64,
    pub fraction_to_boundary: f64,
    pub max_iterations: usize,
    pub regularization_min: f64,
    pub regularization_max: f64,
    /// Inequalities are enforced as `c_I(x) <= constraint_relax`. A positive
    /// value keeps a strict interior when a bound and an equality pin the
    /// same variable.
    pub constraint_relax: f64,
    /// Tab-separated iteration log.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-8,
            barrier_initial: 0.1,
            barrier_shrink: 0.2,
            fraction_to_boundary: 0.995,
            max_iterations: 300,
            regularization_min: 1e-10,
            regularization_max: 1e4,
            constraint_relax: 0.0,
            log_path: None,
        }
    }
}

impl SolverOptions {
    /// First violated option invariant, if any.
    pub fn check(&self) -> Result<(), String> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.barrier_shrink) {
            return Err(format!("barrier_shrink must lie in (0,1), got {}", self.barrier_shrink));
        }
        if !open_unit(self.fraction_to_boundary) {
            return Err(format!("fraction_to_boundary must lie in (0,1), got {}", self.fraction_to_boundary));
        }
        for (name, v) in [
            ("kkt_tolerance", self.kkt_tolerance),
            ("barrier_initial", self.barrier_initial),
            ("regularization_min", self.regularization_min),
            ("regularization_max", self.regularization_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.regularization_min > self.regularization_max {
            return Err("regularization_min exceeds regularization_max".into());
        }
        if !(self.constraint_relax >= 0.0) {
            return Err("constraint_relax must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleDetected,
    NumericalFailure,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::InfeasibleDetected => "infeasible_detected",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPoint {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Max-norm of equality residuals and inequality violations.
    pub primal_infeasibility: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Factor the solver applied to the objective; multipliers are reported
    /// unscaled.
    #[serde(default = "unit_scale")]
    pub objective_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl SolutionPoint {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Multipliers of the Lagrangian `f + yᵀc_E + zᵀc_I`, `z >= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualRecord {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub eq_handles: Vec<ConstraintHandle>,
    pub ineq_handles: Vec<ConstraintHandle>,
    index: HashMap<ConstraintHandle, (bool, usize)>,
}

/// The storage-related multipliers of one (storage, period) slot, in the
/// units of the problem (per-unit).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StorageMultipliers {
    pub ch_lower: f64,
    pub ch_upper: f64,
    pub dc_lower: f64,
    pub dc_upper: f64,
    pub circle_dc: f64,
    pub circle_ch: f64,
    pub soc_lower: f64,
    pub soc_upper: f64,
    pub relax_cut: f64,
}

impl DualRecord {
    pub fn new(eq: Vec<f64>, ineq: Vec<f64>, eq_handles: Vec<ConstraintHandle>, ineq_handles: Vec<ConstraintHandle>) -> Self {
        let mut index = HashMap::with_capacity(eq_handles.len() + ineq_handles.len());
        for (i, h) in eq_handles.iter().enumerate() {
            index.insert(*h, (true, i));
        }
        for (i, h) in ineq_handles.iter().enumerate() {
            index.insert(*h, (false, i));
        }
        Self { eq, ineq, eq_handles, ineq_handles, index }
    }

    pub fn get(&self, handle: ConstraintHandle) -> Option<f64> {
        self.index.get(&handle).map(|&(is_eq, i)| if is_eq { self.eq[i] } else { self.ineq[i] })
    }

    fn value(&self, kind: ConstraintKind, entity: usize, t: usize) -> f64 {
        self.get(ConstraintHandle::new(kind, entity, t)).unwrap_or(0.0)
    }

    /// Multiplier of the active balance at bus position `bus`, period `t`.
    pub fn lmp(&self, bus: usize, t: usize) -> f64 {
        self.value(ConstraintKind::ActiveBalance, bus, t)
    }

    pub fn storage(&self, n: usize, t: usize) -> StorageMultipliers {
        use ConstraintKind::*;
        StorageMultipliers {
            ch_lower: self.value(ChLower, n, t),
            ch_upper: self.value(ChUpper, n, t),
            dc_lower: self.value(DcLower, n, t),
            dc_upper: self.value(DcUpper, n, t),
            circle_dc: self.value(CircleDc, n, t),
            circle_ch: self.value(CircleCh, n, t),
            soc_lower: self.value(SocLower, n, t),
            soc_upper: self.value(SocUpper, n, t),
            relax_cut: self.value(RelaxCut, n, t),
        }
    }

    /// Multiplier of the terminal SOC equality of storage `n` (0 if absent).
    pub fn soc_terminal(&self, n: usize) -> f64 {
        self.eq_handles
            .iter()
            .position(|h| h.kind == ConstraintKind::SocTerminal && h.entity == n)
            .map_or(0.0, |i| self.eq[i])
    }

    /// Every multiplier with its handle label.
    pub fn labelled(&self) -> impl Iterator<Item = (ConstraintHandle, f64)> + '_ {
        self.eq_handles
            .iter()
            .copied()
            .zip(self.eq.iter().copied())
            .chain(self.ineq_handles.iter().copied().zip(self.ineq.iter().copied()))
    }
}

/// Max-norm KKT residuals of a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `|∇f + J_Eᵀy + J_Iᵀz|_inf`
    pub stationarity: f64,
    /// `max(|c_E|_inf, max(c_I, 0))`
    pub feasibility: f64,
    /// `max_i |z_i c_I,i|`
    pub complementarity: f64,
    /// `max(-z, 0)`
    pub dual_infeasibility: f64,
}

pub fn kkt_residuals(nlp: &dyn Nlp, x: &[f64], y: &[f64], z: &[f64]) -> Result<KktResiduals, EvalError> {
    if y.len() != nlp.eq_count() {
        return Err(EvalError::Dimension { expected: nlp.eq_count(), found: y.len() });
    }
    if z.len() != nlp.ineq_count() {
        return Err(EvalError::Dimension { expected: nlp.ineq_count(), found: z.len() });
    }
    let (_, mut g) = nlp.objective(x)?;
    let c = nlp.constraints(x)?;
    c.jac_eq.tmul_add(y, &mut g);
    c.jac_ineq.tmul_add(z, &mut g);
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    Ok(KktResiduals {
        stationarity: inf(&g),
        feasibility: primal_infeasibility(&c.eq, &c.ineq),
        complementarity: c.ineq.iter().zip(z).fold(0.0f64, |m, (ci, zi)| m.max((ci * zi).abs())),
        dual_infeasibility: z.iter().fold(0.0f64, |m, zi| m.max(-zi)),
    })
}

/// The residuals in the scaling used by the termination test: the objective
/// scale of `solution`, with stationarity divided by `s_d` and
/// complementarity by `s_c` (both `max(1, mean |multiplier| / 100)`).
pub fn scaled_kkt_residuals(nlp: &dyn Nlp, solution: &SolutionPoint, duals: &DualRecord) -> Result<KktResiduals, EvalError> {
    let r = kkt_residuals(nlp, &solution.x, &duals.eq, &duals.ineq)?;
    let sf = solution.objective_scale;
    let sum = |v: &[f64]| v.iter().map(|a| (sf * a).abs()).sum::<f64>();
    let (me, mi) = (duals.eq.len(), duals.ineq.len());
    let mean = |total: f64, count: usize| if count == 0 { 0.0 } else { total / count as f64 };
    let sd = (mean(sum(&duals.eq) + sum(&duals.ineq), me + mi) / DUAL_SCALE_THRESHOLD).max(1.0);
    let sc = (mean(sum(&duals.ineq), mi) / DUAL_SCALE_THRESHOLD).max(1.0);
    Ok(KktResiduals {
        stationarity: sf * r.stationarity / sd,
        feasibility: r.feasibility,
        complementarity: sf * r.complementarity / sc,
        dual_infeasibility: sf * r.dual_infeasibility,
    })
}

/// Mean multiplier size above which the termination test scales its dual
/// residuals down.
pub(crate) const DUAL_SCALE_THRESHOLD: f64 = 100.0;

pub(crate) fn primal_infeasibility(eq: &[f64], ineq: &[f64]) -> f64 {
    let e = eq.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    ineq.iter().fold(e, |m, a| m.max(*a))
}
