//! On-disk forms of a relaxed solve: the solution document and the duals CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::formulation::{build_relaxed, FormulationError, VariableLayout};
use crate::ipm::{DualRecord, SolutionPoint, SolveStatus};
use crate::network::NetworkCase;
use crate::nlp::Nlp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// Primal point, status and every multiplier of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub case: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub objective_scale: f64,
    pub variables: Vec<NamedValue>,
    pub eq_duals: Vec<f64>,
    pub ineq_duals: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("solution has {found} {what}, case needs {expected}")]
    Shape { what: &'static str, expected: usize, found: usize },
}

impl SolutionDocument {
    pub fn new(case: &NetworkCase, solution: &SolutionPoint, duals: &DualRecord) -> Self {
        let layout = VariableLayout::new(case);
        Self {
            case: case.name.clone(),
            status: solution.status,
            objective: solution.objective,
            iterations: solution.iterations,
            primal_infeasibility: solution.primal_infeasibility,
            objective_scale: solution.objective_scale,
            variables: solution
                .x
                .iter()
                .enumerate()
                .map(|(i, &value)| NamedValue { name: layout.name(i), value })
                .collect(),
            eq_duals: duals.eq.clone(),
            ineq_duals: duals.ineq.clone(),
        }
    }

    /// Rebuilds the solution and labelled duals against the relaxed model of
    /// `case`.
    pub fn restore(&self, case: &NetworkCase) -> Result<(SolutionPoint, DualRecord), DocumentError> {
        let problem = build_relaxed(case)?;
        let shape = |what, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(DocumentError::Shape { what, expected, found })
            }
        };
        shape("variables", problem.dimension(), self.variables.len())?;
        shape("equality duals", problem.eq_count(), self.eq_duals.len())?;
        shape("inequality duals", problem.ineq_count(), self.ineq_duals.len())?;
        let (eq_handles, ineq_handles) = problem.handles();
        let solution = SolutionPoint {
            x: self.variables.iter().map(|v| v.value).collect(),
            objective: self.objective,
            primal_infeasibility: self.primal_infeasibility,
            status: self.status,
            iterations: self.iterations,
            objective_scale: self.objective_scale,
        };
        let duals = DualRecord::new(self.eq_duals.clone(), self.ineq_duals.clone(), eq_handles, ineq_handles);
        Ok((solution, duals))
    }
}

/// One row per multiplier: `constraint,kind,entity,t,value` with `t` 1-based.
pub fn write_duals_csv<W: Write>(w: W, duals: &DualRecord) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["constraint", "kind", "entity", "t", "value"])?;
    for (h, v) in duals.labelled() {
        out.write_record([
            h.to_string(),
            h.kind.name().to_string(),
            h.entity.to_string(),
            (h.period + 1).to_string(),
            format!("{v:.12e}"),
        ])?;
    }
    out.flush()?;
    Ok(())
}
