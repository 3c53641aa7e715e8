//! Branch-and-bound over per-(storage, period) charge/discharge modes.
//!
//! Every node is the relaxed NLP plus mode-fixing equalities. Children are
//! solved as soon as their parent branches, so the open pool holds solved
//! nodes keyed by their objective.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::formulation::{build_exact, FormulationError, Mode, ModeAssignment, VariableLayout};
use crate::ipm::{solve, DualRecord, SolutionPoint, SolveStatus, SolverOptions};
use crate::network::NetworkCase;

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    pub solver: SolverOptions,
    /// Relative optimality gap at which the search stops.
    pub gap_tolerance: f64,
    /// Largest `p^ch · p^dc` (per-unit²) an incumbent may have.
    pub scd_tolerance: f64,
    /// Relative slack when comparing a child's objective to its parent's.
    pub bound_slack: f64,
    pub max_nodes: usize,
    /// Solve sibling nodes one after the other instead of in parallel.
    pub serial: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            gap_tolerance: 1e-6,
            scd_tolerance: 1e-8,
            bound_slack: 1e-6,
            max_nodes: 10_000,
            serial: false,
        }
    }
}

/// Per-slot `p^ch · p^dc` and its maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScdResidual {
    /// `(storage, period, product)`
    pub slots: Vec<(usize, usize, f64)>,
    pub max: f64,
}

impl ScdResidual {
    /// Slot with the largest product.
    pub fn worst(&self) -> Option<(usize, usize, f64)> {
        self.slots.iter().copied().max_by(|a, b| a.2.total_cmp(&b.2))
    }
}

pub fn scd_residual(x: &[f64], case: &NetworkCase) -> ScdResidual {
    let l = VariableLayout::new(case);
    let slots: Vec<_> = (0..case.storages.len())
        .flat_map(|n| (0..case.periods()).map(move |t| (n, t)))
        .map(|(n, t)| (n, t, x[l.p_ch(n, t)] * x[l.p_dc(n, t)]))
        .collect();
    let max = slots.iter().map(|s| s.2).fold(0.0, f64::max);
    ScdResidual { slots, max }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BnbStatus {
    /// Search closed within the gap tolerance.
    Optimal,
    NodeLimit,
    /// No node produced a complementarity-feasible KKT point.
    NoIncumbent,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    pub status: BnbStatus,
    pub incumbent: Option<(SolutionPoint, DualRecord)>,
    pub incumbent_modes: Option<ModeAssignment>,
    pub objective: Option<f64>,
    /// Best bound among nodes still open when the search ended.
    pub best_bound: Option<f64>,
    pub gap: f64,
    pub nodes_explored: usize,
    /// Nodes whose NLP did not converge; they are pruned.
    pub failed_nodes: usize,
    /// Nodes the solver proved locally infeasible; they are pruned.
    pub infeasible_nodes: usize,
    /// Children whose objective fell below the parent's by more than the slack.
    pub bound_warnings: usize,
    /// Objective of the root node (the relaxed model).
    pub root_objective: Option<f64>,
}

struct Node {
    modes: ModeAssignment,
    depth: usize,
    seq: usize,
    solution: SolutionPoint,
    duals: DualRecord,
}

impl Node {
    fn bound(&self) -> f64 {
        self.solution.objective
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound()
            .total_cmp(&self.bound())
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

fn solve_node(
    case: &NetworkCase,
    modes: &ModeAssignment,
    warm: Option<&[f64]>,
    options: &BnbOptions,
) -> Result<(SolutionPoint, DualRecord), FormulationError> {
    let problem = build_exact(case, modes)?;
    Ok(solve(&problem, &options.solver, warm))
}

/// Solves the model with charge/discharge complementarity enforced.
pub fn solve_mip(case: &NetworkCase, options: &BnbOptions) -> Result<BnbResult, FormulationError> {
    let layout = VariableLayout::new(case);
    let root_modes = ModeAssignment::free(case.storages.len(), case.periods());
    let (root_sol, root_duals) = solve_node(case, &root_modes, None, options)?;
    let mut result = BnbResult {
        status: BnbStatus::NoIncumbent,
        incumbent: None,
        incumbent_modes: None,
        objective: None,
        best_bound: None,
        gap: f64::INFINITY,
        nodes_explored: 1,
        failed_nodes: 0,
        infeasible_nodes: 0,
        bound_warnings: 0,
        root_objective: root_sol.is_optimal().then_some(root_sol.objective),
    };
    let mut open = BinaryHeap::new();
    let mut seq = 0;
    match root_sol.status {
        SolveStatus::Optimal => {
            open.push(Node { modes: root_modes, depth: 0, seq, solution: root_sol, duals: root_duals })
        }
        SolveStatus::InfeasibleDetected => result.infeasible_nodes += 1,
        _ => result.failed_nodes += 1,
    }

    let gap_abs = |inc: f64| options.gap_tolerance * inc.abs().max(1.0);
    while let Some(node) = open.pop() {
        if let Some(inc) = result.objective {
            if node.bound() >= inc - gap_abs(inc) {
                // Best-first: every other open node is at least as bad.
                open.push(node);
                break;
            }
        }
        let scd = scd_residual(&node.solution.x, case);
        let worst = scd.worst().filter(|w| w.2 > options.scd_tolerance);
        let Some((n, t, _)) = worst else {
            if result.objective.is_none_or(|inc| node.bound() < inc) {
                result.objective = Some(node.bound());
                result.incumbent_modes = Some(node.modes.clone());
                result.incumbent = Some((node.solution, node.duals));
            }
            continue;
        };
        if result.nodes_explored + 2 > options.max_nodes {
            open.push(node);
            result.status = BnbStatus::NodeLimit;
            break;
        }

        let child = |mode: Mode| {
            let modes = node.modes.with(n, t, mode);
            let mut warm = node.solution.x.clone();
            match mode {
                Mode::ChargeOnly => warm[layout.p_dc(n, t)] = 0.0,
                Mode::DischargeOnly => warm[layout.p_ch(n, t)] = 0.0,
                Mode::Free => {}
            }
            solve_node(case, &modes, Some(&warm), options).map(|r| (modes, r))
        };
        let (a, b) = if options.serial {
            (child(Mode::ChargeOnly), child(Mode::DischargeOnly))
        } else {
            rayon::join(|| child(Mode::ChargeOnly), || child(Mode::DischargeOnly))
        };
        result.nodes_explored += 2;
        for (modes, (sol, duals)) in [a?, b?] {
            match sol.status {
                SolveStatus::Optimal => {}
                SolveStatus::InfeasibleDetected => {
                    result.infeasible_nodes += 1;
                    continue;
                }
                _ => {
                    result.failed_nodes += 1;
                    log::warn!("node at depth {} failed: {}", node.depth + 1, sol.status.name());
                    continue;
                }
            }
            let slack = options.bound_slack * node.bound().abs().max(1.0);
            if sol.objective < node.bound() - slack {
                result.bound_warnings += 1;
                log::warn!(
                    "child objective {} below parent {} at depth {}",
                    sol.objective,
                    node.bound(),
                    node.depth + 1
                );
            }
            seq += 1;
            open.push(Node { modes, depth: node.depth + 1, seq, solution: sol, duals });
        }
    }

    result.best_bound = open.peek().map(Node::bound);
    if let Some(inc) = result.objective {
        result.gap = match result.best_bound {
            Some(b) => ((inc - b) / inc.abs().max(1.0)).max(0.0),
            None => 0.0,
        };
        if result.status != BnbStatus::NodeLimit {
            result.status = BnbStatus::Optimal;
        }
    } else if result.status != BnbStatus::NodeLimit {
        result.status = BnbStatus::NoIncumbent;
    }
    Ok(result)
}
