//! Row assembly for the relaxed and exact multi-period ACOPF.

use std::collections::BTreeMap;

use super::flows::{BranchTerm, FlowEnd};
use super::handle::{ConstraintHandle, ConstraintKind};
use super::layout::{VarKind, VariableLayout};
use super::{soc_row_coefficients, Mode, ModeAssignment};
use crate::linalg::DenseMatrix;
use crate::network::{validate, NetworkCase, Violation};
use crate::nlp::{check_point, ConstraintEval, EvalError, Nlp, SingletonRow, SparseRows};

#[derive(Debug, Clone)]
enum RowExpr {
    /// `Σ a_k x_k + c`
    Linear { terms: Vec<(usize, f64)>, constant: f64 },
    /// `Σ x_k² + c`
    Squares { vars: Vec<usize>, constant: f64 },
    /// Nodal balance, oriented as `Σ end flows + shunt·V_j² + terms + c`.
    Balance { bus: usize, t: usize, ends: Vec<(usize, FlowEnd)>, shunt: f64, terms: Vec<(usize, f64)>, constant: f64 },
    /// `P_ij² + Q_ij² − S̄²` at the from end.
    Thermal { branch: usize, t: usize, limit_sq: f64 },
}

#[derive(Debug, Clone)]
struct Row {
    handle: ConstraintHandle,
    expr: RowExpr,
    cols: Vec<usize>,
}

/// Separable objective `Σ lin_k x_k + Σ q (x_k − center)² + constant`.
#[derive(Debug, Clone)]
struct Objective {
    linear: Vec<f64>,
    quadratic: Vec<(usize, f64, f64)>,
    constant: f64,
}

/// The relaxed (or mode-restricted exact) model as a smooth NLP.
#[derive(Debug, Clone)]
pub struct NlpProblem {
    case: NetworkCase,
    layout: VariableLayout,
    branches: Vec<BranchTerm>,
    objective: Objective,
    eq_rows: Vec<Row>,
    ineq_rows: Vec<Row>,
    modes: ModeAssignment,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormulationError {
    #[error("case is invalid: {0}")]
    InvalidCase(Violation),
    #[error("mode assignment has shape {found_storages}x{found_periods}, case needs {storages}x{periods}")]
    ModeShape { storages: usize, periods: usize, found_storages: usize, found_periods: usize },
}

struct Builder<'a> {
    case: &'a NetworkCase,
    layout: &'a VariableLayout,
    branches: &'a [BranchTerm],
    eq: Vec<Row>,
    ineq: Vec<Row>,
}

fn linear(terms: Vec<(usize, f64)>, constant: f64) -> RowExpr {
    RowExpr::Linear { terms, constant }
}

impl Builder<'_> {
    fn eq(&mut self, kind: ConstraintKind, entity: usize, t: usize, expr: RowExpr) {
        let row = self.row(kind, entity, t, expr);
        self.eq.push(row);
    }

    fn le(&mut self, kind: ConstraintKind, entity: usize, t: usize, expr: RowExpr) {
        let row = self.row(kind, entity, t, expr);
        self.ineq.push(row);
    }

    fn row(&self, kind: ConstraintKind, entity: usize, t: usize, expr: RowExpr) -> Row {
        let mut cols: Vec<usize> = match &expr {
            RowExpr::Linear { terms, .. } => terms.iter().map(|&(c, _)| c).collect(),
            RowExpr::Squares { vars, .. } => vars.clone(),
            RowExpr::Balance { bus, t, ends, terms, .. } => {
                let mut c = vec![self.layout.v(*bus, *t), self.layout.theta(*bus, *t)];
                for &(k, _) in ends {
                    let br = &self.branches[k];
                    for b in [br.from, br.to] {
                        c.push(self.layout.v(b, *t));
                        c.push(self.layout.theta(b, *t));
                    }
                }
                c.extend(terms.iter().map(|&(i, _)| i));
                c
            }
            RowExpr::Thermal { branch, t, .. } => {
                let br = &self.branches[*branch];
                vec![
                    self.layout.v(br.from, *t),
                    self.layout.v(br.to, *t),
                    self.layout.theta(br.from, *t),
                    self.layout.theta(br.to, *t),
                ]
            }
        };
        cols.sort_unstable();
        cols.dedup();
        Row { handle: ConstraintHandle::new(kind, entity, t), expr, cols }
    }

    /// `lo <= x <= hi` as two rows.
    fn bounds(&mut self, lower: ConstraintKind, upper: ConstraintKind, entity: usize, t: usize, x: usize, lo: f64, hi: f64) {
        self.le(lower, entity, t, linear(vec![(x, -1.0)], lo));
        self.le(upper, entity, t, linear(vec![(x, 1.0)], -hi));
    }
}

impl NlpProblem {
    /// Builds the relaxed model: everything except the complementarity rows.
    pub fn relaxed(case: &NetworkCase) -> Result<Self, FormulationError> {
        Self::exact(case, &ModeAssignment::free(case.storages.len(), case.periods()))
    }

    /// Builds the relaxed model plus one fixing equality per non-free mode.
    pub fn exact(case: &NetworkCase, modes: &ModeAssignment) -> Result<Self, FormulationError> {
        if let Some(v) = validate(case).into_iter().next() {
            return Err(FormulationError::InvalidCase(v));
        }
        let t_count = case.periods();
        if modes.storages() != case.storages.len() || modes.periods() != t_count {
            return Err(FormulationError::ModeShape {
                storages: case.storages.len(),
                periods: t_count,
                found_storages: modes.storages(),
                found_periods: modes.periods(),
            });
        }
        let layout = VariableLayout::new(case);
        let pos = case.bus_positions();
        let branches: Vec<BranchTerm> =
            case.branches.iter().map(|b| BranchTerm::new(b, pos[&b.from_bus], pos[&b.to_bus])).collect();
        let objective = build_objective(case, &layout);

        let mut b = Builder { case, layout: &layout, branches: &branches, eq: Vec::new(), ineq: Vec::new() };
        b.power_balance(&pos);
        b.angle_reference();
        b.storage_rows();
        b.generator_rows();
        b.renewable_rows();
        b.svc_rows();
        b.security_rows();

        for n in 0..case.storages.len() {
            for t in 0..t_count {
                match modes.get(n, t) {
                    Mode::Free => {}
                    Mode::ChargeOnly => {
                        b.eq(ConstraintKind::FixDischarge, n, t, linear(vec![(layout.p_dc(n, t), 1.0)], 0.0))
                    }
                    Mode::DischargeOnly => {
                        b.eq(ConstraintKind::FixCharge, n, t, linear(vec![(layout.p_ch(n, t), 1.0)], 0.0))
                    }
                }
            }
        }

        let (eq_rows, ineq_rows) = (b.eq, b.ineq);
        Ok(Self { case: case.clone(), layout, branches, objective, eq_rows, ineq_rows, modes: modes.clone() })
    }

    pub fn case(&self) -> &NetworkCase {
        &self.case
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn modes(&self) -> &ModeAssignment {
        &self.modes
    }

    pub fn eq_handles(&self) -> Vec<ConstraintHandle> {
        self.eq_rows.iter().map(|r| r.handle).collect()
    }

    pub fn ineq_handles(&self) -> Vec<ConstraintHandle> {
        self.ineq_rows.iter().map(|r| r.handle).collect()
    }

    /// Number of rows (equality and inequality) per kind.
    pub fn row_counts(&self) -> BTreeMap<ConstraintKind, usize> {
        let mut m = BTreeMap::new();
        for r in self.eq_rows.iter().chain(&self.ineq_rows) {
            *m.entry(r.handle.kind).or_insert(0) += 1;
        }
        m
    }

    /// Linear coefficients of a row, when the row is linear.
    pub fn linear_row(&self, handle: ConstraintHandle) -> Option<(Vec<(usize, f64)>, f64)> {
        self.eq_rows.iter().chain(&self.ineq_rows).find(|r| r.handle == handle).and_then(|r| match &r.expr {
            RowExpr::Linear { terms, constant } => Some((terms.clone(), *constant)),
            _ => None,
        })
    }

    /// Objective value and gradient.
    pub fn eval_objective(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        check_point(x, self.layout.dimension())?;
        let o = &self.objective;
        let mut value = o.constant;
        let mut grad = o.linear.clone();
        for (xi, ci) in x.iter().zip(&o.linear) {
            value += xi * ci;
        }
        for &(i, q, center) in &o.quadratic {
            let d = x[i] - center;
            value += q * d * d;
            grad[i] += 2.0 * q * d;
        }
        Ok((value, grad))
    }

    /// Residuals and Jacobians of `c_E(x) = 0` and `c_I(x) <= 0`.
    pub fn eval_constraints(&self, x: &[f64]) -> Result<ConstraintEval, EvalError> {
        check_point(x, self.layout.dimension())?;
        let n = self.layout.dimension();
        let mut jac_eq = SparseRows::new(n);
        let mut jac_ineq = SparseRows::new(n);
        let mut scratch = Vec::new();
        let mut eval_rows = |rows: &[Row], jac: &mut SparseRows| -> Vec<f64> {
            rows.iter()
                .map(|r| {
                    let v = self.row_value_grad(r, x, &mut scratch);
                    jac.push_row(r.cols.iter().copied().zip(scratch.iter().copied()));
                    v
                })
                .collect()
        };
        let eq = eval_rows(&self.eq_rows, &mut jac_eq);
        let ineq = eval_rows(&self.ineq_rows, &mut jac_ineq);
        Ok(ConstraintEval { eq, ineq, jac_eq, jac_ineq })
    }

    fn flow_at(&self, k: usize, end: FlowEnd, t: usize, x: &[f64]) -> (super::flows::FlowEval, [usize; 4]) {
        let br = &self.branches[k];
        let l = &self.layout;
        let idx = [l.v(br.from, t), l.v(br.to, t), l.theta(br.from, t), l.theta(br.to, t)];
        (br.eval(end, t, x[idx[0]], x[idx[1]], x[idx[2]], x[idx[3]]), idx)
    }

    /// Value of a row; `grad` receives the gradient aligned with `row.cols`.
    fn row_value_grad(&self, row: &Row, x: &[f64], grad: &mut Vec<f64>) -> f64 {
        grad.clear();
        grad.resize(row.cols.len(), 0.0);
        let slot = |c: usize| row.cols.binary_search(&c).expect("column in row pattern");
        match &row.expr {
            RowExpr::Linear { terms, constant } => {
                let mut v = *constant;
                for &(c, a) in terms {
                    v += a * x[c];
                    grad[slot(c)] += a;
                }
                v
            }
            RowExpr::Squares { vars, constant } => {
                let mut v = *constant;
                for &c in vars {
                    v += x[c] * x[c];
                    grad[slot(c)] += 2.0 * x[c];
                }
                v
            }
            RowExpr::Balance { bus, t, ends, shunt, terms, constant } => {
                let vj = self.layout.v(*bus, *t);
                let mut v = *constant + shunt * x[vj] * x[vj];
                grad[slot(vj)] += 2.0 * shunt * x[vj];
                for &(c, a) in terms {
                    v += a * x[c];
                    grad[slot(c)] += a;
                }
                for &(k, end) in ends {
                    let (f, idx) = self.flow_at(k, end, *t, x);
                    v += f.value;
                    for (i, &c) in idx.iter().enumerate() {
                        grad[slot(c)] += f.grad[i];
                    }
                }
                v
            }
            RowExpr::Thermal { branch, t, limit_sq } => {
                let (p, idx) = self.flow_at(*branch, FlowEnd::PFrom, *t, x);
                let (q, _) = self.flow_at(*branch, FlowEnd::QFrom, *t, x);
                for (i, &c) in idx.iter().enumerate() {
                    grad[slot(c)] += 2.0 * (p.value * p.grad[i] + q.value * q.grad[i]);
                }
                p.value * p.value + q.value * q.value - limit_sq
            }
        }
    }

    fn row_value(&self, row: &Row, x: &[f64]) -> f64 {
        match &row.expr {
            RowExpr::Linear { terms, constant } => constant + terms.iter().map(|&(c, a)| a * x[c]).sum::<f64>(),
            RowExpr::Squares { vars, constant } => constant + vars.iter().map(|&c| x[c] * x[c]).sum::<f64>(),
            RowExpr::Balance { bus, t, ends, shunt, terms, constant } => {
                let vj = x[self.layout.v(*bus, *t)];
                let mut v = constant + shunt * vj * vj + terms.iter().map(|&(c, a)| a * x[c]).sum::<f64>();
                for &(k, end) in ends {
                    v += self.flow_at(k, end, *t, x).0.value;
                }
                v
            }
            RowExpr::Thermal { branch, t, limit_sq } => {
                let p = self.flow_at(*branch, FlowEnd::PFrom, *t, x).0.value;
                let q = self.flow_at(*branch, FlowEnd::QFrom, *t, x).0.value;
                p * p + q * q - limit_sq
            }
        }
    }

    fn row_hessian(&self, row: &Row, x: &[f64], w: f64, out: &mut DenseMatrix) {
        if w == 0.0 {
            return;
        }
        match &row.expr {
            RowExpr::Linear { .. } => {}
            RowExpr::Squares { vars, .. } => {
                for &c in vars {
                    out.add(c, c, 2.0 * w);
                }
            }
            RowExpr::Balance { bus, t, ends, shunt, .. } => {
                let vj = self.layout.v(*bus, *t);
                out.add(vj, vj, 2.0 * shunt * w);
                for &(k, end) in ends {
                    let (f, idx) = self.flow_at(k, end, *t, x);
                    for a in 0..4 {
                        for b in 0..4 {
                            out.add(idx[a], idx[b], w * f.hess[a][b]);
                        }
                    }
                }
            }
            RowExpr::Thermal { branch, t, .. } => {
                let (p, idx) = self.flow_at(*branch, FlowEnd::PFrom, *t, x);
                let (q, _) = self.flow_at(*branch, FlowEnd::QFrom, *t, x);
                for a in 0..4 {
                    for b in 0..4 {
                        let h = p.grad[a] * p.grad[b] + p.value * p.hess[a][b] + q.grad[a] * q.grad[b] + q.value * q.hess[a][b];
                        out.add(idx[a], idx[b], 2.0 * w * h);
                    }
                }
            }
        }
    }

    /// Default interior-ish start: flat voltages, devices mid-box.
    pub fn flat_start(&self) -> Vec<f64> {
        let case = &self.case;
        let l = &self.layout;
        let dt = case.time_grid.interval;
        let mut x = vec![0.0; l.dimension()];
        for t in 0..case.periods() {
            for (k, b) in case.buses.iter().enumerate() {
                x[l.v(k, t)] = 1.0f64.clamp(b.voltage_min, b.voltage_max);
            }
            for (g, gen) in case.generators.iter().enumerate() {
                x[l.index(VarKind::GenP, g, t)] = 0.5 * (gen.p_min + gen.p_max);
                x[l.index(VarKind::GenQ, g, t)] = 0.5 * (gen.q_min + gen.q_max);
                x[l.index(VarKind::ReserveUp, g, t)] = 0.5 * gen.ramp_up * dt;
                x[l.index(VarKind::ReserveDown, g, t)] = 0.5 * gen.ramp_down * dt;
            }
            for (r, rg) in case.renewables.iter().enumerate() {
                x[l.index(VarKind::RgP, r, t)] = 0.5 * (rg.p_min[t] + rg.forecast[t]);
            }
            for (n, s) in case.storages.iter().enumerate() {
                x[l.p_ch(n, t)] = 0.5 * s.p_ch_max;
                x[l.p_dc(n, t)] = 0.5 * s.p_dc_max;
            }
            for (k, s) in case.svcs.iter().enumerate() {
                x[l.index(VarKind::SvcQ, k, t)] = 0.5 * (s.q_min + s.q_max);
            }
        }
        x
    }
}

fn build_objective(case: &NetworkCase, l: &VariableLayout) -> Objective {
    let mut linear = vec![0.0; l.dimension()];
    let mut quadratic = Vec::new();
    let mut constant = 0.0;
    for t in 0..case.periods() {
        for (n, s) in case.storages.iter().enumerate() {
            linear[l.p_ch(n, t)] += s.charge_fee[t] + s.loss_penalty * (1.0 - s.eta_ch);
            linear[l.p_dc(n, t)] += s.discharge_fee[t] + s.loss_penalty * (1.0 / s.eta_dc - 1.0);
        }
        for (g, gen) in case.generators.iter().enumerate() {
            let i = l.index(VarKind::GenP, g, t);
            linear[i] += gen.cost_linear;
            if gen.cost_quadratic != 0.0 {
                quadratic.push((i, gen.cost_quadratic, 0.0));
            }
            constant += gen.cost_constant;
        }
        for (r, rg) in case.renewables.iter().enumerate() {
            let i = l.index(VarKind::RgP, r, t);
            linear[i] += rg.cost_linear[t];
            // Periods with a zero forecast keep only the linear term.
            if rg.forecast[t] > 0.0 && rg.curtail_penalty != 0.0 {
                quadratic.push((i, rg.curtail_penalty / rg.forecast[t], rg.forecast[t]));
            }
        }
    }
    Objective { linear, quadratic, constant }
}

impl Builder<'_> {
    fn power_balance(&mut self, pos: &std::collections::HashMap<usize, usize>) {
        let case = self.case;
        let l = self.layout;
        for t in 0..case.periods() {
            for (j, bus) in case.buses.iter().enumerate() {
                let mut p_ends = Vec::new();
                let mut q_ends = Vec::new();
                for (k, br) in self.branches.iter().enumerate() {
                    if br.from == j {
                        p_ends.push((k, FlowEnd::PFrom));
                        q_ends.push((k, FlowEnd::QFrom));
                    }
                    if br.to == j {
                        p_ends.push((k, FlowEnd::PTo));
                        q_ends.push((k, FlowEnd::QTo));
                    }
                }
                // Injections enter with a minus sign: the row is the negated
                // balance so its multiplier is the price of serving load.
                let mut p_terms = Vec::new();
                let mut q_terms = Vec::new();
                for (g, gen) in case.generators.iter().enumerate().filter(|(_, d)| pos[&d.bus] == j) {
                    let _ = gen;
                    p_terms.push((l.index(VarKind::GenP, g, t), -1.0));
                    q_terms.push((l.index(VarKind::GenQ, g, t), -1.0));
                }
                for (r, _) in case.renewables.iter().enumerate().filter(|(_, d)| pos[&d.bus] == j) {
                    p_terms.push((l.index(VarKind::RgP, r, t), -1.0));
                    q_terms.push((l.index(VarKind::RgQ, r, t), -1.0));
                }
                for (n, _) in case.storages.iter().enumerate().filter(|(_, d)| pos[&d.bus] == j) {
                    p_terms.push((l.p_dc(n, t), -1.0));
                    p_terms.push((l.p_ch(n, t), 1.0));
                    q_terms.push((l.index(VarKind::StorageQ, n, t), -1.0));
                }
                for (k, _) in case.svcs.iter().enumerate().filter(|(_, d)| pos[&d.bus] == j) {
                    q_terms.push((l.index(VarKind::SvcQ, k, t), -1.0));
                }
                let tg = &case.time_grid;
                self.eq(
                    ConstraintKind::ActiveBalance,
                    j,
                    t,
                    RowExpr::Balance {
                        bus: j,
                        t,
                        ends: p_ends,
                        shunt: bus.shunt_conductance,
                        terms: p_terms,
                        constant: tg.load_p[j][t],
                    },
                );
                self.eq(
                    ConstraintKind::ReactiveBalance,
                    j,
                    t,
                    RowExpr::Balance {
                        bus: j,
                        t,
                        ends: q_ends,
                        shunt: -bus.shunt_susceptance,
                        terms: q_terms,
                        constant: tg.load_q[j][t],
                    },
                );
            }
        }
    }

    fn angle_reference(&mut self) {
        let r = self.case.reference_bus().expect("validated case has a reference bus");
        for t in 0..self.case.periods() {
            let th = self.layout.theta(r, t);
            self.eq(ConstraintKind::AngleRef, r, t, linear(vec![(th, 1.0)], 0.0));
        }
    }

    fn storage_rows(&mut self) {
        let case = self.case;
        let l = self.layout;
        let t_count = case.periods();
        let dt = case.time_grid.interval;
        for (n, s) in case.storages.iter().enumerate() {
            for t in 0..t_count {
                let (ch, dc, q) = (l.p_ch(n, t), l.p_dc(n, t), l.index(VarKind::StorageQ, n, t));
                self.bounds(ConstraintKind::ChLower, ConstraintKind::ChUpper, n, t, ch, 0.0, s.p_ch_max);
                self.bounds(ConstraintKind::DcLower, ConstraintKind::DcUpper, n, t, dc, 0.0, s.p_dc_max);
                let cap = s.apparent_capacity * s.apparent_capacity;
                self.le(ConstraintKind::CircleDc, n, t, RowExpr::Squares { vars: vec![dc, q], constant: -cap });
                self.le(ConstraintKind::CircleCh, n, t, RowExpr::Squares { vars: vec![ch, q], constant: -cap });

                let (terms, e0) = soc_terms(l, s, n, t, dt);
                self.le(ConstraintKind::SocLower, n, t, linear(terms.iter().map(|&(c, a)| (c, -a)).collect(), s.soc_min - e0));
                self.le(ConstraintKind::SocUpper, n, t, linear(terms.clone(), e0 - s.soc_max));
                if t + 1 == t_count {
                    self.eq(ConstraintKind::SocTerminal, n, t, linear(terms, e0 - s.soc_initial));
                }
                self.le(
                    ConstraintKind::RelaxCut,
                    n,
                    t,
                    linear(vec![(ch, 1.0 / s.p_ch_max), (dc, 1.0 / s.p_dc_max)], -1.0),
                );
            }
        }
    }

    fn generator_rows(&mut self) {
        let case = self.case;
        let l = self.layout;
        let dt = case.time_grid.interval;
        for t in 0..case.periods() {
            for (g, gen) in case.generators.iter().enumerate() {
                let p = l.index(VarKind::GenP, g, t);
                let q = l.index(VarKind::GenQ, g, t);
                let ru = l.index(VarKind::ReserveUp, g, t);
                let rd = l.index(VarKind::ReserveDown, g, t);
                self.bounds(ConstraintKind::GenPLower, ConstraintKind::GenPUpper, g, t, p, gen.p_min, gen.p_max);
                self.bounds(ConstraintKind::GenQLower, ConstraintKind::GenQUpper, g, t, q, gen.q_min, gen.q_max);
                // p_t - p_{t-1} within [-RD dt, RU dt]; t=0 uses the initial output.
                let (delta, prev): (Vec<(usize, f64)>, f64) = if t == 0 {
                    (vec![(p, 1.0)], gen.initial_output)
                } else {
                    (vec![(p, 1.0), (l.index(VarKind::GenP, g, t - 1), -1.0)], 0.0)
                };
                self.le(ConstraintKind::RampUp, g, t, linear(delta.clone(), -prev - gen.ramp_up * dt));
                self.le(
                    ConstraintKind::RampDown,
                    g,
                    t,
                    linear(delta.iter().map(|&(c, a)| (c, -a)).collect(), prev - gen.ramp_down * dt),
                );
                self.bounds(ConstraintKind::ReserveRuLower, ConstraintKind::ReserveRuUpper, g, t, ru, 0.0, gen.ramp_up * dt);
                self.le(ConstraintKind::ReserveRuHeadroom, g, t, linear(vec![(ru, 1.0), (p, 1.0)], -gen.p_max));
                self.bounds(ConstraintKind::ReserveRdLower, ConstraintKind::ReserveRdUpper, g, t, rd, 0.0, gen.ramp_down * dt);
                self.le(ConstraintKind::ReserveRdHeadroom, g, t, linear(vec![(rd, 1.0), (p, -1.0)], gen.p_min));
            }
            if !case.generators.is_empty() {
                let tg = &case.time_grid;
                let ng = case.generators.len();
                let ru: Vec<_> = (0..ng).map(|g| (l.index(VarKind::ReserveUp, g, t), -1.0)).collect();
                let rd: Vec<_> = (0..ng).map(|g| (l.index(VarKind::ReserveDown, g, t), -1.0)).collect();
                self.le(ConstraintKind::SystemReserveUp, 0, t, linear(ru, tg.reserve_up[t]));
                self.le(ConstraintKind::SystemReserveDown, 0, t, linear(rd, tg.reserve_down[t]));
            }
        }
    }

    fn renewable_rows(&mut self) {
        let case = self.case;
        let l = self.layout;
        for t in 0..case.periods() {
            for (r, rg) in case.renewables.iter().enumerate() {
                let p = l.index(VarKind::RgP, r, t);
                let q = l.index(VarKind::RgQ, r, t);
                self.bounds(ConstraintKind::RgPLower, ConstraintKind::RgPUpper, r, t, p, rg.p_min[t], rg.forecast[t]);
                let cap = rg.apparent_capacity * rg.apparent_capacity;
                self.le(ConstraintKind::RgCircle, r, t, RowExpr::Squares { vars: vec![p, q], constant: -cap });
            }
        }
    }

    fn svc_rows(&mut self) {
        let case = self.case;
        for t in 0..case.periods() {
            for (k, s) in case.svcs.iter().enumerate() {
                let q = self.layout.index(VarKind::SvcQ, k, t);
                self.bounds(ConstraintKind::SvcQLower, ConstraintKind::SvcQUpper, k, t, q, s.q_min, s.q_max);
            }
        }
    }

    fn security_rows(&mut self) {
        let case = self.case;
        for t in 0..case.periods() {
            for (j, bus) in case.buses.iter().enumerate() {
                let v = self.layout.v(j, t);
                self.bounds(ConstraintKind::VLower, ConstraintKind::VUpper, j, t, v, bus.voltage_min, bus.voltage_max);
            }
            for (k, br) in case.branches.iter().enumerate() {
                let limit_sq = br.thermal_limit * br.thermal_limit;
                self.le(ConstraintKind::Thermal, k, t, RowExpr::Thermal { branch: k, t, limit_sq });
            }
        }
    }
}

/// SOC at period `t` as `Σ coeff·x + e0` (closed-form recursion).
fn soc_terms(
    l: &VariableLayout,
    s: &crate::network::StorageUnit,
    n: usize,
    t: usize,
    dt: f64,
) -> (Vec<(usize, f64)>, f64) {
    let (decay0, coeffs) = soc_row_coefficients(s, dt, t);
    let mut terms = Vec::with_capacity(2 * (t + 1));
    for (tau, (ch, dc)) in coeffs.into_iter().enumerate() {
        terms.push((l.p_ch(n, tau), ch));
        terms.push((l.p_dc(n, tau), dc));
    }
    (terms, decay0 * s.soc_initial)
}

impl Nlp for NlpProblem {
    fn dimension(&self) -> usize {
        self.layout.dimension()
    }

    fn eq_count(&self) -> usize {
        self.eq_rows.len()
    }

    fn ineq_count(&self) -> usize {
        self.ineq_rows.len()
    }

    fn initial_point(&self) -> Vec<f64> {
        self.flat_start()
    }

    fn objective(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        self.eval_objective(x)
    }

    fn constraints(&self, x: &[f64]) -> Result<ConstraintEval, EvalError> {
        self.eval_constraints(x)
    }

    fn constraint_values(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        check_point(x, self.layout.dimension())?;
        Ok((
            self.eq_rows.iter().map(|r| self.row_value(r, x)).collect(),
            self.ineq_rows.iter().map(|r| self.row_value(r, x)).collect(),
        ))
    }

    fn hessian(&self, x: &[f64], obj_factor: f64, y: &[f64], z: &[f64], out: &mut DenseMatrix) -> Result<(), EvalError> {
        check_point(x, self.layout.dimension())?;
        for &(i, q, _) in &self.objective.quadratic {
            out.add(i, i, 2.0 * q * obj_factor);
        }
        for (r, &w) in self.eq_rows.iter().zip(y) {
            self.row_hessian(r, x, w, out);
        }
        for (r, &w) in self.ineq_rows.iter().zip(z) {
            self.row_hessian(r, x, w, out);
        }
        Ok(())
    }

    fn handles(&self) -> (Vec<ConstraintHandle>, Vec<ConstraintHandle>) {
        (self.eq_handles(), self.ineq_handles())
    }

    fn singleton_equalities(&self) -> Vec<SingletonRow> {
        self.eq_rows
            .iter()
            .enumerate()
            .filter_map(|(row, r)| match &r.expr {
                RowExpr::Linear { terms, constant } if terms.len() == 1 && terms[0].1 != 0.0 => {
                    Some(SingletonRow { row, var: terms[0].0, coeff: terms[0].1, constant: *constant })
                }
                _ => None,
            })
            .collect()
    }
}
