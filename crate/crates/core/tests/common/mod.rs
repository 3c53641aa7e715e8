#![allow(dead_code)]

use rand::Rng;
use storage_opf::formulation::{build_exact, Mode, ModeAssignment, VarKind, VariableLayout};
use storage_opf::ipm::{solve, SolverOptions};
use storage_opf::linalg::DenseMatrix;
use storage_opf::network::{parse_case, NetworkCase};
use storage_opf::nlp::{ConstraintEval, EvalError, Nlp, SparseRows};

/// Charge/discharge fee pairs in $/MWh shaped like the six fee scenarios.
pub const FEE_SCENARIOS: [(f64, f64); 6] = [(5.0, 15.0), (0.0, 0.0), (-10.0, 15.0), (10.0, 15.0), (0.0, 15.0), (-15.0, 20.0)];

/// `(charge fee, discharge fee, renewable cost)` in $/MWh for the
/// negative-price sweep.
pub const NEGATIVE_PRICE_SCENARIOS: [(f64, f64, f64); 4] =
    [(-8.0, 15.0, -10.0), (-5.0, 15.0, -20.0), (-3.0, 15.0, -30.0), (15.0, 15.0, -100.0)];

/// One bus with surplus renewable output at a negative price and a lossy
/// storage unit, so the relaxation prefers to charge and discharge at once.
pub fn energy_burning_case(periods: usize) -> NetworkCase {
    let forecast = [80.0, 90.0, 60.0, 85.0, 75.0, 95.0];
    let load = [70.0, 60.0, 75.0, 65.0, 72.0, 58.0];
    let take = |v: &[f64]| format!("{:?}", &v[..periods]);
    parse_case(&format!(
        r#"{{
        "name": "burn",
        "base_mva": 100,
        "time": {{"T": {periods}, "dt_hours": 1}},
        "buses": [{{"id": 1, "voltage_min": 0.9, "voltage_max": 1.1, "is_reference": true}}],
        "renewables": [{{"bus": 1, "forecast": {f}, "cost_linear": -50, "apparent_capacity": 200}}],
        "storages": [{{"bus": 1, "eta_ch": 0.9, "eta_dc": 0.9, "soc_initial": 20, "soc_min": 0,
            "soc_max": 40, "p_ch_max": 20, "p_dc_max": 20, "apparent_capacity": 30}}],
        "svcs": [{{"bus": 1, "q_min": -50, "q_max": 50}}],
        "loads": {{"1": {{"p_mw": {l}}}}}
    }}"#,
        f = take(&forecast),
        l = take(&load),
    ))
    .expect("fixture parses")
}

/// Smallest objective over every assignment of charge-only or
/// discharge-only to each (storage, period) slot, solved independently.
pub fn enumerate_pure_modes(case: &NetworkCase, opts: &SolverOptions) -> Option<f64> {
    let (ns, nt) = (case.storages.len(), case.periods());
    let slots = ns * nt;
    assert!(slots <= 16, "enumeration is for tiny cases");
    (0..1u32 << slots)
        .filter_map(|mask| {
            let mut modes = ModeAssignment::free(ns, nt);
            for k in 0..slots {
                let mode = if mask >> k & 1 == 1 { Mode::DischargeOnly } else { Mode::ChargeOnly };
                modes.set(k / nt, k % nt, mode);
            }
            let problem = build_exact(case, &modes).ok()?;
            let (sol, _) = solve(&problem, opts, None);
            sol.is_optimal().then_some(sol.objective)
        })
        .min_by(f64::total_cmp)
}

/// A point strictly inside the natural box of every variable.
pub fn random_interior_point(case: &NetworkCase, rng: &mut impl Rng) -> Vec<f64> {
    let layout = VariableLayout::new(case);
    let mut inside = |lo: f64, hi: f64| {
        let w = hi - lo;
        if w <= 0.0 {
            lo
        } else {
            rng.gen_range(lo + 0.05 * w..hi - 0.05 * w)
        }
    };
    (0..layout.dimension())
        .map(|i| {
            let v = layout.locate(i).expect("index in range");
            let (e, t) = (v.entity, v.period);
            match v.kind {
                VarKind::Voltage => inside(case.buses[e].voltage_min, case.buses[e].voltage_max),
                VarKind::Angle => inside(-0.3, 0.3),
                VarKind::GenP => inside(case.generators[e].p_min, case.generators[e].p_max),
                VarKind::GenQ => inside(case.generators[e].q_min, case.generators[e].q_max),
                VarKind::ReserveUp | VarKind::ReserveDown => inside(0.0, 0.1),
                VarKind::RgP => inside(0.0, case.renewables[e].forecast[t]),
                VarKind::RgQ => inside(-0.2, 0.2),
                VarKind::Charge => inside(0.0, case.storages[e].p_ch_max),
                VarKind::Discharge => inside(0.0, case.storages[e].p_dc_max),
                VarKind::StorageQ => inside(-0.1, 0.1),
                VarKind::SvcQ => inside(case.svcs[e].q_min, case.svcs[e].q_max),
            }
        })
        .collect()
}

/// `min Σ q_i x_i² + l·x` with affine rows `a·x + b`.
pub struct QuadraticToy {
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub start: Vec<f64>,
}

impl QuadraticToy {
    /// `min x² s.t. 1 - x <= 0`.
    pub fn square_above_one() -> Self {
        Self { q: vec![1.0], l: vec![0.0], eq: vec![], ineq: vec![(vec![-1.0], 1.0)], start: vec![0.0] }
    }

    /// `min -x s.t. x - 3 <= 0, -x <= 0`.
    pub fn linear_in_box() -> Self {
        Self { q: vec![0.0], l: vec![-1.0], eq: vec![], ineq: vec![(vec![1.0], -3.0), (vec![-1.0], 0.0)], start: vec![1.0] }
    }
}

impl Nlp for QuadraticToy {
    fn dimension(&self) -> usize {
        self.q.len()
    }
    fn eq_count(&self) -> usize {
        self.eq.len()
    }
    fn ineq_count(&self) -> usize {
        self.ineq.len()
    }
    fn initial_point(&self) -> Vec<f64> {
        self.start.clone()
    }
    fn objective(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let f = x.iter().enumerate().map(|(i, v)| self.q[i] * v * v + self.l[i] * v).sum();
        let g = x.iter().enumerate().map(|(i, v)| 2.0 * self.q[i] * v + self.l[i]).collect();
        Ok((f, g))
    }
    fn constraints(&self, x: &[f64]) -> Result<ConstraintEval, EvalError> {
        let rows = |rs: &[(Vec<f64>, f64)]| {
            let mut j = SparseRows::new(x.len());
            let v = rs
                .iter()
                .map(|(a, b)| {
                    j.push_row(a.iter().copied().enumerate());
                    a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + b
                })
                .collect();
            (v, j)
        };
        let (eq, jac_eq) = rows(&self.eq);
        let (ineq, jac_ineq) = rows(&self.ineq);
        Ok(ConstraintEval { eq, ineq, jac_eq, jac_ineq })
    }
    fn hessian(&self, _: &[f64], of: f64, _: &[f64], _: &[f64], out: &mut DenseMatrix) -> Result<(), EvalError> {
        for (i, q) in self.q.iter().enumerate() {
            out.add(i, i, 2.0 * q * of);
        }
        Ok(())
    }
}
