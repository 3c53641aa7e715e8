//! Grid data model: buses, branches, devices and the time grid.
//!
//! Everything stored in a [`NetworkCase`] is per-unit on `base_mva`:
//! powers in p.u., energies in p.u.·h, cost coefficients in $ per p.u.
//! per hour. The case file on disk uses physical units; see [`file`].

pub mod file;

use std::collections::{HashMap, VecDeque};
use std::fmt;

pub use file::{load_case, parse_case, save_case, to_case_file, CaseFile};

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub voltage_min: f64,
    pub voltage_max: f64,
    pub shunt_conductance: f64,
    pub shunt_susceptance: f64,
    pub is_reference: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    pub series_conductance: f64,
    pub series_susceptance: f64,
    pub charging_susceptance: f64,
    /// Off-nominal tap ratio per period.
    pub tap_ratio: Vec<f64>,
    /// Phase shift per period, radians.
    pub phase_shift: Vec<f64>,
    pub thermal_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub name: Option<String>,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub cost_quadratic: f64,
    pub cost_linear: f64,
    pub cost_constant: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Output before the first period; predecessor for the t=1 ramp row.
    pub initial_output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewableGen {
    pub name: Option<String>,
    pub bus: usize,
    pub forecast: Vec<f64>,
    pub p_min: Vec<f64>,
    pub cost_linear: Vec<f64>,
    pub curtail_penalty: f64,
    pub apparent_capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageUnit {
    pub name: Option<String>,
    pub bus: usize,
    pub eta_ch: f64,
    pub eta_dc: f64,
    /// Fraction of stored energy lost per scheduling interval.
    pub self_discharge: f64,
    pub soc_initial: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_ch_max: f64,
    pub p_dc_max: f64,
    pub apparent_capacity: f64,
    pub charge_fee: Vec<f64>,
    pub discharge_fee: Vec<f64>,
    pub loss_penalty: f64,
}

impl StorageUnit {
    /// `1/eta_dc - eta_ch`, the denominator shared by the C1/C2 thresholds.
    pub fn efficiency_gap(&self) -> f64 {
        1.0 / self.eta_dc - self.eta_ch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Svc {
    pub name: Option<String>,
    pub bus: usize,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub period_count: usize,
    pub interval: f64,
    pub reserve_up: Vec<f64>,
    pub reserve_down: Vec<f64>,
    /// `load_p[bus_position][t]`, bus positions follow `NetworkCase::buses`.
    pub load_p: Vec<Vec<f64>>,
    pub load_q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub renewables: Vec<RenewableGen>,
    pub storages: Vec<StorageUnit>,
    pub svcs: Vec<Svc>,
    pub time_grid: TimeGrid,
}

impl NetworkCase {
    pub fn periods(&self) -> usize {
        self.time_grid.period_count
    }

    /// Position of the bus with the given id in `buses`.
    pub fn bus_position(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus_positions(&self) -> HashMap<usize, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    pub fn reference_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_reference)
    }
}

/// One violated invariant: which entity, which field, which rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(entity: impl Into<String>, field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { entity: entity.into(), field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}: {}", self.entity, self.field, self.rule)
    }
}

fn label(kind: &str, k: usize, name: &Option<String>) -> String {
    match name {
        Some(n) => format!("{kind}[{k}] ({n})"),
        None => format!("{kind}[{k}]"),
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, entity: &str, field: &str, rule: impl Into<String>) {
        self.out.push(Violation::new(entity, field, rule));
    }

    fn require(&mut self, ok: bool, entity: &str, field: &str, rule: &str) {
        if !ok {
            self.push(entity, field, rule);
        }
    }

    fn len(&mut self, v: &[f64], t: usize, entity: &str, field: &str) -> bool {
        if v.len() != t {
            self.push(entity, field, format!("expected {t} entries, found {}", v.len()));
            false
        } else {
            true
        }
    }

    fn finite(&mut self, v: &[f64], entity: &str, field: &str) {
        if v.iter().any(|x| !x.is_finite()) {
            self.push(entity, field, "all entries must be finite");
        }
    }

    fn bus(&mut self, ids: &HashMap<usize, usize>, bus: usize, entity: &str) {
        if !ids.contains_key(&bus) {
            self.push(entity, "bus", format!("bus {bus} does not exist"));
        }
    }
}

/// Checks every structural and physical invariant of a case. Returns an empty
/// list iff the case is usable by the formulation.
pub fn validate(case: &NetworkCase) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };
    let t = case.time_grid.period_count;

    c.require(case.base_mva > 0.0 && case.base_mva.is_finite(), "case", "base_mva", "must be > 0");
    c.require(t >= 1, "time", "T", "at least one period required");
    c.require(case.time_grid.interval > 0.0, "time", "dt_hours", "must be > 0");
    c.len(&case.time_grid.reserve_up, t, "time", "sru");
    c.len(&case.time_grid.reserve_down, t, "time", "srd");

    if case.buses.is_empty() {
        c.push("case", "buses", "at least one bus required");
    }
    let mut ids = HashMap::new();
    for (k, b) in case.buses.iter().enumerate() {
        let e = format!("bus[{k}] (id {})", b.id);
        if ids.insert(b.id, k).is_some() {
            c.push(&e, "id", "duplicate bus id");
        }
        c.require(b.voltage_min > 0.0, &e, "voltage_min", "0 < voltage_min required");
        c.require(b.voltage_min <= b.voltage_max, &e, "voltage_max", "voltage_min <= voltage_max required");
        c.finite(&[b.shunt_conductance, b.shunt_susceptance], &e, "shunt");
    }
    let refs = case.buses.iter().filter(|b| b.is_reference).count();
    if refs != 1 && !case.buses.is_empty() {
        c.push("case", "is_reference", format!("exactly one reference bus required, found {refs}"));
    }

    for (k, br) in case.branches.iter().enumerate() {
        let e = format!("branch[{k}] ({}-{})", br.from_bus, br.to_bus);
        if !ids.contains_key(&br.from_bus) {
            c.push(&e, "from_bus", format!("bus {} does not exist", br.from_bus));
        }
        if !ids.contains_key(&br.to_bus) {
            c.push(&e, "to_bus", format!("bus {} does not exist", br.to_bus));
        }
        c.require(br.from_bus != br.to_bus, &e, "to_bus", "from_bus != to_bus required");
        if c.len(&br.tap_ratio, t, &e, "tap_ratio") {
            c.require(br.tap_ratio.iter().all(|&x| x > 0.0), &e, "tap_ratio", "tap ratio entries must be > 0");
        }
        c.len(&br.phase_shift, t, &e, "phase_shift");
        c.require(br.thermal_limit > 0.0, &e, "thermal_limit", "thermal_limit > 0 required");
        c.finite(&[br.series_conductance, br.series_susceptance, br.charging_susceptance], &e, "admittance");
    }

    for (k, g) in case.generators.iter().enumerate() {
        let e = label("generator", k, &g.name);
        c.bus(&ids, g.bus, &e);
        c.require(g.p_min <= g.p_max, &e, "p_max", "p_min <= p_max required");
        c.require(g.q_min <= g.q_max, &e, "q_max", "q_min <= q_max required");
        c.require(g.ramp_up >= 0.0, &e, "ramp_up", "ramp_up >= 0 required");
        c.require(g.ramp_down >= 0.0, &e, "ramp_down", "ramp_down >= 0 required");
        c.require(g.cost_quadratic >= 0.0, &e, "cost_quadratic", "a2 >= 0 required");
    }

    for (k, r) in case.renewables.iter().enumerate() {
        let e = label("renewable", k, &r.name);
        c.bus(&ids, r.bus, &e);
        let ok = c.len(&r.forecast, t, &e, "forecast") & c.len(&r.p_min, t, &e, "p_min");
        c.len(&r.cost_linear, t, &e, "cost_linear");
        if ok {
            for s in 0..t {
                if !(r.p_min[s] >= 0.0 && r.p_min[s] <= r.forecast[s]) {
                    c.push(&e, "p_min", format!("0 <= p_min <= forecast violated at t={}", s + 1));
                    break;
                }
            }
        }
        c.require(r.curtail_penalty >= 0.0, &e, "curtail_penalty", "curtail_penalty >= 0 required");
        c.require(r.apparent_capacity > 0.0, &e, "apparent_capacity", "apparent_capacity > 0 required");
    }

    for (k, s) in case.storages.iter().enumerate() {
        let e = label("storage", k, &s.name);
        c.bus(&ids, s.bus, &e);
        c.require(s.eta_ch > 0.0 && s.eta_ch <= 1.0, &e, "eta_ch", "0 < eta_ch <= 1 required");
        c.require(s.eta_dc > 0.0 && s.eta_dc <= 1.0, &e, "eta_dc", "0 < eta_dc <= 1 required");
        if s.eta_ch > 0.0 && s.eta_dc > 0.0 && s.efficiency_gap() <= 1e-12 {
            c.push(&e, "eta_dc", "1/eta_dc > eta_ch violated");
        }
        c.require((0.0..1.0).contains(&s.self_discharge), &e, "self_discharge", "0 <= self_discharge < 1 required");
        c.require(s.soc_min <= s.soc_initial, &e, "soc_initial", "soc_min <= soc_initial required");
        c.require(s.soc_initial <= s.soc_max, &e, "soc_initial", "soc_initial <= soc_max required");
        c.require(s.p_ch_max > 0.0, &e, "p_ch_max", "p_ch_max > 0 required");
        c.require(s.p_dc_max > 0.0, &e, "p_dc_max", "p_dc_max > 0 required");
        c.require(s.apparent_capacity > 0.0, &e, "apparent_capacity", "apparent_capacity > 0 required");
        c.len(&s.charge_fee, t, &e, "charge_fee");
        c.len(&s.discharge_fee, t, &e, "discharge_fee");
    }

    for (k, s) in case.svcs.iter().enumerate() {
        let e = label("svc", k, &s.name);
        c.bus(&ids, s.bus, &e);
        c.require(s.q_min <= s.q_max, &e, "q_max", "q_min <= q_max required");
    }

    let tg = &case.time_grid;
    if tg.load_p.len() != case.buses.len() || tg.load_q.len() != case.buses.len() {
        c.push("loads", "shape", "load arrays must have one row per bus");
    } else {
        for (k, (p, q)) in tg.load_p.iter().zip(&tg.load_q).enumerate() {
            let e = format!("loads[bus {}]", case.buses[k].id);
            c.len(p, t, &e, "p_mw");
            c.len(q, t, &e, "q_mvar");
        }
    }

    if !case.buses.is_empty() && !is_connected(case, &ids) {
        c.push("case", "branches", "network graph is not connected");
    }
    c.out
}

fn is_connected(case: &NetworkCase, ids: &HashMap<usize, usize>) -> bool {
    let n = case.buses.len();
    let mut adj = vec![Vec::new(); n];
    for br in &case.branches {
        if let (Some(&a), Some(&b)) = (ids.get(&br.from_bus), ids.get(&br.to_bus)) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::file::parse_case;

    const THREE_BUS: &str = r#"{
        "name": "t3", "base_mva": 100,
        "time": {"T": 2, "dt_hours": 1, "sru": [0, 0], "srd": [0, 0]},
        "buses": [
            {"id": 1, "voltage_min": 0.95, "voltage_max": 1.05, "is_reference": true},
            {"id": 2, "voltage_min": 0.95, "voltage_max": 1.05},
            {"id": 3, "voltage_min": 0.95, "voltage_max": 1.05}
        ],
        "branches": [
            {"from_bus": 1, "to_bus": 2, "series_conductance": 1, "series_susceptance": -10, "thermal_limit": 200},
            {"from_bus": 2, "to_bus": 3, "series_conductance": 1, "series_susceptance": -10, "thermal_limit": 200}
        ],
        "generators": [{"bus": 1, "p_min": 0, "p_max": 200, "q_min": -100, "q_max": 100,
                        "cost_linear": 20, "ramp_up": 100, "ramp_down": 100, "initial_output": 50}],
        "storages": [{"bus": 2, "eta_ch": 0.95, "eta_dc": 0.95, "self_discharge": 0.002,
                      "soc_initial": 10, "soc_min": 2, "soc_max": 20, "p_ch_max": 5, "p_dc_max": 5,
                      "apparent_capacity": 6, "charge_fee": 5, "discharge_fee": 15, "loss_penalty": 0.03}],
        "loads": {"3": {"p_mw": [40, 60], "q_mvar": [10, 10]}}
    }"#;

    fn three_bus() -> NetworkCase {
        parse_case(THREE_BUS).unwrap()
    }

    #[test]
    fn valid_three_bus_has_no_violations() {
        assert!(validate(&three_bus()).is_empty());
    }

    #[test]
    fn soc_initial_above_max_is_one_violation() {
        let mut case = three_bus();
        case.storages[0].soc_initial = case.storages[0].soc_max + 0.1;
        let v = validate(&case);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "soc_initial");
    }

    #[test]
    fn disconnected_bus_is_one_violation() {
        let mut case = three_bus();
        case.branches.pop();
        let v = validate(&case);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "branches");
        assert!(v[0].rule.contains("not connected"));
    }

    #[test]
    fn two_reference_buses_rejected() {
        let mut case = three_bus();
        case.buses[2].is_reference = true;
        let v = validate(&case);
        assert!(v.iter().any(|x| x.field == "is_reference"));
    }

    #[test]
    fn non_positive_tap_rejected() {
        let mut case = three_bus();
        case.branches[0].tap_ratio[1] = 0.0;
        assert!(validate(&case).iter().any(|x| x.field == "tap_ratio"));
    }

    #[test]
    fn unit_efficiency_pair_rejected() {
        let mut case = three_bus();
        case.storages[0].eta_ch = 1.0;
        case.storages[0].eta_dc = 1.0;
        let v = validate(&case);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "1/eta_dc > eta_ch violated");
    }
}
