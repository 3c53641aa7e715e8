//! JSON case files in physical units (MW, MVAr, MWh, $/MWh) and their
//! conversion to and from the per-unit [`NetworkCase`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate, Branch, Bus, Generator, NetworkCase, RenewableGen, StorageUnit, Svc, TimeGrid, Violation};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation error: {0}")]
    Invalid(Violation),
}

/// A per-period quantity written either as one scalar (held constant) or as
/// an explicit array of length T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPeriod {
    Scalar(f64),
    Series(Vec<f64>),
}

impl PerPeriod {
    fn expand(&self, t: usize, scale: f64) -> Vec<f64> {
        match self {
            PerPeriod::Scalar(v) => vec![v * scale; t],
            PerPeriod::Series(v) => v.iter().map(|x| x * scale).collect(),
        }
    }

    fn series(v: &[f64], scale: f64) -> Self {
        PerPeriod::Series(v.iter().map(|x| x * scale).collect())
    }
}

impl Default for PerPeriod {
    fn default() -> Self {
        PerPeriod::Scalar(0.0)
    }
}

fn one() -> PerPeriod {
    PerPeriod::Scalar(1.0)
}

fn default_base() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFile {
    #[serde(rename = "T")]
    pub periods: usize,
    pub dt_hours: f64,
    #[serde(default)]
    pub sru: PerPeriod,
    #[serde(default)]
    pub srd: PerPeriod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusFile {
    pub id: usize,
    pub voltage_min: f64,
    pub voltage_max: f64,
    #[serde(default)]
    pub shunt_conductance: f64,
    #[serde(default)]
    pub shunt_susceptance: f64,
    #[serde(default)]
    pub is_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFile {
    pub from_bus: usize,
    pub to_bus: usize,
    pub series_conductance: f64,
    pub series_susceptance: f64,
    #[serde(default)]
    pub charging_susceptance: f64,
    #[serde(default = "one")]
    pub tap_ratio: PerPeriod,
    /// Radians.
    #[serde(default)]
    pub phase_shift: PerPeriod,
    /// MVA.
    pub thermal_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// $/MW²h
    #[serde(default)]
    pub cost_quadratic: f64,
    /// $/MWh
    #[serde(default)]
    pub cost_linear: f64,
    /// $/h
    #[serde(default)]
    pub cost_constant: f64,
    /// MW/h
    pub ramp_up: f64,
    pub ramp_down: f64,
    #[serde(default)]
    pub initial_output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub bus: usize,
    pub forecast: PerPeriod,
    #[serde(default)]
    pub p_min: PerPeriod,
    #[serde(default)]
    pub cost_linear: PerPeriod,
    #[serde(default)]
    pub curtail_penalty: f64,
    pub apparent_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub bus: usize,
    pub eta_ch: f64,
    pub eta_dc: f64,
    #[serde(default)]
    pub self_discharge: f64,
    /// MWh
    pub soc_initial: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// MW
    pub p_ch_max: f64,
    pub p_dc_max: f64,
    /// MVA
    pub apparent_capacity: f64,
    /// $/MWh
    #[serde(default)]
    pub charge_fee: PerPeriod,
    #[serde(default)]
    pub discharge_fee: PerPeriod,
    #[serde(default)]
    pub loss_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub bus: usize,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadFile {
    pub p_mw: PerPeriod,
    #[serde(default)]
    pub q_mvar: PerPeriod,
}

/// On-disk case document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_base")]
    pub base_mva: f64,
    pub time: TimeFile,
    pub buses: Vec<BusFile>,
    #[serde(default)]
    pub branches: Vec<BranchFile>,
    #[serde(default)]
    pub generators: Vec<GeneratorFile>,
    #[serde(default)]
    pub renewables: Vec<RenewableFile>,
    #[serde(default)]
    pub storages: Vec<StorageFile>,
    #[serde(default)]
    pub svcs: Vec<SvcFile>,
    /// Keyed by bus id.
    #[serde(default)]
    pub loads: BTreeMap<String, LoadFile>,
}

impl CaseFile {
    /// Converts to per-unit. Fails only on load entries that reference
    /// unknown buses; everything else is left to [`validate`].
    pub fn to_case(&self) -> Result<NetworkCase, Violation> {
        let t = self.time.periods;
        let base = self.base_mva;
        let p = 1.0 / base;
        let price = base;

        let buses: Vec<Bus> = self
            .buses
            .iter()
            .map(|b| Bus {
                id: b.id,
                voltage_min: b.voltage_min,
                voltage_max: b.voltage_max,
                shunt_conductance: b.shunt_conductance,
                shunt_susceptance: b.shunt_susceptance,
                is_reference: b.is_reference,
            })
            .collect();

        let mut load_p = vec![vec![0.0; t]; buses.len()];
        let mut load_q = vec![vec![0.0; t]; buses.len()];
        for (key, load) in &self.loads {
            let pos = key
                .trim()
                .parse::<usize>()
                .ok()
                .and_then(|id| buses.iter().position(|b| b.id == id))
                .ok_or_else(|| Violation::new(format!("loads[{key}]"), "bus", format!("bus {key} does not exist")))?;
            load_p[pos] = load.p_mw.expand(t, p);
            load_q[pos] = load.q_mvar.expand(t, p);
        }

        Ok(NetworkCase {
            name: self.name.clone(),
            base_mva: base,
            buses,
            branches: self
                .branches
                .iter()
                .map(|b| Branch {
                    from_bus: b.from_bus,
                    to_bus: b.to_bus,
                    series_conductance: b.series_conductance,
                    series_susceptance: b.series_susceptance,
                    charging_susceptance: b.charging_susceptance,
                    tap_ratio: b.tap_ratio.expand(t, 1.0),
                    phase_shift: b.phase_shift.expand(t, 1.0),
                    thermal_limit: b.thermal_limit * p,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| Generator {
                    name: g.name.clone(),
                    bus: g.bus,
                    p_min: g.p_min * p,
                    p_max: g.p_max * p,
                    q_min: g.q_min * p,
                    q_max: g.q_max * p,
                    cost_quadratic: g.cost_quadratic * base * base,
                    cost_linear: g.cost_linear * price,
                    cost_constant: g.cost_constant,
                    ramp_up: g.ramp_up * p,
                    ramp_down: g.ramp_down * p,
                    initial_output: g.initial_output * p,
                })
                .collect(),
            renewables: self
                .renewables
                .iter()
                .map(|r| RenewableGen {
                    name: r.name.clone(),
                    bus: r.bus,
                    forecast: r.forecast.expand(t, p),
                    p_min: r.p_min.expand(t, p),
                    cost_linear: r.cost_linear.expand(t, price),
                    curtail_penalty: r.curtail_penalty * price,
                    apparent_capacity: r.apparent_capacity * p,
                })
                .collect(),
            storages: self
                .storages
                .iter()
                .map(|s| StorageUnit {
                    name: s.name.clone(),
                    bus: s.bus,
                    eta_ch: s.eta_ch,
                    eta_dc: s.eta_dc,
                    self_discharge: s.self_discharge,
                    soc_initial: s.soc_initial * p,
                    soc_min: s.soc_min * p,
                    soc_max: s.soc_max * p,
                    p_ch_max: s.p_ch_max * p,
                    p_dc_max: s.p_dc_max * p,
                    apparent_capacity: s.apparent_capacity * p,
                    charge_fee: s.charge_fee.expand(t, price),
                    discharge_fee: s.discharge_fee.expand(t, price),
                    loss_penalty: s.loss_penalty * price,
                })
                .collect(),
            svcs: self
                .svcs
                .iter()
                .map(|s| Svc { name: s.name.clone(), bus: s.bus, q_min: s.q_min * p, q_max: s.q_max * p })
                .collect(),
            time_grid: TimeGrid {
                period_count: t,
                interval: self.time.dt_hours,
                reserve_up: self.time.sru.expand(t, p),
                reserve_down: self.time.srd.expand(t, p),
                load_p,
                load_q,
            },
        })
    }
}

/// Converts a per-unit case back to its physical-unit document.
pub fn to_case_file(case: &NetworkCase) -> CaseFile {
    let base = case.base_mva;
    let w = base;
    let price = 1.0 / base;
    let tg = &case.time_grid;
    let mut loads = BTreeMap::new();
    for (k, bus) in case.buses.iter().enumerate() {
        let (lp, lq) = (&tg.load_p[k], &tg.load_q[k]);
        if lp.iter().chain(lq).any(|&v| v != 0.0) {
            loads.insert(
                bus.id.to_string(),
                LoadFile { p_mw: PerPeriod::series(lp, w), q_mvar: PerPeriod::series(lq, w) },
            );
        }
    }
    CaseFile {
        name: case.name.clone(),
        base_mva: base,
        time: TimeFile {
            periods: tg.period_count,
            dt_hours: tg.interval,
            sru: PerPeriod::series(&tg.reserve_up, w),
            srd: PerPeriod::series(&tg.reserve_down, w),
        },
        buses: case
            .buses
            .iter()
            .map(|b| BusFile {
                id: b.id,
                voltage_min: b.voltage_min,
                voltage_max: b.voltage_max,
                shunt_conductance: b.shunt_conductance,
                shunt_susceptance: b.shunt_susceptance,
                is_reference: b.is_reference,
            })
            .collect(),
        branches: case
            .branches
            .iter()
            .map(|b| BranchFile {
                from_bus: b.from_bus,
                to_bus: b.to_bus,
                series_conductance: b.series_conductance,
                series_susceptance: b.series_susceptance,
                charging_susceptance: b.charging_susceptance,
                tap_ratio: PerPeriod::series(&b.tap_ratio, 1.0),
                phase_shift: PerPeriod::series(&b.phase_shift, 1.0),
                thermal_limit: b.thermal_limit * w,
            })
            .collect(),
        generators: case
            .generators
            .iter()
            .map(|g| GeneratorFile {
                name: g.name.clone(),
                bus: g.bus,
                p_min: g.p_min * w,
                p_max: g.p_max * w,
                q_min: g.q_min * w,
                q_max: g.q_max * w,
                cost_quadratic: g.cost_quadratic * price * price,
                cost_linear: g.cost_linear * price,
                cost_constant: g.cost_constant,
                ramp_up: g.ramp_up * w,
                ramp_down: g.ramp_down * w,
                initial_output: g.initial_output * w,
            })
            .collect(),
        renewables: case
            .renewables
            .iter()
            .map(|r| RenewableFile {
                name: r.name.clone(),
                bus: r.bus,
                forecast: PerPeriod::series(&r.forecast, w),
                p_min: PerPeriod::series(&r.p_min, w),
                cost_linear: PerPeriod::series(&r.cost_linear, price),
                curtail_penalty: r.curtail_penalty * price,
                apparent_capacity: r.apparent_capacity * w,
            })
            .collect(),
        storages: case
            .storages
            .iter()
            .map(|s| StorageFile {
                name: s.name.clone(),
                bus: s.bus,
                eta_ch: s.eta_ch,
                eta_dc: s.eta_dc,
                self_discharge: s.self_discharge,
                soc_initial: s.soc_initial * w,
                soc_min: s.soc_min * w,
                soc_max: s.soc_max * w,
                p_ch_max: s.p_ch_max * w,
                p_dc_max: s.p_dc_max * w,
                apparent_capacity: s.apparent_capacity * w,
                charge_fee: PerPeriod::series(&s.charge_fee, price),
                discharge_fee: PerPeriod::series(&s.discharge_fee, price),
                loss_penalty: s.loss_penalty * price,
            })
            .collect(),
        svcs: case
            .svcs
            .iter()
            .map(|s| SvcFile { name: s.name.clone(), bus: s.bus, q_min: s.q_min * w, q_max: s.q_max * w })
            .collect(),
        loads,
    }
}

/// Parses and validates a case document held in memory.
pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    let file: CaseFile = serde_json::from_str(text)?;
    let case = file.to_case().map_err(CaseError::Invalid)?;
    match validate(&case).into_iter().next() {
        Some(v) => Err(CaseError::Invalid(v)),
        None => Ok(case),
    }
}

/// Reads, parses, converts to per-unit and validates a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkCase, CaseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CaseError::Io { path: path.to_owned(), source })?;
    parse_case(&text)
}

pub fn save_case(case: &NetworkCase, path: impl AsRef<Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&to_case_file(case)).expect("case documents always serialize");
    fs::write(path, text)
}
