//! Relaxed-versus-exact comparisons and parameter sweeps over fees and
//! renewable costs.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{ConditionReport, Verdict};
use crate::formulation::{build_relaxed, FormulationError};
use crate::ipm::{solve, DualRecord, SolutionPoint};
use crate::mip::{scd_residual, solve_mip, BnbOptions, BnbResult};
use crate::network::NetworkCase;

/// Relative objective difference below which relaxed and exact agree.
pub const EXACT_OBJECTIVE_TOLERANCE: f64 = 1e-5;
/// Largest SCD residual (per-unit²) of an exact relaxation.
pub const EXACT_SCD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StorageRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageSelector {
    #[default]
    All,
    #[serde(untagged)]
    Only(Vec<StorageRef>),
}

impl StorageSelector {
    fn matches(&self, case: &NetworkCase, n: usize) -> bool {
        match self {
            StorageSelector::All => true,
            StorageSelector::Only(refs) => refs.iter().any(|r| match r {
                StorageRef::Index(i) => *i == n,
                StorageRef::Name(name) => case.storages[n].name.as_deref() == Some(name.as_str()),
            }),
        }
    }

    /// Names a selector entry that matches no storage.
    fn unknown(&self, case: &NetworkCase) -> Option<String> {
        let StorageSelector::Only(refs) = self else { return None };
        refs.iter()
            .find(|r| !(0..case.storages.len()).any(|n| StorageSelector::Only(vec![(*r).clone()]).matches(case, n)))
            .map(|r| format!("{r:?}"))
    }
}

/// Uniform-in-time overrides in $/MWh.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Overrides {
    pub charge_fee: Option<f64>,
    pub discharge_fee: Option<f64>,
    pub rg_cost: Option<f64>,
    #[serde(default)]
    pub storages: StorageSelector,
}

impl Overrides {
    pub fn apply(&self, case: &NetworkCase) -> NetworkCase {
        let mut out = case.clone();
        let base = case.base_mva;
        let t = case.periods();
        for n in 0..out.storages.len() {
            if !self.storages.matches(case, n) {
                continue;
            }
            let s = &mut out.storages[n];
            if let Some(f) = self.charge_fee {
                s.charge_fee = vec![f * base; t];
            }
            if let Some(g) = self.discharge_fee {
                s.discharge_fee = vec![g * base; t];
            }
        }
        if let Some(b) = self.rg_cost {
            for rg in &mut out.renewables {
                rg.cost_linear = vec![b * base; t];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Every combination of the axes.
    #[default]
    Cartesian,
    /// The i-th values of all axes form scenario i.
    Zip,
}

fn default_cap() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub charge_fee: Option<Vec<f64>>,
    pub discharge_fee: Option<Vec<f64>>,
    pub rg_cost: Option<Vec<f64>>,
    #[serde(default)]
    pub storages: StorageSelector,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default)]
    pub mode: SweepMode,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("sweep axis {0} is empty")]
    EmptyAxis(&'static str),
    #[error("sweep has no axes")]
    NoAxes,
    #[error("sweep has {size} scenarios, cap is {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("zip sweep axes have different lengths")]
    RaggedZip,
    #[error("storage selector {0} matches no storage")]
    UnknownStorage(String),
}

impl SweepSpec {
    fn axes(&self) -> Vec<(&'static str, &Vec<f64>)> {
        [("charge_fee", &self.charge_fee), ("discharge_fee", &self.discharge_fee), ("rg_cost", &self.rg_cost)]
            .into_iter()
            .filter_map(|(n, a)| a.as_ref().map(|a| (n, a)))
            .collect()
    }

    /// Expands the axes into scenarios after validating the spec.
    pub fn scenarios(&self, case: &NetworkCase) -> Result<Vec<Overrides>, SweepError> {
        let axes = self.axes();
        if axes.is_empty() {
            return Err(SweepError::NoAxes);
        }
        if let Some((name, _)) = axes.iter().find(|(_, a)| a.is_empty()) {
            return Err(SweepError::EmptyAxis(name));
        }
        if let Some(r) = self.storages.unknown(case) {
            return Err(SweepError::UnknownStorage(r));
        }
        let size = match self.mode {
            SweepMode::Cartesian => axes.iter().map(|(_, a)| a.len()).product(),
            SweepMode::Zip => {
                let len = axes[0].1.len();
                if axes.iter().any(|(_, a)| a.len() != len) {
                    return Err(SweepError::RaggedZip);
                }
                len
            }
        };
        if size > self.cap {
            return Err(SweepError::TooLarge { size, cap: self.cap });
        }
        let pick = |axis: &Option<Vec<f64>>, i: usize| axis.as_ref().map(|a| a[i]);
        let out = match self.mode {
            SweepMode::Zip => (0..size)
                .map(|i| Overrides {
                    charge_fee: pick(&self.charge_fee, i),
                    discharge_fee: pick(&self.discharge_fee, i),
                    rg_cost: pick(&self.rg_cost, i),
                    storages: self.storages.clone(),
                })
                .collect(),
            SweepMode::Cartesian => {
                let len = |a: &Option<Vec<f64>>| a.as_ref().map_or(1, Vec::len);
                let mut v = Vec::with_capacity(size);
                for i in 0..len(&self.charge_fee) {
                    for j in 0..len(&self.discharge_fee) {
                        for k in 0..len(&self.rg_cost) {
                            v.push(Overrides {
                                charge_fee: pick(&self.charge_fee, i),
                                discharge_fee: pick(&self.discharge_fee, j),
                                rg_cost: pick(&self.rg_cost, k),
                                storages: self.storages.clone(),
                            });
                        }
                    }
                }
                v
            }
        };
        Ok(out)
    }
}

/// One relaxed-versus-exact comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRecord {
    pub case: String,
    pub relaxed_status: String,
    pub relaxed_objective: f64,
    pub mip_status: String,
    pub mip_objective: Option<f64>,
    /// `|relaxed - mip| / max(1, |mip|)`
    pub relative_difference: Option<f64>,
    pub relaxed_scd: f64,
    pub min_lmp: Option<f64>,
    pub conditions: [Verdict; 8],
    pub max_identity_residual: f64,
    pub inclusions_ok: bool,
    pub nodes: usize,
    pub failed_nodes: usize,
    pub exact: bool,
    pub relaxed_seconds: f64,
    pub mip_seconds: f64,
}

pub struct CompareOutcome {
    pub record: CompareRecord,
    pub relaxed: (SolutionPoint, DualRecord),
    pub report: ConditionReport,
    pub mip: BnbResult,
}

/// Solves the relaxed model and the exact model and compares them.
pub fn compare(case: &NetworkCase, options: &BnbOptions) -> Result<CompareOutcome, FormulationError> {
    let start = Instant::now();
    let problem = build_relaxed(case)?;
    let (sol, duals) = solve(&problem, &options.solver, None);
    let relaxed_seconds = start.elapsed().as_secs_f64();
    let report = ConditionReport::build(case, &sol, &duals).expect("validated cases have nonzero efficiency gaps");

    let start = Instant::now();
    let mip = solve_mip(case, options)?;
    let mip_seconds = start.elapsed().as_secs_f64();

    let relaxed_scd = scd_residual(&sol.x, case).max;
    let relative_difference = mip.objective.map(|m| (sol.objective - m).abs() / m.abs().max(1.0));
    let exact = sol.is_optimal()
        && relative_difference.is_some_and(|d| d <= EXACT_OBJECTIVE_TOLERANCE)
        && relaxed_scd <= EXACT_SCD_TOLERANCE;
    let mut conditions = [Verdict::Inapplicable; 8];
    for (k, (_, v)) in report.summary.conditions.iter().enumerate() {
        conditions[k] = *v;
    }
    let record = CompareRecord {
        case: case.name.clone(),
        relaxed_status: sol.status.name().into(),
        relaxed_objective: sol.objective,
        mip_status: format!("{:?}", mip.status).to_lowercase(),
        mip_objective: mip.objective,
        relative_difference,
        relaxed_scd,
        min_lmp: report.summary.min_lmp,
        conditions,
        max_identity_residual: report.summary.max_identity_residual,
        inclusions_ok: report.summary.inclusions.ok(),
        nodes: mip.nodes_explored,
        failed_nodes: mip.failed_nodes,
        exact,
        relaxed_seconds,
        mip_seconds,
    };
    Ok(CompareOutcome { record, relaxed: (sol, duals), report, mip })
}

pub struct SweepRow {
    pub overrides: Overrides,
    pub outcome: Result<CompareOutcome, FormulationError>,
}

/// Runs [`compare`] for every scenario of the spec, in order.
pub fn sweep(case: &NetworkCase, spec: &SweepSpec, options: &BnbOptions) -> Result<Vec<SweepRow>, SweepError> {
    let scenarios = spec.scenarios(case)?;
    let run = |o: Overrides| {
        let outcome = compare(&o.apply(case), options);
        SweepRow { overrides: o, outcome }
    };
    Ok(if options.serial {
        scenarios.into_iter().map(run).collect()
    } else {
        scenarios.into_par_iter().map(run).collect()
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.9e}"))
}

const RECORD_COLUMNS: [&str; 12] = [
    "relaxed_status",
    "relaxed_objective",
    "mip_status",
    "mip_objective",
    "relative_difference",
    "relaxed_scd",
    "min_lmp",
    "nodes",
    "failed_nodes",
    "exact",
    "inclusions_ok",
    "max_identity_residual",
];

fn record_fields(r: &CompareRecord) -> Vec<String> {
    let mut v = vec![
        r.relaxed_status.clone(),
        format!("{:.9e}", r.relaxed_objective),
        r.mip_status.clone(),
        opt(r.mip_objective),
        opt(r.relative_difference),
        format!("{:.3e}", r.relaxed_scd),
        opt(r.min_lmp),
        r.nodes.to_string(),
        r.failed_nodes.to_string(),
        r.exact.to_string(),
        r.inclusions_ok.to_string(),
        format!("{:.3e}", r.max_identity_residual),
    ];
    v.extend(r.conditions.iter().map(|c| c.name().to_string()));
    v
}

fn header(prefix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    h.extend(RECORD_COLUMNS.iter().map(|s| s.to_string()));
    h.extend((1..=8).map(|k| format!("C{k}")));
    h
}

/// Writes a comparison as CSV. Wall times go to `#` comment lines so the
/// body is reproducible.
pub fn write_compare_csv<W: Write>(mut w: W, r: &CompareRecord) -> std::io::Result<()> {
    writeln!(w, "# case {}: relaxed {:.3} s, mip {:.3} s", r.case, r.relaxed_seconds, r.mip_seconds)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(&["case"]))?;
    let mut row = vec![r.case.clone()];
    row.extend(record_fields(r));
    out.write_record(&row)?;
    out.flush()
}

/// One CSV row per scenario; failed scenarios keep their parameters and an
/// error message.
pub fn write_sweep_csv<W: Write>(mut w: W, case: &NetworkCase, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "# sweep over case {}", case.name)?;
    for (i, row) in rows.iter().enumerate() {
        if let Ok(o) = &row.outcome {
            writeln!(
                w,
                "# scenario {}: relaxed {:.3} s, mip {:.3} s",
                i + 1,
                o.record.relaxed_seconds,
                o.record.mip_seconds
            )?;
        }
    }
    let mut out = csv::Writer::from_writer(w);
    let mut h = header(&["scenario", "charge_fee", "discharge_fee", "rg_cost"]);
    h.push("error".into());
    out.write_record(&h)?;
    for (i, row) in rows.iter().enumerate() {
        let o = &row.overrides;
        let mut fields = vec![(i + 1).to_string(), opt(o.charge_fee), opt(o.discharge_fee), opt(o.rg_cost)];
        match &row.outcome {
            Ok(c) => {
                fields.extend(record_fields(&c.record));
                fields.push(String::new());
            }
            Err(e) => {
                fields.extend(std::iter::repeat_n(String::new(), RECORD_COLUMNS.len() + 8));
                fields.push(e.to_string());
            }
        }
        out.write_record(&fields)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> SweepSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn cartesian_and_zip_expansion() {
        let case = crate::bundled::case("micro3").unwrap();
        let s = spec(r#"{"discharge_fee": [15], "charge_fee": [5, 0, -10]}"#);
        let sc = s.scenarios(&case).unwrap();
        assert_eq!(sc.len(), 3);
        assert_eq!(sc[2].charge_fee, Some(-10.0));
        assert_eq!(sc[2].discharge_fee, Some(15.0));

        let z = spec(r#"{"charge_fee": [-8, -5], "discharge_fee": [15, 15], "rg_cost": [-10, -20], "mode": "zip"}"#);
        let sc = z.scenarios(&case).unwrap();
        assert_eq!(sc.len(), 2);
        assert_eq!((sc[1].charge_fee, sc[1].rg_cost), (Some(-5.0), Some(-20.0)));
    }

    #[test]
    fn invalid_specs() {
        let case = crate::bundled::case("micro3").unwrap();
        assert_eq!(spec(r#"{"charge_fee": []}"#).scenarios(&case), Err(SweepError::EmptyAxis("charge_fee")));
        assert_eq!(spec("{}").scenarios(&case), Err(SweepError::NoAxes));
        assert!(matches!(
            spec(r#"{"charge_fee": [1,2,3], "discharge_fee": [1,2,3], "cap": 8}"#).scenarios(&case),
            Err(SweepError::TooLarge { size: 9, cap: 8 })
        ));
        assert_eq!(
            spec(r#"{"charge_fee": [1,2], "rg_cost": [1], "mode": "zip"}"#).scenarios(&case),
            Err(SweepError::RaggedZip)
        );
        assert!(matches!(
            spec(r#"{"charge_fee": [1], "storages": ["nope"]}"#).scenarios(&case),
            Err(SweepError::UnknownStorage(_))
        ));
    }

    #[test]
    fn overrides_convert_to_per_unit_prices() {
        let case = crate::bundled::case("case9").unwrap();
        let o = Overrides {
            charge_fee: Some(-3.0),
            rg_cost: Some(-30.0),
            storages: StorageSelector::Only(vec![StorageRef::Name("ess9".into())]),
            ..Default::default()
        };
        let c = o.apply(&case);
        assert_eq!(c.storages[1].charge_fee, vec![-300.0; 6]);
        assert_eq!(c.storages[0].charge_fee, case.storages[0].charge_fee);
        assert_eq!(c.storages[1].discharge_fee, case.storages[1].discharge_fee);
        assert_eq!(c.renewables[0].cost_linear, vec![-3000.0; 6]);
    }

    #[test]
    fn selector_parses_all_and_lists() {
        assert_eq!(serde_json::from_str::<StorageSelector>(r#""all""#).unwrap(), StorageSelector::All);
        assert_eq!(
            serde_json::from_str::<StorageSelector>(r#"[0, "ess9"]"#).unwrap(),
            StorageSelector::Only(vec![StorageRef::Index(0), StorageRef::Name("ess9".into())])
        );
    }
}
