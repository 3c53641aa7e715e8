use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    compute_thresholds, identity_residuals, verdicts, verify_inclusions, IdentityResiduals, InclusionReport,
    SlotThresholds, ThresholdError, ThresholdSet, Verdict, Verdicts,
};
use crate::ipm::{DualRecord, SolutionPoint};
use crate::network::NetworkCase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotReport {
    pub thresholds: SlotThresholds,
    pub verdicts: Verdicts,
    /// `p^ch · p^dc` in per-unit².
    pub scd: f64,
    pub identity: IdentityResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub case: String,
    pub converged: bool,
    pub slots: usize,
    /// All-slots verdict per condition, `C1..C8`.
    pub conditions: Vec<(String, Verdict)>,
    pub max_scd: f64,
    pub max_identity_residual: f64,
    pub min_lmp: Option<f64>,
    pub inclusions: InclusionReport,
    /// Constant C2 threshold per storage when fees do not vary over time.
    pub constant_c2: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub slots: Vec<SlotReport>,
    pub summary: Summary,
}

/// Folds per-slot verdicts: any failure fails, otherwise any hold holds.
pub fn all_slots(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Inapplicable;
    for v in verdicts {
        match v {
            Verdict::Fails => return Verdict::Fails,
            Verdict::Holds => out = Verdict::Holds,
            Verdict::Inapplicable => {}
        }
    }
    out
}

impl ConditionReport {
    pub fn build(case: &NetworkCase, solution: &SolutionPoint, duals: &DualRecord) -> Result<Self, ThresholdError> {
        let thresholds = compute_thresholds(case, solution, duals)?;
        Ok(Self::from_thresholds(case, &thresholds, duals))
    }

    pub fn from_thresholds(case: &NetworkCase, thresholds: &ThresholdSet, duals: &DualRecord) -> Self {
        let v: Vec<Verdicts> = thresholds.slots.iter().map(|s| verdicts(s, thresholds.converged)).collect();
        let ids = identity_residuals(thresholds);
        let inclusions = verify_inclusions(thresholds, &v);
        let slots: Vec<SlotReport> = thresholds
            .slots
            .iter()
            .zip(&v)
            .zip(&ids)
            .map(|((s, v), id)| SlotReport { thresholds: s.clone(), verdicts: *v, scd: s.p_ch * s.p_dc, identity: *id })
            .collect();
        let conditions = (0..8)
            .map(|k| (format!("C{}", k + 1), all_slots(slots.iter().map(|s| s.verdicts[k]))))
            .collect();
        let min_lmp = (0..case.buses.len())
            .flat_map(|j| (0..case.periods()).map(move |t| (j, t)))
            .map(|(j, t)| duals.lmp(j, t) / case.base_mva)
            .reduce(f64::min);
        let constant_c2 = case
            .storages
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let constant = s.charge_fee.windows(2).all(|w| w[0] == w[1]) && s.discharge_fee.windows(2).all(|w| w[0] == w[1]);
                constant.then(|| {
                    let (gc, gd) = super::storage_gradients(case, n, 0);
                    super::c2_threshold(gc, gd, s.eta_ch, s.eta_dc)
                })
            })
            .collect();
        let summary = Summary {
            case: case.name.clone(),
            converged: thresholds.converged,
            slots: slots.len(),
            conditions,
            max_scd: slots.iter().map(|s| s.scd).fold(0.0, f64::max),
            max_identity_residual: ids.iter().map(|r| r.max()).fold(0.0, f64::max),
            min_lmp,
            inclusions,
            constant_c2,
        };
        Self { slots, summary }
    }

    /// The all-slots verdict of condition `k` (1-based).
    pub fn condition(&self, k: usize) -> Verdict {
        self.summary.conditions[k - 1].1
    }

    /// Per-slot CSV: `n,t,lmp,c1,c2,c3,grad_ch,grad_dc,scd,C1..C8`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = ["n", "t", "lmp", "c1", "c2", "c3", "grad_ch", "grad_dc", "scd"].map(String::from).to_vec();
        header.extend((1..=8).map(|k| format!("C{k}")));
        out.write_record(&header)?;
        for s in &self.slots {
            let th = &s.thresholds;
            let mut row = vec![
                th.storage.to_string(),
                (th.period + 1).to_string(),
                format!("{:.9}", th.lambda_p),
                format!("{:.9}", th.c1),
                format!("{:.9}", th.c2),
                format!("{:.9}", th.c3),
                format!("{:.9}", th.grad_ch),
                format!("{:.9}", th.grad_dc),
                format!("{:.3e}", s.scd),
            ];
            row.extend(s.verdicts.iter().map(|v| v.name().to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}
