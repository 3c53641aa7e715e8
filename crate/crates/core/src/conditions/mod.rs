//! Exactness certificates for the relaxed model.
//!
//! Everything here is expressed in $/MWh: per-unit multipliers and objective
//! gradients are divided by the case's `base_mva`.

mod report;

pub use report::{ConditionReport, SlotReport, Summary};

use serde::{Deserialize, Serialize};

use crate::formulation::VariableLayout;
use crate::ipm::{DualRecord, SolutionPoint, StorageMultipliers};
use crate::network::NetworkCase;

/// Margin applied to every strict inequality.
pub const STRICTNESS_MARGIN: f64 = 1e-9;
/// A multiplier at or below this magnitude counts as zero.
pub const ACTIVE_TOLERANCE: f64 = 1e-7;
/// Largest accepted stationarity-identity residual.
pub const IDENTITY_TOLERANCE: f64 = 1e-6;
/// `|1/eta_dc - eta_ch|` below this is treated as a vanishing denominator.
const GAP_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThresholdError {
    #[error("storage {0}: 1/eta_dc - eta_ch vanishes")]
    VanishingGap(usize),
    #[error("solution has dimension {found}, case needs {expected}")]
    Dimension { expected: usize, found: usize },
}

/// Thresholds and the ingredients they were computed from for one
/// (storage, period) slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotThresholds {
    pub storage: usize,
    /// 0-based.
    pub period: usize,
    /// Position of the storage bus.
    pub bus: usize,
    pub lambda_p: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub grad_ch: f64,
    pub grad_dc: f64,
    pub gamma: f64,
    /// Per-unit powers.
    pub p_ch: f64,
    pub p_dc: f64,
    pub p_ch_max: f64,
    pub p_dc_max: f64,
    pub eta_ch: f64,
    pub eta_dc: f64,
    pub interval: f64,
    /// Storage multipliers divided by `base_mva`.
    pub multipliers: Multipliers,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Multipliers {
    pub ch_lower: f64,
    pub ch_upper: f64,
    pub dc_lower: f64,
    pub dc_upper: f64,
    pub circle_dc: f64,
    pub circle_ch: f64,
    pub relax_cut: f64,
}

impl Multipliers {
    fn scaled(m: &StorageMultipliers, k: f64) -> Self {
        Self {
            ch_lower: m.ch_lower * k,
            ch_upper: m.ch_upper * k,
            dc_lower: m.dc_lower * k,
            dc_upper: m.dc_upper * k,
            circle_dc: m.circle_dc * k,
            circle_ch: m.circle_ch * k,
            relax_cut: m.relax_cut * k,
        }
    }
}

impl SlotThresholds {
    pub fn gap(&self) -> f64 {
        1.0 / self.eta_dc - self.eta_ch
    }

    /// Charge-side bracket `λ^{ch,2} + λ^{relax}/P̄^ch + 2 λ^{S,2} p^ch`.
    fn charge_terms(&self) -> f64 {
        let m = &self.multipliers;
        m.ch_upper + m.relax_cut / self.p_ch_max + 2.0 * m.circle_ch * self.p_ch
    }

    fn discharge_terms(&self) -> f64 {
        let m = &self.multipliers;
        m.dc_upper + m.relax_cut / self.p_dc_max + 2.0 * m.circle_dc * self.p_dc
    }

    /// `c2 - c1` re-evaluated from the multipliers alone.
    pub fn threshold_spread(&self) -> f64 {
        (self.charge_terms() / self.eta_dc + self.discharge_terms() * self.eta_ch) / self.gap()
    }

    /// Residual of the charge-power stationarity row.
    pub fn charge_stationarity(&self) -> f64 {
        self.grad_ch + self.lambda_p - self.multipliers.ch_lower
            + self.charge_terms()
            + self.eta_ch * self.gamma * self.interval
    }

    /// Residual of the discharge-power stationarity row.
    pub fn discharge_stationarity(&self) -> f64 {
        self.grad_dc - self.lambda_p - self.multipliers.dc_lower + self.discharge_terms()
            - self.gamma * self.interval / self.eta_dc
    }

    /// The LMP rebuilt from the other multipliers by eliminating `Γ`.
    pub fn reconstructed_lmp(&self) -> f64 {
        let m = &self.multipliers;
        self.c1 + (m.ch_lower / self.eta_dc + m.dc_lower * self.eta_ch) / self.gap()
    }
}

/// `c2` for given objective gradients and efficiencies.
pub fn c2_threshold(grad_ch: f64, grad_dc: f64, eta_ch: f64, eta_dc: f64) -> f64 {
    (grad_ch / eta_dc + grad_dc * eta_ch) / (eta_ch - 1.0 / eta_dc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub base_mva: f64,
    /// Whether the solve these thresholds came from converged.
    pub converged: bool,
    pub slots: Vec<SlotThresholds>,
}

impl ThresholdSet {
    pub fn slot(&self, n: usize, t: usize) -> Option<&SlotThresholds> {
        self.slots.iter().find(|s| s.storage == n && s.period == t)
    }
}

/// Objective partials `(∂obj/∂p^ch, ∂obj/∂p^dc)` in $/MWh.
pub fn storage_gradients(case: &NetworkCase, n: usize, t: usize) -> (f64, f64) {
    let s = &case.storages[n];
    let ch = s.charge_fee[t] + s.loss_penalty * (1.0 - s.eta_ch);
    let dc = s.discharge_fee[t] + s.loss_penalty * (1.0 / s.eta_dc - 1.0);
    (ch / case.base_mva, dc / case.base_mva)
}

pub fn compute_thresholds(
    case: &NetworkCase,
    solution: &SolutionPoint,
    duals: &DualRecord,
) -> Result<ThresholdSet, ThresholdError> {
    let layout = VariableLayout::new(case);
    if solution.x.len() != layout.dimension() {
        return Err(ThresholdError::Dimension { expected: layout.dimension(), found: solution.x.len() });
    }
    let k = 1.0 / case.base_mva;
    let periods = case.periods();
    let dt = case.time_grid.interval;
    let pos = case.bus_positions();
    let mut slots = Vec::with_capacity(case.storages.len() * periods);
    for (n, s) in case.storages.iter().enumerate() {
        let gap = s.efficiency_gap();
        if gap.abs() < GAP_GUARD {
            return Err(ThresholdError::VanishingGap(n));
        }
        let keep = 1.0 - s.self_discharge;
        let terminal = duals.soc_terminal(n) * k;
        let mult: Vec<StorageMultipliers> = (0..periods).map(|t| duals.storage(n, t)).collect();
        let bus = pos[&s.bus];
        for t in 0..periods {
            let mut gamma = terminal * keep.powi((periods - 1 - t) as i32);
            for (tau, m) in mult.iter().enumerate().skip(t) {
                gamma += keep.powi((tau - t) as i32) * (m.soc_upper - m.soc_lower) * k;
            }
            let (grad_ch, grad_dc) = storage_gradients(case, n, t);
            let c2 = c2_threshold(grad_ch, grad_dc, s.eta_ch, s.eta_dc);
            let mut slot = SlotThresholds {
                storage: n,
                period: t,
                bus,
                lambda_p: duals.lmp(bus, t) * k,
                c1: 0.0,
                c2,
                c3: -grad_ch,
                c4: -grad_ch,
                grad_ch,
                grad_dc,
                gamma,
                p_ch: solution.x[layout.p_ch(n, t)],
                p_dc: solution.x[layout.p_dc(n, t)],
                p_ch_max: s.p_ch_max,
                p_dc_max: s.p_dc_max,
                eta_ch: s.eta_ch,
                eta_dc: s.eta_dc,
                interval: dt,
                multipliers: Multipliers::scaled(&mult[t], k),
            };
            slot.c1 = c2 - slot.threshold_spread();
            slots.push(slot);
        }
    }
    Ok(ThresholdSet { base_mva: case.base_mva, converged: solution.is_optimal(), slots })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inapplicable,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inapplicable => "inapplicable",
        }
    }
}

/// Verdicts for C1..C8 at one slot, `verdicts[k]` is condition `k + 1`.
pub type Verdicts = [Verdict; 8];

fn gt(a: f64, b: f64) -> bool {
    a > b + STRICTNESS_MARGIN
}

/// C1 and C2: the LMP strictly above the respective threshold.
pub fn check_c1_c2(slot: &SlotThresholds) -> [Verdict; 2] {
    [Verdict::from_bool(gt(slot.lambda_p, slot.c1)), Verdict::from_bool(gt(slot.lambda_p, slot.c2))]
}

/// First clauses of C3, C4 and C5, which the threshold-ordering checks use
/// as premises.
pub fn premises(slot: &SlotThresholds) -> (bool, bool, bool) {
    let sum = slot.grad_ch + slot.grad_dc;
    let weighted = slot.grad_ch / slot.eta_dc + slot.grad_dc * slot.eta_ch;
    (gt(sum, 0.0), sum >= 0.0, gt(weighted, 0.0))
}

/// C3..C8 as stated by their sources. C7 is inapplicable when the solve did
/// not converge, since it quantifies over multipliers.
pub fn check_prior_conditions(slot: &SlotThresholds, converged: bool) -> [Verdict; 6] {
    let (gc, gd, lp) = (slot.grad_ch, slot.grad_dc, slot.lambda_p);
    let (c3_1, c4_1, c5_1) = premises(slot);
    let c3 = c3_1 && lp >= slot.c3;
    let c4 = c4_1 && gt(lp, slot.c4);
    let c5 = c5_1 && lp >= 0.0;
    let c6 = gc >= 0.0 && gd >= 0.0 && gt(gc + gd, 0.0) && lp >= 0.0;
    let m = &slot.multipliers;
    let c7 = if converged {
        Verdict::from_bool(lp >= 0.0 && m.circle_dc.abs() <= ACTIVE_TOLERANCE && m.circle_ch.abs() <= ACTIVE_TOLERANCE)
    } else {
        Verdict::Inapplicable
    };
    let c8 = gc.abs() <= STRICTNESS_MARGIN && gt(gd, 0.0) && gt(lp, 0.0);
    [
        Verdict::from_bool(c3),
        Verdict::from_bool(c4),
        Verdict::from_bool(c5),
        Verdict::from_bool(c6),
        c7,
        Verdict::from_bool(c8),
    ]
}

pub fn verdicts(slot: &SlotThresholds, converged: bool) -> Verdicts {
    let [c1, c2] = check_c1_c2(slot);
    let [c3, c4, c5, c6, c7, c8] = check_prior_conditions(slot, converged);
    [c1, c2, c3, c4, c5, c6, c7, c8]
}

/// Residuals of the two stationarity rows and of the LMP reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub storage: usize,
    pub period: usize,
    pub charge: f64,
    pub discharge: f64,
    pub lmp: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.charge.abs().max(self.discharge.abs()).max(self.lmp.abs())
    }
}

pub fn identity_residuals(thresholds: &ThresholdSet) -> Vec<IdentityResiduals> {
    thresholds
        .slots
        .iter()
        .map(|s| IdentityResiduals {
            storage: s.storage,
            period: s.period,
            charge: s.charge_stationarity(),
            discharge: s.discharge_stationarity(),
            lmp: s.lambda_p - s.reconstructed_lmp(),
        })
        .collect()
}

pub fn verify_stationarity_identities(
    case: &NetworkCase,
    solution: &SolutionPoint,
    duals: &DualRecord,
) -> Result<Vec<IdentityResiduals>, ThresholdError> {
    Ok(identity_residuals(&compute_thresholds(case, solution, duals)?))
}

/// One failed inclusion check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionViolation {
    pub storage: usize,
    pub period: usize,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InclusionReport {
    /// Number of individual implications evaluated.
    pub checked: usize,
    pub violations: Vec<InclusionViolation>,
}

impl InclusionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: InclusionReport) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
    }
}

/// Threshold orderings and verdict-level implications between conditions.
pub fn verify_inclusions(thresholds: &ThresholdSet, verdicts: &[Verdicts]) -> InclusionReport {
    let mut report = InclusionReport::default();
    for (s, v) in thresholds.slots.iter().zip(verdicts) {
        let mut check = |ok: bool, rule: &str| {
            report.checked += 1;
            if !ok {
                report.violations.push(InclusionViolation { storage: s.storage, period: s.period, rule: rule.into() });
            }
        };
        let (c3_1, c4_1, c5_1) = premises(s);
        check(s.c2 >= s.c1 - STRICTNESS_MARGIN, "c1 <= c2");
        if c3_1 {
            check(s.c3 > s.c2, "C3 premise implies c3 > c2");
        }
        if c4_1 {
            check(s.c4 >= s.c2 - STRICTNESS_MARGIN, "C4 premise implies c4 >= c2");
        }
        if c5_1 {
            check(0.0 > s.c2, "C5 premise implies c2 < 0");
        }
        for k in 2..8 {
            if v[k].holds() {
                check(v[1].holds(), &format!("C{} implies C2", k + 1));
            }
        }
        if v[1].holds() {
            check(v[0].holds(), "C2 implies C1");
        }
        if v[5].holds() {
            check(v[4].holds(), "C6 implies C5");
        }
        if v[7].holds() {
            check(v[5].holds(), "C8 implies C6");
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(grad_ch: f64, grad_dc: f64, eta: f64, lambda_p: f64) -> SlotThresholds {
        let mut s = SlotThresholds {
            storage: 0,
            period: 0,
            bus: 0,
            lambda_p,
            c1: 0.0,
            c2: c2_threshold(grad_ch, grad_dc, eta, eta),
            c3: -grad_ch,
            c4: -grad_ch,
            grad_ch,
            grad_dc,
            gamma: 0.0,
            p_ch: 0.0,
            p_dc: 0.0,
            p_ch_max: 1.0,
            p_dc_max: 1.0,
            eta_ch: eta,
            eta_dc: eta,
            interval: 1.0,
            multipliers: Multipliers::default(),
        };
        s.c1 = s.c2 - s.threshold_spread();
        s
    }

    #[test]
    fn zero_gradients_and_multipliers_give_zero_thresholds() {
        let s = slot(0.0, 0.0, 0.9, 1.0);
        assert_eq!((s.c1, s.c2), (0.0, 0.0));
    }

    #[test]
    fn c2_for_five_and_fifteen() {
        let c2 = c2_threshold(5.0, 15.0, 0.9, 0.9);
        let oracle = (5.0 / 0.9 + 15.0 * 0.9) / (0.9 - 1.0 / 0.9);
        assert!((c2 - oracle).abs() < 1e-12);
        assert!((c2 - -90.26).abs() < 5e-3);
    }

    #[test]
    fn strict_comparisons_at_the_boundary() {
        let s = slot(5.0, 15.0, 0.9, -11.56);
        assert_eq!(check_c1_c2(&s), [Verdict::Holds, Verdict::Holds]);
        let at = slot(5.0, 15.0, 0.9, c2_threshold(5.0, 15.0, 0.9, 0.9));
        assert_eq!(check_c1_c2(&at)[1], Verdict::Fails);
    }

    #[test]
    fn prior_conditions_by_hand() {
        let s = slot(5.0, 15.0, 0.9, 10.0);
        let v = check_prior_conditions(&s, true);
        assert_eq!(v[2], Verdict::Holds, "C5");
        assert_eq!(v[3], Verdict::Holds, "C6");
        assert!(s.c3 > s.c2);
        assert_eq!(s.c3, -5.0);

        let z = slot(0.0, 0.0, 0.9, 1.0);
        let (c3_1, c4_1, _) = premises(&z);
        assert!(!c3_1 && c4_1);
        assert_eq!(check_prior_conditions(&z, true)[0], Verdict::Fails);
    }

    #[test]
    fn negative_lmp_fails_every_prior_condition() {
        let s = slot(-8.0, 15.0, 0.95, -10.0);
        assert_eq!(check_c1_c2(&s), [Verdict::Holds, Verdict::Holds]);
        assert!(check_prior_conditions(&s, true).iter().all(|v| *v == Verdict::Fails));
    }

    #[test]
    fn c7_needs_a_converged_solve() {
        let s = slot(5.0, 15.0, 0.9, 10.0);
        assert_eq!(check_prior_conditions(&s, false)[4], Verdict::Inapplicable);
        assert_eq!(check_prior_conditions(&s, true)[4], Verdict::Holds);
    }

    #[test]
    fn perturbed_lower_multiplier_shows_in_charge_row() {
        let mut s = slot(5.0, 15.0, 0.9, 10.0);
        // Make the slot stationary: lambda_p = -grad_ch + ch_lower.
        s.multipliers.ch_lower = 15.0;
        s.multipliers.dc_lower = 5.0;
        assert!(s.charge_stationarity().abs() < 1e-12);
        assert!(s.discharge_stationarity().abs() < 1e-12);
        s.multipliers.ch_lower += 0.1;
        assert!((s.charge_stationarity().abs() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn active_relax_cut_separates_thresholds() {
        let mut s = slot(5.0, 15.0, 0.9, 10.0);
        s.multipliers.relax_cut = 0.5;
        s.c1 = s.c2 - s.threshold_spread();
        assert!(s.c2 > s.c1);
    }

    #[test]
    fn inclusions_hold_on_synthetic_grid() {
        let mut set = ThresholdSet { base_mva: 100.0, converged: true, slots: Vec::new() };
        for gc in [-20.0, -5.0, 0.0, 5.0] {
            for gd in [-5.0, 0.0, 15.0] {
                for lp in [-100.0, -10.0, 0.0, 30.0] {
                    set.slots.push(slot(gc, gd, 0.9, lp));
                }
            }
        }
        let v: Vec<Verdicts> = set.slots.iter().map(|s| verdicts(s, true)).collect();
        let report = verify_inclusions(&set, &v);
        assert!(report.checked > set.slots.len());
        // C7 ignores the gradients, so with gradients pulling c2 above zero
        // it can hold while C2 fails; every other implication must hold.
        assert!(report.violations.iter().all(|v| v.rule == "C7 implies C2"), "{:?}", report.violations);
    }
}
