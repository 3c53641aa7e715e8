//! Bijection between named model variables and the flat decision vector.

use std::fmt;

use crate::network::NetworkCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Voltage,
    Angle,
    GenP,
    GenQ,
    ReserveUp,
    ReserveDown,
    RgP,
    RgQ,
    Charge,
    Discharge,
    StorageQ,
    SvcQ,
}

impl VarKind {
    pub const ALL: [VarKind; 12] = [
        VarKind::Voltage,
        VarKind::Angle,
        VarKind::GenP,
        VarKind::GenQ,
        VarKind::ReserveUp,
        VarKind::ReserveDown,
        VarKind::RgP,
        VarKind::RgQ,
        VarKind::Charge,
        VarKind::Discharge,
        VarKind::StorageQ,
        VarKind::SvcQ,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            VarKind::Voltage => "V",
            VarKind::Angle => "theta",
            VarKind::GenP => "p_g",
            VarKind::GenQ => "q_g",
            VarKind::ReserveUp => "ru",
            VarKind::ReserveDown => "rd",
            VarKind::RgP => "p_rg",
            VarKind::RgQ => "q_rg",
            VarKind::Charge => "p_ch",
            VarKind::Discharge => "p_dc",
            VarKind::StorageQ => "q_ess",
            VarKind::SvcQ => "q_svc",
        }
    }

    fn slot(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }
}

/// A located variable: kind, entity position (bus/device index) and period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId {
    pub kind: VarKind,
    pub entity: usize,
    pub period: usize,
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},t={}]", self.kind.symbol(), self.entity, self.period + 1)
    }
}

/// Contiguous blocks, one per [`VarKind`], each laid out entity-major:
/// `offset(kind) + entity * T + t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableLayout {
    periods: usize,
    counts: [usize; 12],
    offsets: [usize; 12],
    total: usize,
}

impl VariableLayout {
    pub fn new(case: &NetworkCase) -> Self {
        let nb = case.buses.len();
        let ng = case.generators.len();
        let nr = case.renewables.len();
        let ns = case.storages.len();
        let nv = case.svcs.len();
        let counts = [nb, nb, ng, ng, ng, ng, nr, nr, ns, ns, ns, nv];
        Self::from_counts(case.periods(), counts)
    }

    fn from_counts(periods: usize, counts: [usize; 12]) -> Self {
        let mut offsets = [0; 12];
        let mut total = 0;
        for k in 0..12 {
            offsets[k] = total;
            total += counts[k] * periods;
        }
        Self { periods, counts, offsets, total }
    }

    pub fn dimension(&self) -> usize {
        self.total
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn count(&self, kind: VarKind) -> usize {
        self.counts[kind.slot()]
    }

    pub fn block_len(&self, kind: VarKind) -> usize {
        self.counts[kind.slot()] * self.periods
    }

    #[inline]
    pub fn index(&self, kind: VarKind, entity: usize, period: usize) -> usize {
        let s = kind.slot();
        debug_assert!(entity < self.counts[s] && period < self.periods);
        self.offsets[s] + entity * self.periods + period
    }

    pub fn locate(&self, index: usize) -> Option<VarId> {
        if index >= self.total {
            return None;
        }
        let s = (0..12).rev().find(|&s| self.offsets[s] <= index && self.counts[s] > 0)?;
        let rel = index - self.offsets[s];
        Some(VarId { kind: VarKind::ALL[s], entity: rel / self.periods, period: rel % self.periods })
    }

    pub fn name(&self, index: usize) -> String {
        self.locate(index).map(|v| v.to_string()).unwrap_or_else(|| format!("x[{index}]"))
    }

    // Shorthands used by the row builders.
    pub fn v(&self, bus: usize, t: usize) -> usize {
        self.index(VarKind::Voltage, bus, t)
    }
    pub fn theta(&self, bus: usize, t: usize) -> usize {
        self.index(VarKind::Angle, bus, t)
    }
    pub fn p_ch(&self, n: usize, t: usize) -> usize {
        self.index(VarKind::Charge, n, t)
    }
    pub fn p_dc(&self, n: usize, t: usize) -> usize {
        self.index(VarKind::Discharge, n, t)
    }
}
