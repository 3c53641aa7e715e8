use std::fmt;

use serde::{Deserialize, Serialize};

/// Which family a constraint row belongs to. Two-sided bounds get one kind
/// per side so that each handle names exactly one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    ActiveBalance,
    ReactiveBalance,
    AngleRef,
    ChLower,
    ChUpper,
    DcLower,
    DcUpper,
    CircleDc,
    CircleCh,
    SocLower,
    SocUpper,
    SocTerminal,
    RelaxCut,
    GenPLower,
    GenPUpper,
    GenQLower,
    GenQUpper,
    RampUp,
    RampDown,
    ReserveRuLower,
    ReserveRuUpper,
    ReserveRuHeadroom,
    ReserveRdLower,
    ReserveRdUpper,
    ReserveRdHeadroom,
    SystemReserveUp,
    SystemReserveDown,
    RgPLower,
    RgPUpper,
    RgCircle,
    SvcQLower,
    SvcQUpper,
    VLower,
    VUpper,
    Thermal,
    /// `p_ch = 0` added by a discharge-only mode.
    FixCharge,
    /// `p_dc = 0` added by a charge-only mode.
    FixDischarge,
}

impl ConstraintKind {
    pub fn name(self) -> &'static str {
        use ConstraintKind::*;
        match self {
            ActiveBalance => "active_balance",
            ReactiveBalance => "reactive_balance",
            AngleRef => "angle_ref",
            ChLower => "ch_lower",
            ChUpper => "ch_upper",
            DcLower => "dc_lower",
            DcUpper => "dc_upper",
            CircleDc => "circle_dc",
            CircleCh => "circle_ch",
            SocLower => "soc_lower",
            SocUpper => "soc_upper",
            SocTerminal => "soc_terminal",
            RelaxCut => "relax_cut",
            GenPLower => "gen_p_lower",
            GenPUpper => "gen_p_upper",
            GenQLower => "gen_q_lower",
            GenQUpper => "gen_q_upper",
            RampUp => "ramp_up",
            RampDown => "ramp_down",
            ReserveRuLower => "reserve_ru_lower",
            ReserveRuUpper => "reserve_ru_upper",
            ReserveRuHeadroom => "reserve_ru_headroom",
            ReserveRdLower => "reserve_rd_lower",
            ReserveRdUpper => "reserve_rd_upper",
            ReserveRdHeadroom => "reserve_rd_headroom",
            SystemReserveUp => "system_reserve_up",
            SystemReserveDown => "system_reserve_down",
            RgPLower => "rg_p_lower",
            RgPUpper => "rg_p_upper",
            RgCircle => "rg_circle",
            SvcQLower => "svc_q_lower",
            SvcQUpper => "svc_q_upper",
            VLower => "v_lower",
            VUpper => "v_upper",
            Thermal => "thermal",
            FixCharge => "fix_charge",
            FixDischarge => "fix_discharge",
        }
    }
}

/// Names one scalar constraint row and therefore one multiplier slot.
/// `entity` is the position of the bus, branch or device in its case list;
/// `period` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstraintHandle {
    pub kind: ConstraintKind,
    pub entity: usize,
    pub period: usize,
}

impl ConstraintHandle {
    pub fn new(kind: ConstraintKind, entity: usize, period: usize) -> Self {
        Self { kind, entity, period }
    }
}

impl fmt::Display for ConstraintHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},t={}]", self.kind.name(), self.entity, self.period + 1)
    }
}
