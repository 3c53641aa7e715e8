mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use storage_opf::bundled;
use storage_opf::formulation::{build_exact, build_relaxed, ConstraintKind, Mode, ModeAssignment, VariableLayout};
use storage_opf::network::NetworkCase;
use storage_opf::nlp::Nlp;

fn expected_counts(case: &NetworkCase) -> BTreeMap<ConstraintKind, usize> {
    use ConstraintKind::*;
    let t = case.periods();
    let (b, l, g, r, s, v) = (
        case.buses.len(),
        case.branches.len(),
        case.generators.len(),
        case.renewables.len(),
        case.storages.len(),
        case.svcs.len(),
    );
    let mut m = BTreeMap::new();
    for (kinds, n) in [
        (&[ActiveBalance, ReactiveBalance, VLower, VUpper][..], b * t),
        (&[AngleRef, SystemReserveUp, SystemReserveDown][..], t),
        (&[Thermal][..], l * t),
        (
            &[
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
            ][..],
            g * t,
        ),
        (&[RgPLower, RgPUpper, RgCircle][..], r * t),
        (&[ChLower, ChUpper, DcLower, DcUpper, CircleDc, CircleCh, SocLower, SocUpper, RelaxCut][..], s * t),
        (&[SocTerminal][..], s),
        (&[SvcQLower, SvcQUpper][..], v * t),
    ] {
        for &k in kinds {
            if n > 0 {
                m.insert(k, n);
            }
        }
    }
    m
}

#[test]
fn row_counts_match_closed_form() {
    for (name, _) in bundled::ALL {
        let case = bundled::case(name).unwrap();
        let problem = build_relaxed(&case).unwrap();
        assert_eq!(problem.row_counts(), expected_counts(&case), "{name}");
    }
}

#[test]
fn every_row_has_a_distinct_handle() {
    for (name, _) in bundled::ALL {
        let problem = build_relaxed(&bundled::case(name).unwrap()).unwrap();
        let (eq, ineq) = problem.handles();
        assert_eq!(eq.len(), problem.eq_count());
        assert_eq!(ineq.len(), problem.ineq_count());
        let all: HashSet<_> = eq.iter().chain(&ineq).collect();
        assert_eq!(all.len(), eq.len() + ineq.len(), "{name}");
    }
}

fn mode_strategy(slots: usize) -> impl Strategy<Value = Vec<Mode>> {
    prop::collection::vec(prop::sample::select(vec![Mode::Free, Mode::ChargeOnly, Mode::DischargeOnly]), slots)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_rows_extend_relaxed_rows(modes in mode_strategy(12), seed in any::<u64>()) {
        let case = bundled::case("case9").unwrap();
        let (ns, nt) = (case.storages.len(), case.periods());
        let mut assignment = ModeAssignment::free(ns, nt);
        for (k, &m) in modes.iter().enumerate() {
            assignment.set(k / nt, k % nt, m);
        }
        let relaxed = build_relaxed(&case).unwrap();
        let exact = build_exact(&case, &assignment).unwrap();

        let layout = VariableLayout::new(&case);
        let mut x = common::random_interior_point(&case, &mut StdRng::seed_from_u64(seed));
        for n in 0..ns {
            for t in 0..nt {
                match assignment.get(n, t) {
                    Mode::ChargeOnly => x[layout.p_dc(n, t)] = 0.0,
                    Mode::DischargeOnly => x[layout.p_ch(n, t)] = 0.0,
                    Mode::Free => {}
                }
            }
        }

        let (r_eq_h, r_in_h) = relaxed.handles();
        let (x_eq_h, x_in_h) = exact.handles();
        let (r_eq, r_in) = relaxed.constraint_values(&x).unwrap();
        let (x_eq, x_in) = exact.constraint_values(&x).unwrap();
        prop_assert_eq!(&r_in_h, &x_in_h);
        prop_assert_eq!(&r_in, &x_in);
        let fixed = x_eq_h.iter().filter(|h| matches!(h.kind, ConstraintKind::FixCharge | ConstraintKind::FixDischarge)).count();
        prop_assert_eq!(fixed, assignment.fixed_count());
        for (h, v) in x_eq_h.iter().zip(&x_eq) {
            match r_eq_h.iter().position(|r| r == h) {
                Some(i) => prop_assert_eq!(r_eq[i], *v),
                None => prop_assert_eq!(*v, 0.0, "fixing row {} must vanish on the projected point", h),
            }
        }
    }
}
