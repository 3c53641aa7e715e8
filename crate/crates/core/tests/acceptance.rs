//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use storage_opf::bundled;
use storage_opf::conditions::{premises, verify_stationarity_identities, ConditionReport, Verdict};
use storage_opf::experiment::{compare, CompareOutcome, Overrides};
use storage_opf::formulation::build_relaxed;
use storage_opf::ipm::{solve, SolverOptions};
use storage_opf::mip::{solve_mip, BnbOptions, BnbStatus};
use storage_opf::network::NetworkCase;
use storage_opf::nlp::{derivative_check, Nlp};

use common::QuadraticToy;

const MARGIN: f64 = 1e-9;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn(&mut Ledger) -> Outcome,
}

/// Condition reports from every relaxed solve, for the ordering checks.
#[derive(Default)]
struct Ledger {
    reports: Vec<(String, ConditionReport)>,
}

fn serial() -> BnbOptions {
    BnbOptions { serial: true, ..Default::default() }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn derivatives(_: &mut Ledger) -> Outcome {
    let mut worst = 0.0f64;
    let mut points = 0;
    for (i, (name, _)) in bundled::ALL.iter().enumerate() {
        let case = bundled::case(name).unwrap();
        let problem = build_relaxed(&case).map_err(|e| e.to_string())?;
        let mut rng = StdRng::seed_from_u64(100 + i as u64);
        for _ in 0..100 {
            let x = common::random_interior_point(&case, &mut rng);
            let y: Vec<f64> = (0..problem.eq_count()).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let z: Vec<f64> = (0..problem.ineq_count()).map(|_| rng.gen_range(0.0..50.0)).collect();
            let e = derivative_check(&problem, &x, &y, &z, 1e-6).map_err(|e| e.to_string())?;
            ensure(e.max() <= 1e-6, || format!("{name}: {e:?}"))?;
            worst = worst.max(e.max());
            points += 1;
        }
    }
    Ok(format!("{points} points, worst relative error {worst:.2e}"))
}

fn kkt_identities(ledger: &mut Ledger) -> Outcome {
    let mut worst = 0.0f64;
    for (name, _) in bundled::ALL {
        let case = bundled::case(name).unwrap();
        let (sol, duals) = solve(&build_relaxed(&case).unwrap(), &SolverOptions::default(), None);
        ensure(sol.is_optimal(), || format!("{name}: {}", sol.status.name()))?;
        let residuals = verify_stationarity_identities(&case, &sol, &duals).map_err(|e| e.to_string())?;
        let m = residuals.iter().map(|r| r.max()).fold(0.0, f64::max);
        ensure(m <= 1e-6, || format!("{name}: identity residual {m:e}"))?;
        worst = worst.max(m);
        ledger.reports.push((name.to_string(), ConditionReport::build(&case, &sol, &duals).unwrap()));
    }
    Ok(format!("max identity residual {worst:.2e}"))
}

/// Checks an outcome as an exact relaxation with C1 and C2 holding in
/// every slot.
fn exact_with_c1_c2(label: &str, o: &CompareOutcome) -> Result<(), String> {
    let r = &o.record;
    ensure(o.relaxed.0.is_optimal(), || format!("{label}: relaxed {}", r.relaxed_status))?;
    ensure(o.mip.status == BnbStatus::Optimal, || format!("{label}: mip {}", r.mip_status))?;
    for s in &o.report.slots {
        let (n, t) = (s.thresholds.storage, s.thresholds.period + 1);
        ensure(s.verdicts[0] == Verdict::Holds, || format!("{label}: C1 {} at ({n},{t})", s.verdicts[0].name()))?;
        ensure(s.verdicts[1] == Verdict::Holds, || format!("{label}: C2 {} at ({n},{t})", s.verdicts[1].name()))?;
    }
    ensure(r.relaxed_scd <= 1e-8, || format!("{label}: SCD {:e}", r.relaxed_scd))?;
    let d = r.relative_difference.unwrap_or(f64::INFINITY);
    ensure(d <= 1e-5, || format!("{label}: objective difference {d:e}"))
}

fn run_compare(ledger: &mut Ledger, label: String, case: &NetworkCase) -> Result<CompareOutcome, String> {
    let o = compare(case, &serial()).map_err(|e| format!("{label}: {e}"))?;
    ledger.reports.push((label, o.report.clone()));
    Ok(o)
}

fn fee_exactness(ledger: &mut Ledger) -> Outcome {
    let mut worst_scd = 0.0f64;
    let mut worst_diff = 0.0f64;
    for name in ["micro3", "case9"] {
        let base = bundled::case(name).unwrap();
        for (k, &(f, g)) in common::FEE_SCENARIOS.iter().enumerate() {
            let o = Overrides { charge_fee: Some(f), discharge_fee: Some(g), ..Default::default() };
            let label = format!("{name} S{}", k + 1);
            let out = run_compare(ledger, label.clone(), &o.apply(&base))?;
            exact_with_c1_c2(&label, &out)?;
            worst_scd = worst_scd.max(out.record.relaxed_scd);
            worst_diff = worst_diff.max(out.record.relative_difference.unwrap());
        }
    }
    Ok(format!("12 scenarios exact, max SCD {worst_scd:.2e}, max objective difference {worst_diff:.2e}"))
}

fn negative_lmp(ledger: &mut Ledger) -> Outcome {
    let base = bundled::case("neglmp").unwrap();
    let mut lmps = Vec::new();
    for &(f, g, b) in &common::NEGATIVE_PRICE_SCENARIOS {
        let o = Overrides { charge_fee: Some(f), discharge_fee: Some(g), rg_cost: Some(b), ..Default::default() };
        let label = format!("neglmp rg_cost {b}");
        let out = run_compare(ledger, label.clone(), &o.apply(&base))?;
        exact_with_c1_c2(&label, &out)?;
        let min_lmp = out.record.min_lmp.unwrap_or(f64::NAN);
        ensure(min_lmp < 0.0, || format!("{label}: min LMP {min_lmp}"))?;
        for k in 3..=8 {
            let v = out.report.condition(k);
            ensure(v == Verdict::Fails, || format!("{label}: C{k} {}", v.name()))?;
        }
        lmps.push(format!("{min_lmp:.2}"));
    }
    Ok(format!("min LMPs [{}] $/MWh, C3-C8 fail, C1/C2 hold, exact", lmps.join(", ")))
}

fn orderings(ledger: &mut Ledger) -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    for (label, report) in &ledger.reports {
        for s in &report.slots {
            let th = &s.thresholds;
            let v = &s.verdicts;
            let at = format!("{label} ({},{})", th.storage, th.period + 1);
            let (p3, p4, p5) = premises(th);
            let mut check = |ok: bool, rule: &str| {
                checked += 1;
                if !ok {
                    violations.push(format!("{at}: {rule}"));
                }
            };
            check(th.c1 <= th.c2 + MARGIN, "c1 <= c2");
            for k in 2..8 {
                if v[k] == Verdict::Holds {
                    check(v[1] == Verdict::Holds, &format!("C{} holds while C2 does not", k + 1));
                }
            }
            if p3 {
                check(th.c3 > th.c2, "c3 > c2 under its premise");
            }
            if p4 {
                check(th.c4 >= th.c2 - MARGIN, "c4 >= c2 under its premise");
            }
            if p5 {
                check(th.c2 < 0.0, "c2 < 0 under its premise");
            }
        }
    }
    ensure(!ledger.reports.is_empty(), || "no solves recorded".into())?;
    ensure(violations.is_empty(), || violations.join("; "))?;
    Ok(format!("{checked} checks over {} solves, 0 violations", ledger.reports.len()))
}

fn mip_oracle(_: &mut Ledger) -> Outcome {
    let mut notes = Vec::new();
    for case in [common::energy_burning_case(4), bundled::case("micro3").unwrap()] {
        ensure(case.storages.len() * case.periods() <= 4, || format!("{} too large", case.name))?;
        let r = solve_mip(&case, &serial()).map_err(|e| e.to_string())?;
        let got = r.objective.ok_or_else(|| format!("{}: {:?}", case.name, r.status))?;
        let best = common::enumerate_pure_modes(&case, &SolverOptions::default())
            .ok_or_else(|| format!("{}: no assignment solved", case.name))?;
        let d = (got - best).abs() / best.abs().max(1.0);
        ensure(d <= 1e-6, || format!("{}: {got} vs enumeration {best}", case.name))?;
        notes.push(format!("{} {} nodes, difference {d:.1e}", case.name, r.nodes_explored));
    }
    Ok(notes.join("; "))
}

fn toys(_: &mut Ledger) -> Outcome {
    let opts = SolverOptions::default();
    let (sol, duals) = solve(&QuadraticToy::square_above_one(), &opts, None);
    let (ex, ez) = ((sol.x[0] - 1.0).abs(), (duals.ineq[0] - 2.0).abs());
    ensure(sol.is_optimal() && ex <= 1e-8 && ez <= 1e-8, || format!("square: x err {ex:e}, z err {ez:e}"))?;
    let (sol, duals) = solve(&QuadraticToy::linear_in_box(), &opts, None);
    let ex2 = (sol.x[0] - 3.0).abs();
    let ez2 = (duals.ineq[0] - 1.0).abs().max(duals.ineq[1].abs());
    ensure(sol.is_optimal() && ex2 <= 1e-8 && ez2 <= 1e-8, || format!("linear: x err {ex2:e}, z err {ez2:e}"))?;
    Ok(format!("max errors x {:.1e}, multipliers {:.1e}", ex.max(ex2), ez.max(ez2)))
}

fn main() {
    let criteria = [
        Criterion { name: "derivative suite", limit: Duration::from_secs(30), run: derivatives },
        Criterion { name: "stationarity identities", limit: Duration::from_secs(60), run: kkt_identities },
        Criterion { name: "fee scenarios exact", limit: Duration::from_secs(300), run: fee_exactness },
        Criterion { name: "negative LMP sweep", limit: Duration::from_secs(300), run: negative_lmp },
        Criterion { name: "threshold orderings", limit: Duration::from_secs(60), run: orderings },
        Criterion { name: "branch-and-bound vs enumeration", limit: Duration::from_secs(120), run: mip_oracle },
        Criterion { name: "solver toys", limit: Duration::from_secs(1), run: toys },
    ];
    let mut ledger = Ledger::default();
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)(&mut ledger);
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            ensure(elapsed <= c.limit, || format!("took {:.1} s, limit {} s", elapsed.as_secs_f64(), c.limit.as_secs()))
                .map(|_| msg)
        });
        match outcome {
            Ok(msg) => println!("PASS {} ({:.2} s): {msg}", c.name, elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} ({:.2} s): {msg}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
