//! Evaluates the exactness conditions C1..C8 at a relaxed solution and
//! prints the per-slot thresholds next to the LMP.
//!
//!     cargo run --release --example conditions_report -- micro3 -10 15

use storage_opf::conditions::ConditionReport;
use storage_opf::experiment::Overrides;
use storage_opf::formulation::build_relaxed;
use storage_opf::ipm::{solve, SolverOptions};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "micro3".into());
    let fee = |v: Option<String>| v.map(|s| s.parse::<f64>()).transpose();
    let overrides = Overrides { charge_fee: fee(args.next())?, discharge_fee: fee(args.next())?, ..Default::default() };
    let case = overrides.apply(&storage_opf::cli::resolve_case(&name)?);

    let (sol, duals) = solve(&build_relaxed(&case)?, &SolverOptions::default(), None);
    let report = ConditionReport::build(&case, &sol, &duals)?;

    println!("{:>3} {:>3} {:>10} {:>10} {:>10} {:>10} {:>10}  verdicts", "n", "t", "lmp", "c1", "c2", "c3", "scd");
    for s in &report.slots {
        let th = &s.thresholds;
        let marks: String = s.verdicts.iter().map(|v| v.name().chars().next().unwrap()).collect();
        println!(
            "{:>3} {:>3} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.1e}  {marks}",
            th.storage,
            th.period + 1,
            th.lambda_p,
            th.c1,
            th.c2,
            th.c3,
            s.scd
        );
    }
    println!("\n(h = holds, f = fails, i = inapplicable; C1..C8 left to right)");
    for (k, v) in &report.summary.conditions {
        println!("{k}: {}", v.name());
    }
    println!("max SCD {:.2e}, inclusions ok: {}", report.summary.max_scd, report.summary.inclusions.ok());
    Ok(())
}
