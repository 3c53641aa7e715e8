//! Loads a case (a path or a bundled name), validates it and prints its size.
//!
//!     cargo run --example inspect_case -- case9

use storage_opf::network::{load_case, validate};

fn main() -> anyhow::Result<()> {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "micro3".into());
    let case = match storage_opf::bundled::case(&arg) {
        Some(c) => c,
        None => load_case(&arg)?,
    };
    println!("{}: base {} MVA, {} periods of {} h", case.name, case.base_mva, case.periods(), case.time_grid.interval);
    println!(
        "  {} buses, {} branches, {} generators, {} renewables, {} storages, {} SVCs",
        case.buses.len(),
        case.branches.len(),
        case.generators.len(),
        case.renewables.len(),
        case.storages.len(),
        case.svcs.len()
    );
    for (t, _) in case.time_grid.load_p.first().into_iter().flatten().enumerate() {
        let p: f64 = case.time_grid.load_p.iter().map(|l| l[t]).sum();
        println!("  t={} total load {:.1} MW", t + 1, p * case.base_mva);
    }
    for (n, s) in case.storages.iter().enumerate() {
        println!(
            "  storage {n} at bus {}: eta {}/{}, SOC {:.1} in [{:.1}, {:.1}] MWh",
            s.bus,
            s.eta_ch,
            s.eta_dc,
            s.soc_initial * case.base_mva,
            s.soc_min * case.base_mva,
            s.soc_max * case.base_mva
        );
    }
    let problems = validate(&case);
    if problems.is_empty() {
        println!("valid");
    } else {
        for v in problems {
            println!("invalid: {v}");
        }
    }
    Ok(())
}
