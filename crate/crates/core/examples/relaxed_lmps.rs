//! Solves the relaxed model and prints the locational marginal prices and
//! the storage schedule.
//!
//!     cargo run --release --example relaxed_lmps -- case9

use storage_opf::formulation::{build_relaxed, soc_trajectory, VariableLayout};
use storage_opf::ipm::{scaled_kkt_residuals, solve, SolverOptions};

fn main() -> anyhow::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "case9".into());
    let case = storage_opf::cli::resolve_case(&name)?;
    let problem = build_relaxed(&case)?;
    let (sol, duals) = solve(&problem, &SolverOptions::default(), None);
    println!("{}: {} after {} iterations, objective {:.4} $", case.name, sol.status.name(), sol.iterations, sol.objective);
    let r = scaled_kkt_residuals(&problem, &sol, &duals)?;
    println!(
        "residuals: stationarity {:.1e}, feasibility {:.1e}, complementarity {:.1e}",
        r.stationarity, r.feasibility, r.complementarity
    );

    println!("\nLMP ($/MWh)");
    print!("{:>6}", "bus");
    for t in 0..case.periods() {
        print!("{:>10}", format!("t={}", t + 1));
    }
    println!();
    for (j, bus) in case.buses.iter().enumerate() {
        print!("{:>6}", bus.id);
        for t in 0..case.periods() {
            print!("{:>10.3}", duals.lmp(j, t) / case.base_mva);
        }
        println!();
    }

    let l = VariableLayout::new(&case);
    for n in 0..case.storages.len() {
        let ch: Vec<f64> = (0..case.periods()).map(|t| sol.x[l.p_ch(n, t)]).collect();
        let dc: Vec<f64> = (0..case.periods()).map(|t| sol.x[l.p_dc(n, t)]).collect();
        let soc = soc_trajectory(&case, n, &ch, &dc);
        println!("\nstorage {n}");
        for t in 0..case.periods() {
            println!(
                "  t={}  charge {:8.3} MW  discharge {:8.3} MW  SOC {:8.3} MWh",
                t + 1,
                ch[t] * case.base_mva,
                dc[t] * case.base_mva,
                soc[t] * case.base_mva
            );
        }
    }
    Ok(())
}
