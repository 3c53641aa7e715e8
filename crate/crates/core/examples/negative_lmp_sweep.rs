//! Drives the renewable cost negative on the congested case and shows that
//! the LMP follows it below zero while C1 and C2 still certify the
//! relaxation.
//!
//!     cargo run --release --example negative_lmp_sweep

use storage_opf::experiment::{sweep, write_sweep_csv, SweepSpec};
use storage_opf::mip::BnbOptions;

fn main() -> anyhow::Result<()> {
    let case = storage_opf::bundled::case("neglmp").unwrap();
    let spec: SweepSpec = serde_json::from_str(
        r#"{"charge_fee": [-8, -5, -3, 15], "discharge_fee": [15, 15, 15, 15],
            "rg_cost": [-10, -20, -30, -100], "mode": "zip"}"#,
    )?;
    let rows = sweep(&case, &spec, &BnbOptions::default())?;
    for row in &rows {
        let o = &row.overrides;
        match &row.outcome {
            Ok(c) => {
                let r = &c.record;
                let verdicts: Vec<_> = r.conditions.iter().map(|v| v.name()).collect();
                println!(
                    "rg_cost {:>6} fees ({:>3}, {:>3}): min LMP {:>9.3}, exact {}, {}",
                    o.rg_cost.unwrap(),
                    o.charge_fee.unwrap(),
                    o.discharge_fee.unwrap(),
                    r.min_lmp.unwrap_or(f64::NAN),
                    r.exact,
                    verdicts.join(" ")
                );
            }
            Err(e) => println!("rg_cost {:?}: {e}", o.rg_cost),
        }
    }
    println!();
    write_sweep_csv(std::io::stdout(), &case, &rows)?;
    Ok(())
}
