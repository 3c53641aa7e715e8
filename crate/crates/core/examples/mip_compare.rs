//! Compares the relaxed model with the exact model solved by
//! branch-and-bound, first on a bundled case and then on a single-bus case
//! where surplus renewable output at a negative price makes the relaxation
//! charge and discharge at once.
//!
//!     cargo run --release --example mip_compare

use storage_opf::experiment::compare;
use storage_opf::mip::{scd_residual, BnbOptions};
use storage_opf::network::parse_case;

const BURN: &str = r#"{
    "name": "burn",
    "base_mva": 100,
    "time": {"T": 4, "dt_hours": 1},
    "buses": [{"id": 1, "voltage_min": 0.9, "voltage_max": 1.1, "is_reference": true}],
    "renewables": [{"bus": 1, "forecast": [80, 90, 60, 85], "cost_linear": -50, "apparent_capacity": 200}],
    "storages": [{"bus": 1, "eta_ch": 0.9, "eta_dc": 0.9, "soc_initial": 20, "soc_min": 0,
        "soc_max": 40, "p_ch_max": 20, "p_dc_max": 20, "apparent_capacity": 30}],
    "svcs": [{"bus": 1, "q_min": -50, "q_max": 50}],
    "loads": {"1": {"p_mw": [70, 60, 75, 65]}}
}"#;

fn main() -> anyhow::Result<()> {
    let opts = BnbOptions::default();
    for case in [storage_opf::bundled::case("micro3").unwrap(), parse_case(BURN)?] {
        let out = compare(&case, &opts)?;
        let r = &out.record;
        println!("{}", case.name);
        println!("  relaxed  {:.6} ({}), SCD {:.2e}", r.relaxed_objective, r.relaxed_status, r.relaxed_scd);
        match r.mip_objective {
            Some(m) => println!("  exact    {m:.6} after {} nodes", r.nodes),
            None => println!("  exact    no incumbent after {} nodes", r.nodes),
        }
        println!("  C2 {}, exact relaxation: {}", r.conditions[1].name(), r.exact);
        if let Some((sol, _)) = &out.mip.incumbent {
            println!("  incumbent SCD {:.2e}", scd_residual(&sol.x, &case).max);
        }
    }
    Ok(())
}
