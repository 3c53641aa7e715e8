use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use storage_opf::bundled;
use storage_opf::network::save_case;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storage-opf"))
        .args(args)
        .env_remove("STORAGE_OPF_LOG")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Rows of a CSV with `#` comment lines, keyed by header.
fn read_rows(csv_text: &str) -> Vec<HashMap<String, String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv_text.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn body(csv_text: &str) -> String {
    csv_text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn write_spec(dir: &Path, json: &str) -> String {
    let p = dir.join("spec.json");
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_relaxed_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve-relaxed", "micro3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("status optimal"));
    for f in ["solution.json", "duals.csv", "conditions.csv"] {
        let p = dir.path().join(f);
        assert!(p.exists() && fs::metadata(&p).unwrap().len() > 0, "{f} missing");
    }
}

#[test]
fn malformed_case_exits_one_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    fs::write(&p, "{ \"base_mva\": 100, \"buses\": [").unwrap();
    let out = run(&["solve-relaxed", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).starts_with("error:"), "{}", text(&out.stderr));
    assert!(!dir.path().join("solution.json").exists());
}

#[test]
fn overloaded_case_is_reported_infeasible() {
    let mut case = bundled::case("micro3").unwrap();
    let capacity: f64 = case.generators.iter().map(|g| g.p_max).sum::<f64>()
        + case.renewables.iter().map(|r| r.forecast.iter().copied().fold(0.0, f64::max)).sum::<f64>()
        + case.storages.iter().map(|s| s.p_dc_max).sum::<f64>();
    for l in case.time_grid.load_p.iter_mut().flatten() {
        *l *= 20.0;
    }
    let peak: f64 = (0..case.periods()).map(|t| case.time_grid.load_p.iter().map(|l| l[t]).sum::<f64>()).fold(0.0, f64::max);
    assert!(peak > capacity, "load {peak} should exceed capacity {capacity}");

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("overloaded.json");
    save_case(&case, &p).unwrap();
    let out = run(&["solve-relaxed", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("infeasible_detected"), "{}", text(&out.stdout));
}

#[test]
fn check_conditions_reads_a_saved_solution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(run(&["solve-relaxed", "micro3", "--out", d]).status.code(), Some(0));
    let solution = dir.path().join("solution.json");
    let csv_path = dir.path().join("from_file.csv");
    let out = run(&[
        "check-conditions",
        "micro3",
        "--solution",
        solution.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["conditions"][1][1], "holds");
    assert_eq!(fs::read(&csv_path).unwrap(), fs::read(dir.path().join("conditions.csv")).unwrap());

    // A solution for a different case does not fit.
    let out = run(&["check-conditions", "case9", "--solution", solution.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solver.toml");
    fs::write(&cfg, "kkt_tolerance = 1e-7\nmax_iterations = 300\n").unwrap();
    let out_dir = dir.path().join("o");
    let args = ["solve-relaxed", "micro3", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    assert_eq!(run(&args).status.code(), Some(0));

    fs::write(&cfg, "kkt_tolerance = 1e-7\nmax_iterations = 1\n").unwrap();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stdout).contains("max_iter"));

    fs::write(&cfg, "no_such_option = 3\n").unwrap();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("no_such_option"));

    fs::write(&cfg, "kkt_tolerance = 1e-7\n").unwrap();
    let mut with_flag = args.to_vec();
    with_flag.extend(["--tol", "-1"]);
    assert_eq!(run(&with_flag).status.code(), Some(1));
}

#[test]
fn log_path_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("iterations.tsv");
    let out = Command::new(env!("CARGO_BIN_EXE_storage-opf"))
        .args(["solve-relaxed", "micro3", "--out", dir.path().to_str().unwrap()])
        .env("STORAGE_OPF_LOG", &log)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let lines = fs::read_to_string(&log).unwrap();
    assert!(lines.lines().count() > 2, "{lines}");
}

#[test]
fn solve_mip_reports_modes_and_powers() {
    let out = run(&["solve-mip", "micro3", "--serial"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["status"], "optimal");
    assert_eq!(doc["nodes"], 1);
    assert_eq!(doc["charge"][0].as_array().unwrap().len(), 4);
    assert_eq!(run(&["solve-mip", "micro3", "--gap", "-1"]).status.code(), Some(1));
}

#[test]
fn zero_storage_compare_is_trivially_exact() {
    let mut case = bundled::case("case9").unwrap();
    case.storages.clear();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nostorage.json");
    save_case(&case, &p).unwrap();
    let out = run(&["compare", p.to_str().unwrap(), "--serial"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let rows = read_rows(&text(&out.stdout));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r["exact"], "true");
    assert_eq!(r["nodes"], "1");
    assert_eq!(r["relaxed_objective"].parse::<f64>().unwrap(), r["mip_objective"].parse::<f64>().unwrap());
    for k in 1..=8 {
        assert_eq!(r[&format!("C{k}")], "inapplicable");
    }
}

#[test]
fn compare_flags_exact_microcase() {
    let out = run(&["compare", "micro3", "--serial"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &read_rows(&text(&out.stdout))[0];
    assert_eq!(r["exact"], "true");
    assert_eq!(r["nodes"], "1");
    assert_eq!(r["C2"], "holds");
}

#[test]
fn fee_sweep_rows_are_exact_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"discharge_fee": [15], "charge_fee": [5, 0, -10]}"#);
    let out = run(&["sweep", "micro3", "--spec", &spec, "--serial"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let first = text(&out.stdout);
    let rows = read_rows(&first);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r["exact"], "true", "{r:?}");
        assert_eq!(r["C2"], "holds");
        assert_eq!(r["error"], "");
    }
    let charges: Vec<f64> = rows.iter().map(|r| r["charge_fee"].parse().unwrap()).collect();
    assert_eq!(charges, [5.0, 0.0, -10.0]);

    let again = text(&run(&["sweep", "micro3", "--spec", &spec, "--serial"]).stdout);
    assert_eq!(body(&first), body(&again));
}

#[test]
fn negative_renewable_cost_drives_lmp_negative() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"rg_cost": [-100]}"#);
    let csv_path = dir.path().join("sweep.csv");
    let out = run(&["sweep", "neglmp", "--spec", &spec, "--serial", "--out", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let rows = read_rows(&fs::read_to_string(&csv_path).unwrap());
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert!(r["min_lmp"].parse::<f64>().unwrap() < 0.0);
    for k in 3..=8 {
        assert_eq!(r[&format!("C{k}")], "fails", "C{k}");
    }
    assert!(["holds", "fails", "inapplicable"].contains(&r["C1"].as_str()));
    assert!(["holds", "fails", "inapplicable"].contains(&r["C2"].as_str()));
}

#[test]
fn bad_sweep_specs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for json in [r#"{"charge_fee": []}"#, r#"{}"#, r#"{"charge_fee": [1, 2], "discharge_fee": [1], "mode": "zip"}"#] {
        let spec = write_spec(dir.path(), json);
        let out = run(&["sweep", "micro3", "--spec", &spec]);
        assert_eq!(out.status.code(), Some(1), "{json}");
        assert!(text(&out.stderr).starts_with("error:"), "{json}");
    }
    let spec = write_spec(dir.path(), r#"{"charge_fee": [1, 2, 3], "discharge_fee": [1, 2], "cap": 5}"#);
    assert_eq!(run(&["sweep", "micro3", "--spec", &spec]).status.code(), Some(1));
}

#[test]
fn missing_arguments_are_usage_errors() {
    assert_eq!(run(&["sweep", "micro3"]).status.code(), Some(1));
    assert_eq!(run(&["compare"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
