//! Command-line front end. Exit codes: 0 success, 1 parse, validation or
//! usage error, 2 solver failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::artifacts::{write_duals_csv, SolutionDocument};
use crate::conditions::ConditionReport;
use crate::experiment::{compare, sweep, write_compare_csv, write_sweep_csv, SweepSpec};
use crate::formulation::{build_relaxed, Mode};
use crate::ipm::{solve, SolverOptions};
use crate::mip::{solve_mip, BnbOptions, BnbStatus};
use crate::network::{load_case, NetworkCase};

/// Environment variable naming the iteration-log file.
pub const LOG_ENV: &str = "STORAGE_OPF_LOG";

#[derive(Debug, Parser)]
#[command(name = "storage-opf", version, about = "Multi-period storage ACOPF with exactness certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Case file, or the name of a bundled case (micro3, case9, neglmp).
    case: String,
    /// TOML file setting solver options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// KKT tolerance; overrides the config file.
    #[arg(long)]
    tol: Option<f64>,
    /// Run single-threaded.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the relaxed model and write solution.json, duals.csv and conditions.csv.
    SolveRelaxed {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Solve the exact model by branch-and-bound.
    SolveMip {
        #[command(flatten)]
        common: Common,
        /// Relative optimality gap.
        #[arg(long, default_value_t = 1e-6)]
        gap: f64,
        #[arg(long)]
        max_nodes: Option<usize>,
        /// Also write the result JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the exactness conditions on a relaxed solution.
    CheckConditions {
        #[command(flatten)]
        common: Common,
        /// Solution document from solve-relaxed; solved afresh when absent.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Write the per-slot CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the relaxed and exact models.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare over a grid of fees and renewable costs.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// JSON sweep specification.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", chain_message(&e));
            1
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn chain_message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

pub fn resolve_case(spec: &str) -> anyhow::Result<NetworkCase> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(case) = crate::bundled::case(spec) {
            return Ok(case);
        }
    }
    Ok(load_case(path)?)
}

fn solver_options(common: &Common) -> anyhow::Result<SolverOptions> {
    let mut opts = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => SolverOptions::default(),
    };
    if let Some(p) = std::env::var_os(LOG_ENV).filter(|v| !v.is_empty()) {
        opts.log_path = Some(p.into());
    }
    if let Some(t) = common.tol {
        opts.kkt_tolerance = t;
    }
    opts.check().map_err(anyhow::Error::msg)?;
    Ok(opts)
}

fn create(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn execute(command: Command, stdout: &mut dyn Write) -> anyhow::Result<i32> {
    match command {
        Command::SolveRelaxed { common, out } => {
            let case = resolve_case(&common.case)?;
            let opts = solver_options(&common)?;
            let problem = build_relaxed(&case)?;
            let (sol, duals) = solve(&problem, &opts, None);
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let doc = SolutionDocument::new(&case, &sol, &duals);
            serde_json::to_writer_pretty(create(&out.join("solution.json"))?, &doc)?;
            write_duals_csv(create(&out.join("duals.csv"))?, &duals)?;
            let report = ConditionReport::build(&case, &sol, &duals)?;
            report.write_csv(create(&out.join("conditions.csv"))?)?;
            writeln!(stdout, "status {}", sol.status.name())?;
            writeln!(stdout, "objective {:.9}", sol.objective)?;
            writeln!(stdout, "iterations {}", sol.iterations)?;
            Ok(if sol.is_optimal() { 0 } else { 2 })
        }
        Command::SolveMip { common, gap, max_nodes, out } => {
            let case = resolve_case(&common.case)?;
            if !(gap >= 0.0 && gap.is_finite()) {
                bail!("--gap must be a nonnegative number");
            }
            let mut opts =
                BnbOptions { solver: solver_options(&common)?, gap_tolerance: gap, serial: common.serial, ..Default::default() };
            if let Some(m) = max_nodes {
                opts.max_nodes = m;
            }
            let r = solve_mip(&case, &opts)?;
            let doc = MipDocument {
                case: case.name.clone(),
                status: r.status,
                objective: r.objective,
                root_objective: r.root_objective,
                best_bound: r.best_bound,
                gap: r.gap,
                nodes: r.nodes_explored,
                failed_nodes: r.failed_nodes,
                infeasible_nodes: r.infeasible_nodes,
                bound_warnings: r.bound_warnings,
                modes: r.incumbent_modes.as_ref().map(|m| {
                    (0..m.storages()).map(|n| (0..m.periods()).map(|t| m.get(n, t)).collect()).collect()
                }),
                charge: r.incumbent.as_ref().map(|(s, _)| storage_powers(&case, &s.x, true)),
                discharge: r.incumbent.as_ref().map(|(s, _)| storage_powers(&case, &s.x, false)),
            };
            let text = serde_json::to_string_pretty(&doc)?;
            if let Some(p) = out {
                fs::write(&p, &text).with_context(|| format!("cannot write {}", p.display()))?;
            }
            writeln!(stdout, "{text}")?;
            Ok(if r.status == BnbStatus::NoIncumbent { 2 } else { 0 })
        }
        Command::CheckConditions { common, solution, out } => {
            let case = resolve_case(&common.case)?;
            let (sol, duals) = match solution {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display()))?;
                    let doc: SolutionDocument =
                        serde_json::from_str(&text).with_context(|| format!("invalid solution {}", p.display()))?;
                    doc.restore(&case)?
                }
                None => solve(&build_relaxed(&case)?, &solver_options(&common)?, None),
            };
            let report = ConditionReport::build(&case, &sol, &duals)?;
            if let Some(p) = out {
                report.write_csv(create(&p)?)?;
            }
            writeln!(stdout, "{}", report.summary_json())?;
            Ok(if sol.is_optimal() { 0 } else { 2 })
        }
        Command::Compare { common, out } => {
            let case = resolve_case(&common.case)?;
            let opts = BnbOptions { solver: solver_options(&common)?, serial: common.serial, ..Default::default() };
            let outcome = compare(&case, &opts)?;
            match out {
                Some(p) => write_compare_csv(create(&p)?, &outcome.record)?,
                None => write_compare_csv(&mut *stdout, &outcome.record)?,
            }
            let solved = outcome.relaxed.0.is_optimal() && outcome.mip.status != BnbStatus::NoIncumbent;
            Ok(if solved { 0 } else { 2 })
        }
        Command::Sweep { common, spec, out } => {
            let case = resolve_case(&common.case)?;
            let text = fs::read_to_string(&spec).with_context(|| format!("cannot read {}", spec.display()))?;
            let spec: SweepSpec =
                serde_json::from_str(&text).with_context(|| format!("invalid sweep spec {}", spec.display()))?;
            let opts = BnbOptions { solver: solver_options(&common)?, serial: common.serial, ..Default::default() };
            let rows = sweep(&case, &spec, &opts)?;
            match out {
                Some(p) => write_sweep_csv(create(&p)?, &case, &rows)?,
                None => write_sweep_csv(&mut *stdout, &case, &rows)?,
            }
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct MipDocument {
    case: String,
    status: BnbStatus,
    objective: Option<f64>,
    root_objective: Option<f64>,
    best_bound: Option<f64>,
    gap: f64,
    nodes: usize,
    failed_nodes: usize,
    infeasible_nodes: usize,
    bound_warnings: usize,
    modes: Option<Vec<Vec<Mode>>>,
    /// MW, `[storage][t]`.
    charge: Option<Vec<Vec<f64>>>,
    discharge: Option<Vec<Vec<f64>>>,
}

fn storage_powers(case: &NetworkCase, x: &[f64], charge: bool) -> Vec<Vec<f64>> {
    let l = crate::formulation::VariableLayout::new(case);
    (0..case.storages.len())
        .map(|n| {
            (0..case.periods())
                .map(|t| case.base_mva * x[if charge { l.p_ch(n, t) } else { l.p_dc(n, t) }])
                .collect()
        })
        .collect()
}
