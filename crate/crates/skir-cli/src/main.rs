//! Command-line interface to the rumor-propagation equilibrium solver.
//!
//! Exit codes: 0 success, 1 validation failure, 2 solver non-convergence
//! (partial outputs are still written and flagged), 3 I/O failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use skir_graphon::experiments::{
    emit_report, load_scenario, run_experiment1, run_experiment2, ComparisonReport, EmitError,
    ExperimentOverrides, FileManifest, RunError, Scenario, ScenarioError, ScenarioRun,
};
use skir_graphon::solver::Integrator;
use skir_graphon::verify::{
    analytic_decoupled, exploitability, simulate_finite_player, SimConfig, SimMethod,
};

#[derive(Parser)]
#[command(name = "skir", version, about = "Equilibria of controlled rumor propagation on block graphons")]
struct Cli {
    /// Suppress informational output (data files and pass/fail lines still print)
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write its flow CSV
    Solve {
        /// Scenario config file or preset name
        #[arg(long)]
        config: PathBuf,
        /// Output directory
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Also write per-block SVG charts
        #[arg(long)]
        plots: bool,
    },
    /// Print the existence-condition value and verdict for a scenario
    CheckExistence {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the oracle suite (analytic, exploitability, Monte-Carlo smoke)
    Verify {
        #[arg(long, default_value = "experiment1-policy0")]
        config: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Simulate the finite-player system under the solved equilibrium
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n_agents: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Solve the age-group comparison under selected policies
    Experiment1 {
        /// Comma-separated policy ids from {0, 1, 2}
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        policies: Vec<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        plots: bool,
    },
    /// Solve the platform comparison under selected seeding schemes
    Experiment2 {
        /// Comma-separated scheme ids from {0, 1, 2, 3, 4}
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        schemes: Vec<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        plots: bool,
    },
}

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_IO: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or(if cli.quiet { "error" } else { "warn" }),
    )
    .init();

    let quiet = cli.quiet;
    let code = match cli.command {
        Command::Solve { config, out, plots } => cmd_solve(&config, &out, plots, quiet),
        Command::CheckExistence { config } => cmd_check_existence(&config),
        Command::Verify { config, seed } => cmd_verify(&config, seed, quiet),
        Command::Simulate {
            config,
            out,
            n_agents,
            seed,
        } => cmd_simulate(&config, &out, n_agents, seed, quiet),
        Command::Experiment1 {
            policies,
            out,
            plots,
        } => cmd_experiment(Experiment::One(policies), &out, plots, quiet),
        Command::Experiment2 {
            schemes,
            out,
            plots,
        } => cmd_experiment(Experiment::Two(schemes), &out, plots, quiet),
    };
    ExitCode::from(code)
}

/// Fixed 9-significant-digit rendering for all numeric console output.
fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let magnitude = x.abs();
    if !(1e-4..1e9).contains(&magnitude) {
        return format!("{x:.8e}");
    }
    let leading = magnitude.log10().floor() as i32;
    let decimals = (8 - leading).max(0) as usize;
    format!("{x:.decimals$}")
}

fn scenario_exit(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn load_or_report(config: &PathBuf) -> Result<Scenario, u8> {
    load_scenario(config).map_err(|e| {
        eprintln!("error: {e}");
        scenario_exit(&e)
    })
}

fn print_manifest(manifest: &FileManifest) {
    for file in &manifest.files {
        println!("wrote {}", file.display());
    }
}

fn emit_or_report(
    report: &ComparisonReport,
    out: &PathBuf,
    plots: bool,
) -> Result<FileManifest, u8> {
    emit_report(report, out, plots).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            EmitError::Io { .. } => EXIT_IO,
            EmitError::Solver(_) => EXIT_VALIDATION,
        }
    })
}

fn cmd_solve(config: &PathBuf, out: &PathBuf, plots: bool, quiet: bool) -> u8 {
    let scenario = match load_or_report(config) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let result = match scenario.solve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let converged = result.converged;
    if !quiet {
        println!(
            "{}: {} after {} iterations, residual {}",
            scenario.name,
            if converged { "converged" } else { "NOT CONVERGED" },
            result.iterations,
            sig9(result.final_residual),
        );
        println!(
            "existence value {} ({})",
            sig9(result.existence_value),
            if result.existence_satisfied {
                "SATISFIED"
            } else {
                "NOT SATISFIED"
            }
        );
    }
    let report = ComparisonReport {
        runs: vec![ScenarioRun::new(scenario, result)],
        baseline: 0,
    };
    let manifest = match emit_or_report(&report, out, plots) {
        Ok(m) => m,
        Err(code) => return code,
    };
    print_manifest(&manifest);
    if converged {
        EXIT_OK
    } else {
        eprintln!("warning: solver did not converge; outputs are flagged best-effort");
        EXIT_NOT_CONVERGED
    }
}

fn cmd_check_existence(config: &PathBuf) -> u8 {
    let scenario = match load_or_report(config) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let report = scenario.existence();
    println!(
        "existence condition value {} for {} (horizon {}, beta_bar {}, lambda_i_bar {}, lambda_k_bar {}, a_max {})",
        sig9(report.value),
        scenario.name,
        sig9(scenario.grid.t_horizon()),
        sig9(report.beta_bar),
        sig9(report.lambda_i_bound),
        sig9(report.lambda_k_bound),
        sig9(scenario.bound.a_max),
    );
    println!(
        "{}",
        if report.satisfied {
            "SATISFIED: contraction guarantees an equilibrium"
        } else {
            "NOT SATISFIED: no contraction guarantee (the solver may still converge)"
        }
    );
    EXIT_OK
}

fn cmd_verify(config: &PathBuf, seed: u64, quiet: bool) -> u8 {
    let scenario = match load_or_report(config) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mut all_ok = true;
    let check = |name: &str, ok: bool, detail: String| -> bool {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        ok
    };

    // closed-form oracle on the decoupled benchmark
    match verify_analytic() {
        Ok((max_p, max_u)) => {
            let ok = max_p <= 1e-7 && max_u <= 1e-7;
            all_ok &= check(
                "analytic-decoupled",
                ok,
                format!(
                    "max |p - oracle| = {}, max |u - oracle| = {}",
                    sig9(max_p),
                    sig9(max_u)
                ),
            );
        }
        Err(e) => {
            all_ok &= check("analytic-decoupled", false, format!("error: {e}"));
        }
    }

    // Nash property of the solved scenario
    let eq = match scenario.solve() {
        Ok(eq) => eq,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if !eq.converged {
        check(
            "exploitability",
            false,
            format!(
                "solver did not converge (residual {})",
                sig9(eq.final_residual)
            ),
        );
        check("monte-carlo-smoke", false, "skipped: no equilibrium".into());
        return EXIT_VALIDATION;
    }
    match exploitability(
        &eq.flows,
        &scenario.grid,
        &scenario.params,
        &scenario.policy,
        &scenario.bound,
        Integrator::Rk4,
    ) {
        Ok(expl) => {
            all_ok &= check(
                "exploitability",
                expl <= 1e-4,
                format!("best-response gain = {}", sig9(expl)),
            );
        }
        Err(e) => {
            all_ok &= check("exploitability", false, format!("error: {e}"));
        }
    }

    // small finite-player run against the mean-field flow
    let sim = SimConfig {
        n_agents: 500,
        seed,
        method: SimMethod::ExactGillespie,
        tau: scenario.grid.dt() / 10.0,
    };
    match simulate_finite_player(
        &eq,
        &scenario.grid,
        &scenario.graphon,
        &scenario.params,
        &scenario.policy,
        &sim,
    ) {
        Ok(result) => {
            let deviation = result.max_conditional_deviation(&eq.flows);
            let mut cost_detail = String::new();
            let mut cost_ok = true;
            for (b, name) in scenario.block_names.iter().enumerate() {
                if let Some((mean, se, _)) = result.block_cost_stats(b) {
                    let values = skir_graphon::verify::best_response_value(
                        &eq.flows,
                        b,
                        &scenario.grid,
                        &scenario.params[b],
                        &scenario.policy,
                        &scenario.bound,
                        Integrator::Rk4,
                    );
                    if let Ok(v) = values {
                        let predicted: f64 = scenario.params[b]
                            .p0
                            .iter()
                            .zip(v.u0_eq.iter())
                            .map(|(p, u)| p * u)
                            .sum();
                        cost_ok &= (mean - predicted).abs() <= 5.0 * se.max(1e-9);
                        let _ = write!(
                            cost_detail,
                            " {name}: cost {} vs value {};",
                            sig9(mean),
                            sig9(predicted)
                        );
                    }
                }
            }
            let ok = deviation <= 0.25 && cost_ok;
            all_ok &= check(
                "monte-carlo-smoke",
                ok,
                format!(
                    "N=500 max occupancy deviation = {};{cost_detail}",
                    sig9(deviation)
                ),
            );
        }
        Err(e) => {
            all_ok &= check("monte-carlo-smoke", false, format!("error: {e}"));
        }
    }

    if !quiet {
        println!(
            "oracle suite on {}: {}",
            scenario.name,
            if all_ok {
                "all checks passed"
            } else {
                "checks FAILED"
            }
        );
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

fn verify_analytic() -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let scenario = load_scenario("zero-graphon")?;
    let eq = scenario.solve()?;
    let oracle = analytic_decoupled(&scenario.grid, &scenario.params, &scenario.policy)?;
    let mut max_p = 0.0f64;
    let mut max_u = 0.0f64;
    for (a, b) in eq.flows.p.iter().zip(oracle.p.iter()) {
        for e in 0..4 {
            max_p = max_p.max((a[e] - b[e]).abs());
        }
    }
    for (a, b) in eq.flows.u.iter().zip(oracle.u.iter()) {
        for e in 0..4 {
            max_u = max_u.max((a[e] - b[e]).abs());
        }
    }
    Ok((max_p, max_u))
}

fn cmd_simulate(config: &PathBuf, out: &PathBuf, n_agents: usize, seed: u64, quiet: bool) -> u8 {
    let scenario = match load_or_report(config) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let eq = match scenario.solve() {
        Ok(eq) => eq,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if !eq.converged {
        eprintln!(
            "error: solver did not converge (residual {}); not simulating",
            sig9(eq.final_residual)
        );
        return EXIT_NOT_CONVERGED;
    }
    let sim = SimConfig {
        n_agents,
        seed,
        method: SimMethod::ExactGillespie,
        tau: scenario.grid.dt() / 10.0,
    };
    let result = match simulate_finite_player(
        &eq,
        &scenario.grid,
        &scenario.graphon,
        &scenario.params,
        &scenario.policy,
        &sim,
    ) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };

    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return EXIT_IO;
    }
    let mut csv = String::from("t,block,state,p_emp\n");
    for node in 0..scenario.grid.n_nodes() {
        let t = scenario.grid.node_time(node);
        for (b, name) in scenario.block_names.iter().enumerate() {
            let occ = result.occupancy(node, b);
            for (e, label) in ["S", "K", "I", "R"].iter().enumerate() {
                let _ = writeln!(csv, "{t},{name},{label},{}", occ[e]);
            }
        }
    }
    let path = out.join(format!(
        "sim_{}_n{}_s{}.csv",
        scenario
            .name
            .replace(|c: char| !c.is_ascii_alphanumeric(), "-"),
        n_agents,
        seed
    ));
    if let Err(e) = std::fs::write(&path, csv) {
        eprintln!("error: cannot write {}: {e}", path.display());
        return EXIT_IO;
    }
    println!("wrote {}", path.display());
    if !quiet {
        for (b, name) in scenario.block_names.iter().enumerate() {
            println!(
                "{name}: {} agents, mean realized cost {}",
                result.block_counts[b],
                sig9(result.mean_cost_per_block[b]),
            );
        }
        println!(
            "max occupancy deviation from mean field: {}",
            sig9(result.max_conditional_deviation(&eq.flows))
        );
    }
    EXIT_OK
}

enum Experiment {
    One(Vec<usize>),
    Two(Vec<usize>),
}

fn cmd_experiment(which: Experiment, out: &PathBuf, plots: bool, quiet: bool) -> u8 {
    let overrides = ExperimentOverrides::default();
    let report = match &which {
        Experiment::One(ids) => run_experiment1(ids, &overrides),
        Experiment::Two(ids) => run_experiment2(ids, &overrides),
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                RunError::Scenario(se) => scenario_exit(&se),
                _ => EXIT_VALIDATION,
            };
        }
    };
    if !quiet {
        for run in &report.runs {
            println!(
                "{}: {} after {} iterations, residual {}",
                run.scenario.name,
                if run.result.converged {
                    "converged"
                } else {
                    "NOT CONVERGED"
                },
                run.result.iterations,
                sig9(run.result.final_residual),
            );
            for s in &run.summaries {
                println!(
                    "  {}: sup p_I {} | terminal p_I {} | int p_I dt {} | mean phi_K {}",
                    s.block,
                    sig9(s.sup_p_i),
                    sig9(s.terminal_p_i),
                    sig9(s.integral_p_i),
                    sig9(s.mean_phi_k),
                );
            }
        }
    }
    let manifest = match emit_or_report(&report, out, plots) {
        Ok(m) => m,
        Err(code) => return code,
    };
    print_manifest(&manifest);
    if report.all_converged() {
        EXIT_OK
    } else {
        eprintln!("warning: at least one scenario did not converge; outputs are flagged");
        EXIT_NOT_CONVERGED
    }
}
