use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskshare::output::{write_figures, write_json, ORACLE_FILE, REPORT_FILE, TIMINGS_FILE};
use riskshare::{load, oracle_check, run, CliError, Overrides, TieRuleSpec};

/// Comonotone Pareto-optimal risk sharing under coherent distortion risk
/// measures.
#[derive(Parser)]
#[command(name = "riskshare", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, allocate, verify; write report.json, timings.json and figure data.
    Solve(Common),
    /// Compare the solver with a brute-force grid on a small discrete market.
    Oracle(Common),
    /// Solve and write only the figure data (curves.csv, density.csv).
    Curves(Common),
}

#[derive(Args)]
struct Common {
    /// Market configuration (JSON, schema_version 1).
    config: PathBuf,
    /// Output directory [default: output.out_dir of the config].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Relative optimality gap at which the solver stops.
    #[arg(long)]
    gap_tol: Option<f64>,
    /// Absolute quadrature tolerance.
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Relative quadrature tolerance.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// How tied layers are shared between agents.
    #[arg(long, value_enum)]
    tie_rule: Option<TieArg>,
    /// Number of grid points in curves.csv and density.csv.
    #[arg(long)]
    grid: Option<usize>,
    /// Upper-tail mass cut off unbounded laws.
    #[arg(long)]
    truncation_mass: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Lowest,
    Equal,
    Balanced,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out_dir: self.out_dir.clone(),
            gap_tol: self.gap_tol,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            tie_rule: self.tie_rule.map(|t| match t {
                TieArg::Lowest => TieRuleSpec::Lowest,
                TieArg::Equal => TieRuleSpec::Equal,
                TieArg::Balanced => TieRuleSpec::Balanced,
            }),
            grid: self.grid,
            truncation_mass: self.truncation_mass,
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(c) => {
            let market = load(&c.config, &c.overrides())?;
            let dir = market.spec.output.out_dir.clone();
            let outcome = run(&market)?;
            write_json(&dir, REPORT_FILE, &outcome.report)?;
            write_json(&dir, TIMINGS_FILE, &outcome.timings)?;
            write_figures(&dir, &outcome, &market.labels(), market.spec.output.curve_points)?;
            let r = &outcome.report;
            println!("status: {:?}", r.status);
            println!("value: {} (+ lower bound {})", r.solver.value, r.totals.lower_bound);
            println!("breakpoints: {:?}", r.layers.breakpoints);
            for a in &r.agents {
                println!(
                    "agent {}: weights {:?}, rho {} -> {}, side payment {}",
                    a.label, a.weights, a.rho_initial, a.rho_final, a.side_payment
                );
            }
            println!("wrote {}", dir.display());
            Ok(r.status.exit_code())
        }
        Command::Curves(c) => {
            let market = load(&c.config, &c.overrides())?;
            let dir = market.spec.output.out_dir.clone();
            let outcome = run(&market)?;
            write_figures(&dir, &outcome, &market.labels(), market.spec.output.curve_points)?;
            println!("wrote {}", dir.display());
            Ok(0)
        }
        Command::Oracle(c) => {
            let market = load(&c.config, &c.overrides())?;
            let dir = market.spec.output.out_dir.clone();
            let report = oracle_check(&market)?;
            write_json(&dir, ORACLE_FILE, &report)?;
            println!(
                "{}: solver {} grid {} gap {} (tolerance {})",
                if report.passed { "pass" } else { "fail" },
                report.solver_value,
                report.grid_value,
                report.gap,
                report.tolerance
            );
            Ok(if report.passed { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
