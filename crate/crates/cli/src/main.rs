//! `ccmdp` command-line front end.
//!
//! Exit codes: 0 success, 1 other failure (including usage errors and
//! failed verify suites), 2 infeasible, 3 invalid or unreadable input,
//! 4 resource limit.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use ccmdp::error::Error;
use ccmdp::lp::Status;
use ccmdp::verify::Suite;
use clap::{Args, Parser, Subcommand};

use commands::{chance_bounds, out_dir, solver_config, SimulateArgs, SolveArgs};

#[derive(Parser)]
#[command(name = "ccmdp", version, about = "Worst-case stealthy attack impact via chance-constrained MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Bounds {
    /// Problem 1 bounds P(any alarm); problem 2 bounds P(alarms >= i) per i.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    problem: u8,
    /// Single chance bound (problem 1).
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated bounds for alarm counts 1..=T, or `geometric:r`.
    #[arg(long)]
    deltas: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a chance-constrained problem and write solution, policy and manifest.
    Solve {
        /// MDP JSON path, builtin:appendix or builtin:section5.
        #[arg(long)]
        model: String,
        #[command(flatten)]
        bounds: Bounds,
        /// Simplex feasibility and optimality tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo rollouts of a solved policy; writes three CSVs and a manifest.
    Simulate {
        #[arg(long)]
        model: String,
        /// policy.json written by `solve`.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 100_000)]
        trajectories: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of trajectories written to paths.csv.
        #[arg(long, default_value_t = 100)]
        paths: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run acceptance suites: appendix, table1, theorem1, theorem2,
    /// occupation, policy, simulation, detector, or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Print the validation report of an MDP.
    Validate {
        #[arg(long)]
        model: String,
    },
    /// Write the occupation-measure LP in the sparse text format.
    ExportLp {
        #[arg(long)]
        model: String,
        #[command(flatten)]
        bounds: Bounds,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an LP in the sparse text format and print the solution as JSON.
    SolveLp {
        lp: String,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose a plant and detector description into an MDP JSON.
    Compose {
        detector_model: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 2,
        Error::Rejected(_) | Error::InvalidMdp(_) | Error::Config(_) | Error::Parse(_) | Error::Json(_) => 3,
        Error::ResourceLimit { .. } => 4,
        _ => 1,
    }
}

fn horizon_of(model: &str) -> ccmdp::Result<usize> {
    Ok(commands::load_model(model)?.horizon)
}

fn run(cmd: Command) -> ccmdp::Result<ExitCode> {
    match cmd {
        Command::Solve { model, bounds, tol, out } => {
            let deltas = chance_bounds(bounds.problem, bounds.delta, bounds.deltas.as_deref(), horizon_of(&model)?)?;
            let out = out_dir(out);
            let m = commands::solve(SolveArgs {
                model: &model,
                problem: bounds.problem,
                deltas,
                solver: solver_config(tol)?,
                out: &out,
            })?;
            println!("optimum {}", m.optimum.unwrap_or(f64::NAN));
            println!("wrote {} to {}", m.outputs.join(", "), out.display());
        }
        Command::Simulate {
            model,
            policy,
            trajectories,
            seed,
            paths,
            out,
        } => {
            let out = out_dir(out);
            let m = commands::simulate(SimulateArgs {
                model: &model,
                policy: &policy,
                trajectories,
                seed,
                recorded_paths: paths,
                out: &out,
            })?;
            println!("mean reward {}", m.mean_reward.unwrap_or(f64::NAN));
            println!("wrote {} to {}", m.outputs.join(", "), out.display());
        }
        Command::Replay { manifest, out } => {
            let out = out_dir(out);
            let m = commands::replay(&manifest, &out)?;
            println!("replayed {} into {}", m.command, out.display());
        }
        Command::Verify { suite } => {
            let suites = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![Suite::parse(&suite).ok_or_else(|| Error::Rejected(format!("unknown suite {suite:?}")))?]
            };
            if !commands::verify(&suites) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Validate { model } => {
            if !commands::validate(&model)? {
                return Ok(ExitCode::from(3));
            }
        }
        Command::ExportLp { model, bounds, out } => {
            let deltas = chance_bounds(bounds.problem, bounds.delta, bounds.deltas.as_deref(), horizon_of(&model)?)?;
            commands::export_lp(&model, bounds.problem, &deltas, out.as_deref())?;
        }
        Command::SolveLp { lp, tol, out } => match commands::solve_lp(&lp, &solver_config(tol)?, out.as_deref())? {
            Status::Optimal => {}
            Status::Infeasible => return Ok(ExitCode::from(2)),
            Status::Unbounded => return Ok(ExitCode::FAILURE),
        },
        Command::Compose { detector_model, out } => commands::compose(&detector_model, out.as_deref())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_distinct_codes() {
        assert_eq!(exit_code(&Error::Infeasible(String::new())), 2);
        assert_eq!(exit_code(&Error::Parse(String::new())), 3);
        assert_eq!(exit_code(&Error::Rejected(String::new())), 3);
        let limit = Error::ResourceLimit {
            what: "paths",
            needed: 2,
            limit: 1,
        };
        assert_eq!(exit_code(&limit), 4);
        assert_eq!(exit_code(&Error::Unbounded), 1);
    }
}
