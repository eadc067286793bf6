use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rwa_control::dynamics::{ExactOptions, DEFAULT_EXACT_TOL};
use rwa_control::experiments::rydberg::{rydberg_bell_transfer, ReoptimizeConfig, RydbergScenario};
use rwa_control::experiments::sweep::{run_sweep, write_sweep, SweepConfig};
use rwa_control::io::{analyze, load_problem, read_json, write_json, GoalFile, SolutionFile, SystemFile};
use rwa_control::optimize::{analytic_transfer, double_check, optimize_transfer, TransferConfig};

#[derive(Parser)]
#[command(name = "rwa-control", version, about = "State transfer in driven multilevel systems")]
struct Cli {
    /// Master seed for random starts and instances.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; results are also printed to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Success threshold on the infidelity.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Exit nonzero when any result is unsuccessful or any sweep row failed.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Closed form when the system allows it, otherwise optimize.
    Auto,
    Analytic,
    Optimize,
}

#[derive(Subcommand)]
enum Command {
    /// Graph structure, rotating-frame weights and RWA validity of a system.
    Analyze { system: PathBuf },
    /// Find drive magnitudes, phases and duration reaching a goal state.
    Solve {
        system: PathBuf,
        goal: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
        /// Upper bound on each drive magnitude.
        #[arg(long)]
        cap: Option<f64>,
        /// Also re-simulate the result without the RWA.
        #[arg(long)]
        double_check: bool,
    },
    /// Re-simulate a saved solution under the full time-dependent Hamiltonian.
    DoubleCheck {
        solution: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EXACT_TOL)]
        tol: f64,
        /// Write the lab-frame trajectory to this CSV file.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Success rates over random instances, detunings and goals.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Two-atom Bell-state preparation under Rydberg blockade.
    Rydberg {
        /// Also evaluate the final protocol with a finite blockade shift.
        #[arg(long)]
        finite_blockade: bool,
        /// Re-optimize the active Rabi frequencies and duration.
        #[arg(long)]
        reoptimize: bool,
        /// Scenario file; defaults to the published constants.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Multiply the blockade shift (and the compensating detuning).
        #[arg(long, default_value_t = 1.0)]
        blockade_scale: f64,
    },
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    if let Some(dir) = out {
        write_json(&dir.join(name), value)?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Analyze { system } => {
            let report = analyze(&read_json::<SystemFile>(&system)?)?;
            emit(&report, out, "analysis.json")?;
            Ok(report.error.is_none())
        }
        Command::Solve {
            system,
            goal,
            method,
            cap,
            double_check: check,
        } => {
            let problem = load_problem(&read_json(&system)?, &read_json::<GoalFile>(&goal)?, cli.eps)?;
            let analytic = match method {
                Method::Optimize => None,
                _ => analytic_transfer(&problem, cap)?,
            };
            let (mut solution, name) = match (analytic, method) {
                (Some(s), _) => (s, "analytic"),
                (None, Method::Analytic) => anyhow::bail!("no closed-form solution for this system and goal"),
                (None, _) => {
                    let config = TransferConfig {
                        amplitude_cap: cap,
                        seed: cli.seed.unwrap_or(0),
                        ..TransferConfig::default()
                    };
                    (optimize_transfer(&problem, &config)?, "optimized")
                }
            };
            if check {
                solution = double_check(&problem, &solution, &ExactOptions::default())?;
            }
            let ok = solution.rwa_success && solution.exact_success != Some(false);
            emit(&SolutionFile::new(&problem, &solution, name), out, "solution.json")?;
            Ok(ok)
        }
        Command::DoubleCheck {
            solution,
            tol,
            trajectory,
        } => {
            let mut file: SolutionFile = read_json(&solution)?;
            if let Some(eps) = cli.eps {
                file.solution.epsilon = eps;
            }
            let problem = file.problem()?;
            let options = ExactOptions {
                tol,
                trajectory: trajectory.as_deref(),
                ..Default::default()
            };
            file.solution = double_check(&problem, &file.solution, &options)?;
            emit(&file, out, "solution.json")?;
            Ok(file.solution.exact_success == Some(true))
        }
        Command::Sweep { config } => {
            let mut cfg: SweepConfig = match config {
                Some(path) => read_json(&path)?,
                None => SweepConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(threads) = cli.threads {
                cfg.threads = threads;
            }
            if let Some(eps) = cli.eps {
                cfg.epsilon = eps;
            }
            let output = run_sweep(&cfg)?;
            write_sweep(&output, out.unwrap_or(Path::new("sweep-results")))?;
            println!("{}", serde_json::to_string_pretty(&output.summary.cells)?);
            Ok(output.summary.error_rows == 0)
        }
        Command::Rydberg {
            finite_blockade,
            reoptimize,
            scenario,
            blockade_scale,
        } => {
            let base: RydbergScenario = match scenario {
                Some(path) => read_json(&path)?,
                None => RydbergScenario::published(),
            };
            let base = base.with_blockade_scaled(blockade_scale);
            let reopt = ReoptimizeConfig {
                seed: cli.seed.unwrap_or(0),
                ..ReoptimizeConfig::default()
            };
            let report = rydberg_bell_transfer(
                &base,
                reoptimize.then_some(&reopt),
                finite_blockade,
                &ExactOptions::default(),
            )?;
            emit(&report, out, "rydberg.json")?;
            let eps = cli.eps.unwrap_or(rwa_control::optimize::DEFAULT_EPSILON);
            let best = report.reoptimized.as_ref().unwrap_or(&report.printed).infidelity;
            Ok(best < eps)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let strict = cli.strict;
    match run(cli) {
        Ok(ok) if ok || !strict => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
