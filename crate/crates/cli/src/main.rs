use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gvf_lab::commands::{self, CliError};

#[derive(Parser)]
#[command(name = "gvf-lab", version, about = "Run IK-GVF path-following scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace.csv and summary.txt
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario without simulating
    Validate { config: PathBuf },
    /// Run a scenario once per value of a numeric key
    Sweep {
        config: PathBuf,
        /// Dotted key, e.g. gains.k_theta
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => {
            let scenario = match commands::validate(&config) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            for w in &scenario.warnings {
                eprintln!("warning: {w}");
            }
            match commands::run_scenario(&scenario, &out) {
                Ok(summary) => {
                    print!("{}", summary.render());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => match commands::validate(&config) {
            Ok(scenario) => {
                for w in &scenario.warnings {
                    println!("warning: {w}");
                }
                let c = &scenario.config;
                println!(
                    "ok: {} path, {:?} vehicle, dt {}, t_final {}, {} steps",
                    c.path.name(),
                    c.vehicle.kind(),
                    c.dt,
                    c.t_final,
                    (c.t_final / c.dt).round()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Sweep { config, param, values, out } => {
            let values = match commands::parse_values(&values) {
                Ok(v) => v,
                Err(e) => return fail(&e.into()),
            };
            match commands::sweep(&config, &param, &values, &out) {
                Ok(runs) => {
                    for r in &runs {
                        match &r.outcome {
                            Ok(s) => println!(
                                "{param}={}: settling_time {}, max |phi| {:.4e}",
                                r.value,
                                s.settling_time.map_or("none".to_string(), |t| format!("{t:.2}")),
                                s.max_abs_phi
                            ),
                            Err(e) => eprintln!("{param}={}: {e}", r.value),
                        }
                    }
                    println!("wrote {}", out.join("sweep.csv").display());
                    ExitCode::from(commands::sweep_exit_code(&runs) as u8)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
