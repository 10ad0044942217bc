use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cutcell_kinetic::config;
use cutcell_kinetic::run;
use cutcell_kinetic::scenarios::{default_resolution, SCENARIO_NAMES};

#[derive(Parser)]
#[command(
    name = "cutcell",
    version,
    about = "Cut-cell kinetic solver for rarefied gas around moving bodies"
)]
struct Cli {
    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Leave wall-clock timings out of the outputs.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Directory for time series, snapshots and summary.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration to its end condition.
    Run {
        config: Option<PathBuf>,
        /// Override a configuration key, e.g. `--set grid.nx=128`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Build the scenario and its geometry without time stepping.
    Validate {
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(
    cli: &Cli,
    path: &Option<PathBuf>,
    overrides: &[String],
) -> anyhow::Result<config::RunConfig> {
    let mut all = overrides.to_vec();
    if let Some(n) = cli.threads {
        all.push(format!("run.threads={n}"));
    }
    if cli.deterministic {
        all.push("run.deterministic=true".into());
    }
    if let Some(dir) = &cli.output_dir {
        all.push(format!(
            "output.dir={}",
            toml::Value::String(dir.display().to_string())
        ));
    }
    Ok(config::load(path.as_deref(), &all)?)
}

fn main_inner(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::ListScenarios => {
            for name in SCENARIO_NAMES {
                let r = default_resolution(name).expect("registered scenario");
                println!(
                    "{name:<14} default grid {}x{}, {} velocities",
                    r.nx, r.ny, r.nv
                );
            }
        }
        Command::Validate { config, overrides } => {
            let cfg = load(cli, config, overrides)?;
            println!("{}", run::validate(&cfg)?);
        }
        Command::Run { config, overrides } => {
            let cfg = load(cli, config, overrides)?;
            let summary = run::run(&cfg)?;
            println!(
                "{} steps, t = {:.6e}, mass drift {:.3e}, min f {:.3e}, time series {}",
                summary.steps,
                summary.t,
                summary.mass_drift(),
                summary.min_f,
                summary.timeseries.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
