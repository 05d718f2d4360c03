use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualsls_cli::commands::{self, ExperimentOverrides, ExperimentSource, SynthMode};
use dualsls_cli::config::parse_grid;
use dualsls_cli::CliError;

#[derive(Parser)]
#[command(name = "dualsls", version, about = "Robust and dual-control LQR synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model with its credibility region to rollout data.
    Identify {
        #[arg(long)]
        config: PathBuf,
        /// Rollout CSV (`rollout_id, t, x_1.., u_1..`).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a controller for the configured model.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "robust")]
        mode: SynthMode,
        #[arg(long)]
        out: PathBuf,
        /// Comma separated lambda2 values for dual mode.
        #[arg(long)]
        lambda2_grid: Option<String>,
    },
    /// Two-phase dual plan; shorthand for `synth --mode dual`.
    DualPlan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda2_grid: Option<String>,
    },
    /// Monte Carlo comparison of nominal, dual and greedy exploration.
    Experiment {
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        /// Rerun from a previous run's manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, env = "DUALSLS_OUT_DIR", default_value = "dualsls-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mc_runs: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        lambda2_grid: Option<String>,
    },
}

fn grid(arg: Option<String>) -> Result<Option<Vec<f64>>, CliError> {
    arg.map(|s| parse_grid(&s)).transpose()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Identify { config, data, out } => {
            commands::identify(&config, &data, &out)?;
            println!("model written to {}", out.display());
        }
        Command::Synth {
            config,
            mode,
            out,
            lambda2_grid,
        } => {
            let r = commands::synth(&config, mode, &out, grid(lambda2_grid)?)?;
            println!("{mode:?} cost {:.6} written to {}", r.cost, out.display());
        }
        Command::DualPlan {
            config,
            out,
            lambda2_grid,
        } => {
            let r = commands::synth(&config, SynthMode::Dual, &out, grid(lambda2_grid)?)?;
            if let Some(d) = &r.dual {
                println!(
                    "dual objective {:.6} at lambda2 = {:.4e}, written to {}",
                    d.objective,
                    d.lambda2,
                    out.display()
                );
            }
        }
        Command::Experiment {
            config,
            manifest,
            out,
            seed,
            mc_runs,
            jobs,
            lambda2_grid,
        } => {
            let overrides = ExperimentOverrides {
                seed,
                mc_runs,
                lambda2_grid: grid(lambda2_grid)?,
                jobs,
            };
            let source = match (&config, &manifest) {
                (_, Some(m)) => ExperimentSource::Manifest(m),
                (Some(c), None) => ExperimentSource::Config(c),
                (None, None) => unreachable!("clap requires one of --config and --manifest"),
            };
            let m = commands::experiment(source, &out, &overrides)?;
            println!(
                "{} episodes, outputs in {}",
                m.stats.episodes,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
