use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geonode_cli::commands::{self, EvalArgs, GradcheckArgs, InitSpec, SimulateArgs, TrainArgs};
use geonode_cli::config::{RunConfig, PRESETS};
use geonode_cli::CliError;

/// Adjoint-trained potential-shaping controllers for a rigid body on SE(3).
#[derive(Parser)]
#[command(name = "geonode", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a controller; writes metrics.csv and checkpoints into --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a checkpoint of the same run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Overrides train.epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Simulate one closed-loop trajectory and write it as CSV.
    Simulate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// random:SEED, or a JSON file {"pose": {...}, "momentum": [..6]}.
        #[arg(long)]
        init: InitSpec,
        #[arg(long)]
        duration: f64,
        #[arg(long)]
        out: PathBuf,
        /// Uniform output spacing instead of solver steps.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
    },
    /// Evaluate a checkpoint on n sampled initial conditions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Per-trajectory CSV; time-binned means go to <stem>_bins.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        /// Simulated time; defaults to the configured horizon.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Compare adjoint gradients with central finite differences.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overrides the configured horizon.
        #[arg(long)]
        horizon: Option<f64>,
        /// Fixed rk4 step.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Check a random subset of this many parameters.
        #[arg(long)]
        max_params: Option<usize>,
    },
    /// Print a built-in configuration as JSON.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    geonode_cli::configure_threads()?;
    match cli.command {
        Command::Train { config, out, seed, resume, epochs } => {
            let records = commands::train(&TrainArgs { config, out: out.clone(), seed, resume, epochs })?;
            if let Some(last) = records.last() {
                println!("trained {} epochs, final loss {:.6e}; outputs in {}", records.len(), last.loss, out.display());
            } else {
                println!("no epochs to run; outputs in {}", out.display());
            }
        }
        Command::Simulate { checkpoint, init, duration, out, dt, rtol, atol } => {
            let rows = commands::simulate(&SimulateArgs { checkpoint, init, duration, out: out.clone(), dt, rtol, atol })?;
            println!("wrote {rows} rows to {}", out.display());
        }
        Command::Eval { checkpoint, n, seed, out, bins, duration } => {
            let r = commands::eval(&EvalArgs { checkpoint, n, seed, out: out.clone(), bins, duration })?;
            println!(
                "{} trajectories ({} failed): mean angle {:.6} -> {:.6}, mean final distance {:.6}; wrote {} and {}",
                r.trajectories.len(),
                r.failures.len(),
                r.mean_initial_angle(),
                r.mean_final_angle(),
                r.mean_final_distance(),
                out.display(),
                commands::bins_path(&out).display()
            );
        }
        Command::Gradcheck { config, eps, samples, seed, horizon, step, max_params } => {
            let r = commands::gradcheck(&GradcheckArgs { config, eps, samples, seed, horizon, step, max_params })?;
            print!("{}", commands::format_gradcheck(&r));
            if !r.passed {
                eprint!("{}", commands::format_failures(&r, 20));
                return Err(CliError::Failed("gradient check failed".into()));
            }
        }
        Command::Preset { name } => {
            println!("{}", RunConfig::preset(&name).expect("validated by clap").to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
