use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rank_odo::{run, Command, DofSelection};

#[derive(Parser)]
#[command(name = "rank-odo", version, about = "Ranking-based visual odometry experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Args {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// DoF to work on: 0-5, x|y|z|roll|pitch|yaw, or all.
    #[arg(long)]
    dof: Option<DofSelection>,
    /// Overrides the command's output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic train/test datasets.
    Gen(Args),
    /// Train one model per DoF.
    Train(Args),
    /// Rank correlations and trajectory drift on the test split.
    Eval(Args),
    /// Dump features, labels and predictions of the test split.
    Latent(Args),
    /// Retrain on growing fractions of the training split.
    ScaleSweep(Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (command, args) = match cli.command {
        Cmd::Gen(a) => (Command::Gen, a),
        Cmd::Train(a) => (Command::Train, a),
        Cmd::Eval(a) => (Command::Eval, a),
        Cmd::Latent(a) => (Command::Latent, a),
        Cmd::ScaleSweep(a) => (Command::ScaleSweep, a),
    };
    match run(command, &args.config, args.dof, args.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
