use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nevo_cli::commands::{render, test, train, workers_from_env};
use nevo_cli::{parse_config, CliResult};

#[derive(Parser)]
#[command(name = "nevo", version, about = "Batched neuroevolution trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config file and write the CSV log and checkpoint it names.
    Train { config: PathBuf },
    /// Evaluate a checkpoint on the config's test rollouts and print the mean score.
    Test { config: PathBuf, checkpoint: PathBuf },
    /// Roll out a checkpoint on one lane and write PPM frames into OUTDIR.
    Render { checkpoint: PathBuf, task: String, seed: u64, outdir: PathBuf },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Train { config } => {
            let cfg = parse_config(&config)?;
            train(&cfg, workers_from_env()?, &mut stdout)?;
        }
        Command::Test { config, checkpoint } => {
            let cfg = parse_config(&config)?;
            let score = test(&cfg, &checkpoint, workers_from_env()?)?;
            println!("mean test score: {score}");
        }
        Command::Render { checkpoint, task, seed, outdir } => {
            let frames = render(&checkpoint, &task, seed, &outdir)?;
            println!("wrote {frames} frame(s) to {}", outdir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
