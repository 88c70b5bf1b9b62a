use std::path::PathBuf;
use std::process::ExitCode;

use al_core::corpus::{export_dataset, DataFormat};
use al_experiment::synth::{generate, SynthConfig};
use al_experiment::{run_experiment, ExperimentConfig, ExperimentError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "al-exp", version, about = "Run active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic topic corpus (CSV, or JSONL for a .jsonl path).
    Synth {
        #[arg(long)]
        docs: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => ExperimentConfig::from_file(&config).and_then(|c| {
            let summary = run_experiment(&c, &out)?;
            for s in &summary.strategies {
                let acc = s.mean_final.get("accuracy").copied().unwrap_or(f64::NAN);
                println!("{}: final accuracy {acc:.4} over {} seed(s)", s.strategy, s.runs.len());
            }
            Ok(())
        }),
        Command::Synth { docs, classes, seed, out } => generate(&SynthConfig::new(docs, classes, seed))
            .and_then(|d| Ok(export_dataset(&d, &out, DataFormat::from_path(&out))?)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ExperimentError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
