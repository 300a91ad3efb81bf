use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{
    AblateArgs, EvaluateArgs, GenerateArgs, GradcheckArgs, IngestArgs, SynthArgs, TrainArgs,
};

/// Entity-centric data-to-text generation.
#[derive(Debug, Parser)]
#[command(name = "entgen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Convert a RotoWire-style file (or check a native dataset) and build vocabularies.
    Ingest(IngestArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Decode summaries with a trained model or the template system.
    Generate(GenerateArgs),
    /// Score candidate summaries against gold ones.
    Evaluate(EvaluateArgs),
    /// Train and score all four model variants.
    Ablate(AblateArgs),
    /// Compare tape gradients with finite differences on a micro model.
    Gradcheck(GradcheckArgs),
}

const USAGE: u8 = 1;
const DATA: u8 = 2;
const NUMERIC: u8 = 3;

fn exit_code(e: &entgen::Error) -> u8 {
    use entgen::Error::*;
    match e {
        Usage(_) => USAGE,
        Numeric(_) | Dimension { .. } | Domain(_) => NUMERIC,
        Parse { .. } | Schema(_) | Checkpoint(_) | Io(_) | Json(_) => DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("entgen: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
