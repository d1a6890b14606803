//! `jointrecon`: simulate phantom datasets, reconstruct them with the
//! diffusion sampler or a baseline, and score the results.
//!
//! Exit codes: 0 success, 1 invalid input, 2 i/o failure, 3 numerical
//! failure.

mod config;
mod error;
mod evaluate;
mod masks;
mod reconstruct;
mod simulate;
mod store;

use clap::{Parser, Subcommand};

use error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "jointrecon", version, about = "Joint MRI image and coil-map reconstruction with a diffusion prior")]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a synthetic multi-coil dataset.
    Simulate(simulate::SimulateArgs),
    /// Reconstruct one or more datasets.
    Reconstruct(reconstruct::ReconstructArgs),
    /// Score reconstructions against a dataset's ground truth.
    Evaluate(evaluate::EvaluateArgs),
    /// Build and inspect a sampling mask.
    Masks(masks::MasksArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Cmd::Simulate(a) => simulate::run(a),
        Cmd::Reconstruct(a) => reconstruct::run(a),
        Cmd::Evaluate(a) => evaluate::run(a),
        Cmd::Masks(a) => masks::run(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
