//! `fsirom`: full-order runs, POD, reduced sweeps and plots.

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{RomArgs, Status};

#[derive(Parser)]
#[command(
    name = "fsirom",
    version,
    about = "Reduced-order models for a Stokes channel with a compliant wall"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order solver and write snapshot matrices.
    Hf {
        /// INI configuration; defaults to the reference setup.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute POD bases from a full-order run.
    Pod {
        #[arg(long)]
        snapshots: PathBuf,
        #[arg(long = "n-max")]
        n_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and run reduced models for one or more mode counts.
    Rom {
        /// 1 (multiplier formulation) or 2 (harmonic extension formulation).
        #[arg(long)]
        variant: String,
        /// Mode count, or an inclusive range start:stop:step.
        #[arg(long)]
        n: String,
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run mode counts one after another so timings are not shared.
        #[arg(long)]
        timed: bool,
        /// Also write each reduced model's bases and operators.
        #[arg(long)]
        save_reduced: bool,
    },
    /// Render SVG charts from the CSV outputs in a directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<fsirom_core::Error>() {
        Some(fsirom_core::Error::Usage(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Hf { config, out } => commands::hf(config.as_deref(), out),
        Command::Pod {
            snapshots,
            n_max,
            out,
        } => commands::pod(snapshots, *n_max, out),
        Command::Rom {
            variant,
            n,
            basis,
            out,
            timed,
            save_reduced,
        } => commands::rom(&RomArgs {
            variant,
            n,
            basis,
            out,
            timed: *timed,
            save_reduced: *save_reduced,
        }),
        Command::Plot { input, out } => commands::plot(input, out),
    };
    match result {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
