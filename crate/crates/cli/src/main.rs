//! `xsom` — train self-organizing maps on network-flow datasets, classify
//! flows via labeled best-matching units, and generate explanation
//! artifacts (U-Matrix, starburst, clusters, heatmaps, feature rankings).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::Overrides;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "xsom",
    version,
    about = "Explainable SOM-based intrusion detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load raw CSVs, normalize, score features, and write the processed dataset
    Preprocess {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train a map on the processed dataset; writes model.json with quality metrics
    Train {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate the trained model and print the accuracy table
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
        /// Processed dataset JSON to evaluate (default: test, else train)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Generate the explanation bundle and its SVG figures
    Explain {
        #[command(flatten)]
        overrides: Overrides,
        /// Sample ids to explain, comma separated
        #[arg(long, value_delimiter = ',')]
        samples: Vec<usize>,
        /// Processed dataset JSON to explain against (default: test, else train)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Re-render SVGs from an existing bundle directory
    Render {
        #[command(flatten)]
        overrides: Overrides,
        /// Bundle directory (default: <out>/bundle)
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
}

fn main() {
    // Die quietly when a downstream pipe closes (e.g. `xsom ... | head`)
    // instead of panicking mid-write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Preprocess { overrides } => {
            let config = config::resolve(&overrides)?;
            commands::preprocess(&config)
        }
        Command::Train { overrides } => {
            let config = config::resolve(&overrides)?;
            commands::train(&config)
        }
        Command::Evaluate { overrides, data } => {
            let config = config::resolve(&overrides)?;
            commands::evaluate(&config, data.as_deref())
        }
        Command::Explain {
            overrides,
            samples,
            data,
        } => {
            let config = config::resolve(&overrides)?;
            commands::explain(&config, &samples, data.as_deref())
        }
        Command::Render { overrides, bundle } => {
            let config = config::resolve(&overrides)?;
            commands::render(&config, bundle.as_deref())
        }
    }
}
