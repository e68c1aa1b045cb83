//! Command-line front end: simulate data, fit mixtures by Gibbs sampling or
//! EM, choose the number of components, score clusterings, convert comet
//! orbits and write MCMC diagnostics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{Flags, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "stiefelmix", version, about = "Matrix Langevin mixture models on the Stiefel manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a labelled data set from a built-in scenario (writes points.jsonl)
    Simulate {
        /// three or four
        #[arg(long, default_value = "three")]
        scenario: String,
        /// Number of points
        #[arg(long, default_value_t = 400)]
        n: usize,
    },
    /// Gibbs sampler for a fixed number of components (trace.jsonl, summary.json, labels.csv, ...)
    FitGibbs,
    /// EM estimate for a fixed number of components (em.json, labels.csv)
    FitEm,
    /// Fit every candidate and choose by DIC or DIC5 (dic_report.json, dic_table.txt)
    SelectK,
    /// Compare predicted labels with the true labels of the input points (metrics.csv)
    Metrics {
        /// CSV with a `label` column, one row per point
        #[arg(long)]
        labels: PathBuf,
    },
    /// Orbital elements CSV (name,i_deg,node_deg,peri_deg) to points.jsonl
    ConvertNeo,
    /// Autocorrelations and running means of a trace (acf.csv, cumulative_mean.csv)
    Diagnose {
        #[arg(long, default_value_t = 100)]
        max_lag: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    match cli.command {
        Command::Simulate { scenario, n } => commands::simulate(&cfg, &scenario, n),
        Command::FitGibbs => commands::fit_gibbs(&cfg),
        Command::FitEm => commands::fit_em(&cfg),
        Command::SelectK => commands::select(&cfg),
        Command::Metrics { labels } => commands::metrics(&cfg, &labels),
        Command::ConvertNeo => commands::convert_neo(&cfg),
        Command::Diagnose { max_lag } => commands::diagnose(&cfg, max_lag),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
