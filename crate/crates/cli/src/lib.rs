//! Command-line front end for boxlab: box and channel files, certification
//! commands and CSV/JSON reports.

pub mod commands;
pub mod error;
pub mod format;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{exit, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "boxlab",
    version,
    about = "Exact certificates for nonlocal boxes"
)]
pub struct Cli {
    /// Relative tolerance for the comparisons that must go through floats.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the CHSH-symmetric de Finetti box for n rounds.
    Tau {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Write the dense table instead of the win-count form.
        #[arg(long)]
        dense: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check P ≤ (n+1)²·τ entrywise after the threshold premise.
    Cert1 {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check the ℓ¹ distance of the first k rounds to a de Finetti box.
    Cert2 {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check the exponential tail bounds on the CHSH win count.
    Threshold {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check the sampling-without-replacement bound 4k/n exactly.
    Dfcheck {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Maximize the distinguishability of two channels over a box polytope.
    Diamond {
        #[arg(long)]
        channels: PathBuf,
        /// `ns`, `roundns` or `ext:TAU.json`.
        #[arg(long)]
        polytope: String,
        #[arg(long)]
        n: usize,
        /// Eve's input alphabet size; adds an Eve interface.
        #[arg(long)]
        eve_in: Option<usize>,
        /// Eve's output alphabet size; adds an Eve interface.
        #[arg(long)]
        eve_out: Option<usize>,
        /// Write the maximizing box here.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Channels invisible to round-wise non-signaling boxes but not to a non-signaling one.
    Counterexample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Include the orthogonal direction Δ in the report.
        #[arg(long)]
        full: bool,
        /// Also write the channel pair as a channels file.
        #[arg(long)]
        channels_out: Option<PathBuf>,
    },
    /// Certify a box against the de Finetti box of a general convex family.
    General {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        /// Threshold constant as a fraction string.
        #[arg(long = "C", default_value = "1")]
        c: String,
        /// Grid cells per parameter dimension.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// The finite-k de Finetti error bound for n = 2^min..2^max.
    ErrorCurve {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        min_exp: u32,
        #[arg(long, default_value_t = 12)]
        max_exp: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Certify a seeded corpus of quantum mixtures.
    Corpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        max_n: usize,
    },
}

/// Runs a parsed command, writing the summary to `out`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> CliResult<i32> {
    commands::dispatch(cli, out)
}
