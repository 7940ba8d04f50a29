mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, FlattenArgs, GenerateArgs, HierarchyArgs, RectifyArgs, Status};

#[derive(Parser)]
#[command(name = "rectiling", version = output::VERSION, about = "Substitution tilings, discrepancy checks and lattice rectification")]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "RECTILING_OUT_DIR", default_value = "rectiling-out")]
    out_dir: PathBuf,
    /// Worker threads for batch work (results do not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for all random sampling.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a patch and its Delone set.
    Generate(GenerateArgs),
    /// Spectral data, E-profile, discrepancy ratio and repetitivity.
    Analyze(AnalyzeArgs),
    /// Hierarchical decompositions of random fitted regions and their bounds.
    Hierarchy(HierarchyArgs),
    /// Build the flattening map of a density grid and its diagnostics.
    Flatten(FlattenArgs),
    /// Map a Delone set to the integer lattice.
    Rectify(RectifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Ctx { out_dir: cli.out_dir.clone(), seed: cli.seed };
    let res = rectiling::par::with_jobs(cli.jobs.max(1), || match &cli.cmd {
        Cmd::Generate(a) => commands::generate(&ctx, a),
        Cmd::Analyze(a) => commands::analyze(&ctx, a),
        Cmd::Hierarchy(a) => commands::hierarchy(&ctx, a),
        Cmd::Flatten(a) => commands::flatten(&ctx, a),
        Cmd::Rectify(a) => commands::rectify(&ctx, a),
    });
    match res {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Violations(n)) => {
            eprintln!("{n} inequality violation(s)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
