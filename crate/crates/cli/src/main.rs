use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use heattrace_cli::{run, Command, RunConfig};

/// Run one heattrace experiment described by a TOML configuration.
#[derive(Debug, Parser)]
#[command(name = "heattrace", version, about)]
struct Args {
    /// Run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir` in the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Command to run instead of the configured one.
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: &Args) -> anyhow::Result<bool> {
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(c) = args.command {
        cfg.command = c;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("heattrace-out"));
    let summary = run(&cfg, &out)?;
    let mark = if summary.ok { "ok" } else { "FAILED" };
    println!("{} {mark}: {}", summary.command.name(), summary.message);
    println!("artifacts in {}", out.display());
    Ok(summary.ok)
}
