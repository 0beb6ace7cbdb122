use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use skewlab_cli::{commands, CliError, Config};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Simulate,
    Stationary,
    Certify,
    Weaklimit,
    Question3,
    Dimension,
    UlamDump,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stationary => "stationary",
            Command::Certify => "certify",
            Command::Weaklimit => "weaklimit",
            Command::Question3 => "question3",
            Command::Dimension => "dimension",
            Command::UlamDump => "ulam-dump",
        }
    }
}

/// Coupled master-slave maps: simulation, Ulam operators and certificates.
#[derive(Debug, Parser)]
#[command(name = "skewlab", version)]
struct Args {
    command: Command,
    /// Configuration file; the shipped default is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `common.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding `common.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::shipped_default(),
    };
    if let Some(out) = args.out {
        cfg.common.out = out;
    }
    if let Some(seed) = args.seed {
        cfg.common.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    commands::run(&cfg, args.command.name())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skewlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
