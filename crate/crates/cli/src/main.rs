use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use isinglab::config::CAP_ENV;
use isinglab::{execute, ExperimentKind, Invocation};

/// Exact checks and Monte Carlo probes of the Ising model in a decaying field.
#[derive(Debug, Parser)]
#[command(name = "isinglab", version)]
struct Cli {
    /// exact-verify, peierls-scan, field-scan, mc-gap, penetration, animals or fat-sum
    #[arg(value_parser = |s: &str| s.parse::<ExperimentKind>())]
    kind: ExperimentKind,

    #[arg(long)]
    config: PathBuf,

    /// Grid points run concurrently (default: all cores)
    #[arg(long)]
    workers: Option<usize>,

    /// Write per-sample cluster diagnostics as JSON lines
    #[arg(long)]
    diagnostics: bool,

    /// Output directory (default: the config's `output`, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { isinglab::EXIT_CONFIG } else { isinglab::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let inv = Invocation {
        kind: cli.kind,
        config: cli.config,
        workers: cli.workers,
        diagnostics: cli.diagnostics,
        out: cli.out,
        cap_override: std::env::var(CAP_ENV).ok(),
    };
    ExitCode::from(execute(&inv) as u8)
}
