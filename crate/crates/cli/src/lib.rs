//! Experiment driver: configuration grammar, orchestration, persistence and reports.

pub mod config;
pub mod output;
pub mod report;
pub mod run;

use std::fs;
use std::path::PathBuf;

pub use config::{parse_config, parse_config_for, ConfigError, ExperimentKind, GridPoint, RunConfig};
pub use output::{schema, RunRecord, Status};
pub use report::{report, Report, NO_DATA};
pub use run::{run, RunError, RunOptions, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_NO_DATA: i32 = 3;

/// Parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub kind: ExperimentKind,
    pub config: PathBuf,
    pub workers: Option<usize>,
    pub diagnostics: bool,
    pub out: Option<PathBuf>,
    /// Value of `ISINGLAB_CAP_SITES`, if set.
    pub cap_override: Option<String>,
}

/// Runs an invocation end to end, printing the report to stdout and problems to
/// stderr. Returns the process exit code.
pub fn execute(inv: &Invocation) -> i32 {
    let text = match fs::read_to_string(&inv.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", inv.config.display());
            return EXIT_CONFIG;
        }
    };
    let cfg = config::parse_unvalidated(&text, Some(inv.kind)).and_then(|mut cfg| {
        cfg.apply_cap_override(inv.cap_override.as_deref())?;
        cfg.validate()?;
        Ok(cfg)
    });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if inv.workers == Some(0) {
        eprintln!("config error: --workers must be >= 1");
        return EXIT_CONFIG;
    }
    let out_dir = inv.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let opts = RunOptions { out_dir, workers: inv.workers, diagnostics: inv.diagnostics };
    let output = match run::run(&cfg, &opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    for r in output.records.iter().filter(|r| !r.is_ok()) {
        eprintln!("grid point {} failed: {}", r.point.index, r.error.as_deref().unwrap_or("unknown error"));
    }
    let rep = report::report(&output.records);
    print!("{}", rep.render());
    if !rep.is_empty() {
        if let Err(e) = fs::write(&output.paths.plot, rep.plot_csv()) {
            eprintln!("error: cannot write {}: {e}", output.paths.plot.display());
            return EXIT_RUNTIME;
        }
    }
    println!("results: {}", output.paths.csv.display());
    if output.failed() > 0 {
        EXIT_RUNTIME
    } else if rep.is_empty() {
        EXIT_NO_DATA
    } else {
        EXIT_OK
    }
}
