//! Experiment harness: TOML configs in, CSV artifacts and pass/fail reports
//! out.

pub mod config;
pub mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use report::{emit_report, Check, ReportFormat, RunReport};
pub use run::{run_experiment, Command};

/// Sets the size of the global worker pool from the environment variable
/// `EMSOURCE_WORKERS`, if present.
pub fn init_workers() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(WORKERS_VAR) {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{WORKERS_VAR} must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("{WORKERS_VAR} must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

pub const WORKERS_VAR: &str = "EMSOURCE_WORKERS";
