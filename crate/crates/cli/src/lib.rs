//! Pipeline stages behind the `keyreid` binary. Each stage reads the previous
//! stage's files from the output directory and writes its own.

pub mod artifacts;
pub mod config;
pub mod database;
pub mod error;
pub mod evaluation;
pub mod extract;
pub mod matching;
pub mod select;
pub mod synth;

use keyreid::evaluate::Report;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

/// Per-video failures collected while a stage keeps going.
#[derive(Debug, Default)]
pub struct StageReport {
    pub stage: &'static str,
    pub failures: Vec<(String, String)>,
}

impl StageReport {
    pub fn new(stage: &'static str) -> Self {
        StageReport {
            stage,
            failures: Vec::new(),
        }
    }

    pub fn fail(&mut self, item: &str, err: CliError) {
        log::error!("{}: {item}: {err}", self.stage);
        self.failures.push((item.to_string(), err.to_string()));
    }

    pub fn finish(self) -> CliResult<Self> {
        Ok(self)
    }

    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_error(self) -> Option<CliError> {
        (!self.failures.is_empty()).then_some(CliError::VideosFailed {
            stage: self.stage,
            failed: self.failures.len(),
        })
    }
}

/// Runs extract, select, match and evaluate in order.
pub fn cmd_run(cfg: &RunConfig) -> CliResult<(Vec<StageReport>, Report)> {
    let mut reports = vec![extract::cmd_extract(cfg)?];
    reports.push(select::cmd_select(cfg)?);
    reports.push(matching::cmd_match(cfg)?);
    let (eval, report) = evaluation::cmd_evaluate(cfg)?;
    reports.push(eval);
    Ok((reports, report))
}

/// Runs `f` on a pool of `workers` threads (0 = available parallelism).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}
