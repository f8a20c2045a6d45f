//! Experiment harness: configuration, sweep execution and result files.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{emit_results, read_results, Format, ResultRow};
pub use run::{run_experiment, RunRecord};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Io(_) => 4,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            HarnessError::Config(m) => HarnessError::Config(format!("{what}: {m}")),
            HarnessError::Data(m) => HarnessError::Data(format!("{what}: {m}")),
            HarnessError::Io(m) => HarnessError::Io(format!("{what}: {m}")),
        }
    }
}

impl From<srcfuse::Error> for HarnessError {
    fn from(e: srcfuse::Error) -> Self {
        use srcfuse::Error as E;
        match e {
            E::Parameter(m) => HarnessError::Config(m),
            E::Data(_) | E::Format { .. } => HarnessError::Data(e.to_string()),
            E::Ingestion { .. } | E::Io(_) => HarnessError::Io(e.to_string()),
        }
    }
}

/// Files written by [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub metadata: PathBuf,
    pub rows: usize,
}

/// Runs `cfg`, streaming rows into `<out_dir>/results.<ext>`, then writes
/// `summary.csv` (mean and standard error across seeds per cell) and
/// `metadata.json`.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path, format: Format, jobs: usize) -> Result<RunFiles, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io(format!("{}: {e}", out_dir.display())))?;
    let results = out_dir.join(format!("results.{}", format.extension()));
    let mut writer = output::RowWriter::create(&results, format)?;
    let record = run_experiment(cfg, jobs, &mut |row| writer.write(row))?;
    if record.rows.is_empty() {
        return Err(HarnessError::Data("experiment produced no rows".into()));
    }
    let summary = out_dir.join("summary.csv");
    output::write_summary(&output::summarize(&record.rows), &summary)?;
    let metadata = out_dir.join("metadata.json");
    output::write_metadata(
        &output::Metadata {
            library_version: srcfuse::VERSION.into(),
            harness_version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            results_file: results.file_name().unwrap().to_string_lossy().into_owned(),
            rows: record.rows.len(),
            resolved: record.resolved,
        },
        &metadata,
    )?;
    Ok(RunFiles {
        results,
        summary,
        metadata,
        rows: record.rows.len(),
    })
}
