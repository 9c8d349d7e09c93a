//! Experiment orchestration: configuration, resumable run execution,
//! analysis and rendered reports.

pub mod analysis;
pub mod chunks;
pub mod config;
pub mod report;
pub mod schedule;
pub mod svg;
pub mod verify;

use crate::data::DataError;
use crate::disagreement::DisagreementError;
use crate::landscape::LandscapeError;
use std::path::PathBuf;

pub use chunks::AggregationError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Disagreement(DisagreementError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl HarnessError {
    /// Process exit status: 1 for bad input, 2 for data or I/O trouble,
    /// 3 when results fail an integrity or oracle check.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Data(_)
            | HarnessError::Aggregation(_)
            | HarnessError::Landscape(_)
            | HarnessError::Disagreement(_)
            | HarnessError::Io { .. } => 2,
            HarnessError::Integrity(_) | HarnessError::Verify(_) => 3,
        }
    }
}

/// Files produced by one pipeline invocation.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub summary: Option<chunks::RunSummary>,
    pub envelope_path: Option<PathBuf>,
    pub files: Vec<PathBuf>,
}

fn publish(env: &analysis::ReportEnvelope, out_dir: &std::path::Path) -> Result<(PathBuf, Vec<PathBuf>), HarnessError> {
    let path = report::write_envelope(env, out_dir)?;
    let files = report::write_outputs(env, out_dir)?;
    Ok((path, files))
}

/// Execute every run, then aggregate, analyse and write the report.
pub fn run_pipeline(cfg: &config::ExperimentConfig, opts: &chunks::RunOptions) -> Result<PipelineOutput, HarnessError> {
    let ds = cfg.load_dataset()?;
    let summary = chunks::run_experiment(cfg, &ds, opts)?;
    log::info!(
        "{} runs computed, {} reused, {} failed, {} chunks written",
        summary.computed,
        summary.reused,
        summary.failed.len(),
        summary.chunks_written
    );
    for (split, run) in &summary.failed {
        log::warn!("split {split}: run {run} failed; see the chunk sidecar");
    }
    let env = analysis::run_analysis(cfg, &ds)?;
    let (path, files) = publish(&env, &cfg.output_dir)?;
    Ok(PipelineOutput { summary: Some(summary), envelope_path: Some(path), files })
}

/// Aggregate and analyse chunks already on disk.
pub fn analyze_pipeline(cfg: &config::ExperimentConfig) -> Result<PipelineOutput, HarnessError> {
    let ds = cfg.load_dataset()?;
    let env = analysis::run_analysis(cfg, &ds)?;
    let (path, files) = publish(&env, &cfg.output_dir)?;
    Ok(PipelineOutput { summary: None, envelope_path: Some(path), files })
}

/// Re-render tables and figures from a saved envelope.
pub fn report_pipeline(out_dir: &std::path::Path) -> Result<PipelineOutput, HarnessError> {
    let env = report::read_envelope(&out_dir.join(report::REPORT_FILE))?;
    let files = report::write_outputs(&env, out_dir)?;
    Ok(PipelineOutput { summary: None, envelope_path: None, files })
}
