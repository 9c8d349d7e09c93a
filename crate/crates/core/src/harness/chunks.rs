//! Chunked, resumable execution and gap-checked aggregation.

use super::config::ExperimentConfig;
use super::schedule::schedule_hyperparams;
use super::HarnessError;
use crate::data::{stratified_split, Dataset};
use crate::landscape::ExplanationMatrix;
use crate::runs::{execute_run, RunRecord, SplitContext};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum AggregationError {
    #[error("split {split_seed}: run {run_id} appears more than once")]
    Duplicate { split_seed: u64, run_id: u64 },
    #[error("split {split_seed}: missing runs {}", format_ids(.missing))]
    Gap { split_seed: u64, missing: Vec<u64> },
    #[error("split {split_seed}: run {run_id} is outside 0..{runs}")]
    OutOfRange { split_seed: u64, run_id: u64, runs: usize },
    #[error("{path}: line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_ids(ids: &[u64]) -> String {
    const SHOWN: usize = 20;
    let mut s: Vec<String> = ids.iter().take(SHOWN).map(u64::to_string).collect();
    if ids.len() > SHOWN {
        s.push(format!("... ({} in total)", ids.len()));
    }
    s.join(", ")
}

/// Inclusive run-id range of one chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkRange {
    pub split_seed: u64,
    pub start: u64,
    pub end: u64,
}

impl ChunkRange {
    pub fn file_name(&self) -> String {
        format!("split{}_chunk{}-{}.jsonl", self.split_seed, self.start, self.end)
    }

    pub fn meta_name(&self) -> String {
        format!("split{}_chunk{}-{}.meta.json", self.split_seed, self.start, self.end)
    }
}

pub fn chunk_plan(split_seed: u64, runs: usize, chunk_size: usize) -> Vec<ChunkRange> {
    (0..runs as u64)
        .step_by(chunk_size)
        .map(|start| ChunkRange {
            split_seed,
            start,
            end: (start + chunk_size as u64).min(runs as u64) - 1,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: u64,
    pub error: String,
}

/// Sidecar with the non-deterministic parts of a chunk's execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkMeta {
    pub split_seed: u64,
    pub start: u64,
    pub end: u64,
    pub computed: usize,
    pub reused: usize,
    pub wall_seconds: f64,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub computed: usize,
    pub reused: usize,
    pub failed: Vec<(u64, u64)>,
    pub chunks_written: usize,
}

pub fn chunk_dir(output: &Path) -> PathBuf {
    output.join("chunks")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Write via a temporary file and rename, so readers never see a torn chunk.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("part");
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_chunk(path: &Path) -> Result<Vec<RunRecord>, AggregationError> {
    let f = std::fs::File::open(path).map_err(|source| AggregationError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| AggregationError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| AggregationError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn encode(records: &[RunRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialise");
        buf.push(b'\n');
    }
    buf
}

pub struct RunOptions {
    pub jobs: usize,
    pub resume: bool,
}

/// Prepare every split's context up front; they are shared read-only.
pub fn split_contexts(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<SplitContext>, HarnessError> {
    cfg.split_seeds
        .iter()
        .map(|&seed| {
            let split = stratified_split(ds, seed, cfg.test_fraction)?;
            Ok(SplitContext::new(ds, split, cfg.model.class))
        })
        .collect()
}

fn run_chunk(
    cfg: &ExperimentConfig,
    ctx: &SplitContext,
    range: ChunkRange,
    dir: &Path,
    resume: bool,
) -> Result<ChunkMeta, HarnessError> {
    let path = dir.join(range.file_name());
    let started = Instant::now();
    let mut have: BTreeMap<u64, RunRecord> = BTreeMap::new();
    if resume && path.exists() {
        match read_chunk(&path) {
            Ok(records) => {
                for r in records {
                    if r.split_seed == range.split_seed && (range.start..=range.end).contains(&r.run_id) {
                        have.entry(r.run_id).or_insert(r);
                    }
                }
            }
            Err(e) => log::warn!("{e}; recomputing the chunk"),
        }
    }
    let reused = have.len();
    let total = (range.end - range.start + 1) as usize;
    if resume && reused == total {
        log::debug!("{} complete, skipping", range.file_name());
        return Ok(ChunkMeta {
            split_seed: range.split_seed,
            start: range.start,
            end: range.end,
            computed: 0,
            reused,
            wall_seconds: 0.0,
            failures: Vec::new(),
        });
    }
    let mut failures = Vec::new();
    let mut computed = 0;
    for run_id in range.start..=range.end {
        if have.contains_key(&run_id) {
            continue;
        }
        let (hyper, seed) = schedule_hyperparams(cfg, range.split_seed, run_id)?;
        match execute_run(ctx, run_id, &hyper, seed) {
            Ok((record, _)) => {
                have.insert(run_id, record);
                computed += 1;
            }
            Err(e) => {
                log::error!("split {} run {run_id} failed: {e}", range.split_seed);
                failures.push(RunFailure { run_id, error: e.to_string() });
            }
        }
    }
    let records: Vec<RunRecord> = have.into_values().collect();
    write_atomic(&path, &encode(&records))?;
    let meta = ChunkMeta {
        split_seed: range.split_seed,
        start: range.start,
        end: range.end,
        computed,
        reused,
        wall_seconds: started.elapsed().as_secs_f64(),
        failures,
    };
    let meta_path = dir.join(range.meta_name());
    let text = serde_json::to_vec_pretty(&meta).expect("meta serialises");
    write_atomic(&meta_path, &text)?;
    log::info!(
        "{}: {computed} computed, {reused} reused in {:.1}s",
        range.file_name(),
        meta.wall_seconds
    );
    Ok(meta)
}

/// Execute every (split, chunk) task on a pool of `jobs` workers. Each task
/// owns its chunk file; a run's randomness depends only on its ids.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    opts: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    let dir = chunk_dir(&cfg.output_dir);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let contexts = split_contexts(cfg, ds)?;
    let tasks: Vec<(usize, ChunkRange)> = contexts
        .iter()
        .enumerate()
        .flat_map(|(i, ctx)| {
            chunk_plan(ctx.split.split_seed, cfg.runs, cfg.chunk_size)
                .into_iter()
                .map(move |c| (i, c))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let metas: Vec<Result<ChunkMeta, HarnessError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, range)| run_chunk(cfg, &contexts[i], range, &dir, opts.resume))
            .collect()
    });
    let mut summary = RunSummary::default();
    for m in metas {
        let m = m?;
        summary.computed += m.computed;
        summary.reused += m.reused;
        if m.computed > 0 || !m.failures.is_empty() {
            summary.chunks_written += 1;
        }
        summary.failed.extend(m.failures.iter().map(|f| (m.split_seed, f.run_id)));
    }
    Ok(summary)
}

fn chunk_files(dir: &Path, split_seed: u64) -> Result<Vec<PathBuf>, AggregationError> {
    let prefix = format!("split{split_seed}_chunk");
    let rd = std::fs::read_dir(dir).map_err(|source| AggregationError::Io { path: dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|source| AggregationError::Io { path: dir.to_path_buf(), source })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with(&prefix) && name.ends_with(".jsonl") {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// All records of one split, sorted by run id, with exactly the ids
/// `0..runs` present.
pub fn aggregate(dir: &Path, split_seed: u64, runs: usize) -> Result<Vec<RunRecord>, AggregationError> {
    let mut records = Vec::new();
    for f in chunk_files(dir, split_seed)? {
        records.extend(read_chunk(&f)?.into_iter().filter(|r| r.split_seed == split_seed));
    }
    aggregate_records(records, split_seed, runs)
}

pub fn aggregate_records(
    mut records: Vec<RunRecord>,
    split_seed: u64,
    runs: usize,
) -> Result<Vec<RunRecord>, AggregationError> {
    records.sort_by_key(|r| r.run_id);
    if let Some(w) = records.windows(2).find(|w| w[0].run_id == w[1].run_id) {
        return Err(AggregationError::Duplicate { split_seed, run_id: w[0].run_id });
    }
    if let Some(r) = records.iter().find(|r| r.run_id >= runs as u64) {
        return Err(AggregationError::OutOfRange { split_seed, run_id: r.run_id, runs });
    }
    if records.len() != runs {
        let present: std::collections::HashSet<u64> = records.iter().map(|r| r.run_id).collect();
        let missing = (0..runs as u64).filter(|i| !present.contains(i)).collect();
        return Err(AggregationError::Gap { split_seed, missing });
    }
    Ok(records)
}

/// Stack the importance vectors of aggregated records.
pub fn explanation_matrix(records: &[RunRecord], split_seed: u64) -> Result<ExplanationMatrix, HarnessError> {
    let d = records.first().map_or(0, |r| r.e.len());
    if records.iter().any(|r| r.e.len() != d) {
        return Err(HarnessError::Integrity(format!("split {split_seed}: importance vectors differ in length")));
    }
    let flat: Vec<f64> = records.iter().flat_map(|r| r.e.iter().copied()).collect();
    let e = Array2::from_shape_vec((records.len(), d), flat).expect("shape");
    let ids = records.iter().map(|r| r.run_id).collect();
    Ok(ExplanationMatrix::new(e, ids, split_seed)?)
}
