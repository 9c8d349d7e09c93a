//! Prediction disagreement between representatives of different basins.

use crate::landscape::{cosine_distance, BasinReport};
use crate::model::ModelError;
use crate::runs::{execute_run, Hyperparameters, RunError, RunRecord, SplitContext, TrainedModel};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DEFAULT_TOP_N: usize = 10;
/// Allowed drift in a retrained run's importance vector.
pub const RETRAIN_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum DisagreementError {
    #[error("a single basin has no representatives to compare")]
    NoRepresentatives,
    #[error("need at least two models, found {0}")]
    TooFewModels(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("run {0} is missing from the records")]
    MissingRecord(u64),
    #[error("integrity: run {run_id} of split {split_seed} does not reproduce: {detail}")]
    Integrity { run_id: u64, split_seed: u64, detail: String },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write disagreement table: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub basin: usize,
    pub run_id: u64,
    pub hyper: Hyperparameters,
    pub model_seed: u64,
    /// Cosine distance from the run's normalised vector to the basin centroid.
    pub cosine_distance: f64,
}

/// Per basin, the member closest in cosine distance to the basin centroid,
/// ties to the smaller run id. `ehat` rows align with `report.run_ids`.
pub fn select_representatives(
    report: &BasinReport,
    ehat: ArrayView2<f64>,
    records: &[RunRecord],
) -> Result<Vec<Representative>, DisagreementError> {
    if report.k_star < 2 {
        return Err(DisagreementError::NoRepresentatives);
    }
    if ehat.nrows() != report.run_ids.len() {
        return Err(DisagreementError::DimensionMismatch(format!(
            "{} normalised rows for {} labelled runs",
            ehat.nrows(),
            report.run_ids.len()
        )));
    }
    let mut best: Vec<Option<(f64, usize)>> = vec![None; report.k_star];
    for (i, (&label, row)) in report.labels.iter().zip(ehat.rows()).enumerate() {
        let d = cosine_distance(&row.to_vec(), &report.centroids[label]);
        if best[label].is_none_or(|(bd, _)| d < bd) {
            best[label] = Some((d, i));
        }
    }
    best.into_iter()
        .enumerate()
        .map(|(basin, b)| {
            let (cosine_distance, i) = b.ok_or(DisagreementError::NoRepresentatives)?;
            let run_id = report.run_ids[i];
            let rec = records
                .iter()
                .find(|r| r.run_id == run_id)
                .ok_or(DisagreementError::MissingRecord(run_id))?;
            Ok(Representative { basin, run_id, hyper: rec.hyper, model_seed: rec.model_seed, cosine_distance })
        })
        .collect()
}

/// Retrain a recorded run and check that it reproduces its accuracy
/// exactly and its importance vector within [`RETRAIN_TOL`].
pub fn retrain_representative(record: &RunRecord, ctx: &SplitContext) -> Result<TrainedModel, DisagreementError> {
    let integrity = |detail: String| DisagreementError::Integrity {
        run_id: record.run_id,
        split_seed: record.split_seed,
        detail,
    };
    if record.split_seed != ctx.split.split_seed {
        return Err(integrity(format!("recorded on split {}", record.split_seed)));
    }
    let (fresh, model) = execute_run(ctx, record.run_id, &record.hyper, record.model_seed)?;
    if fresh.test_accuracy != record.test_accuracy {
        return Err(integrity(format!(
            "accuracy {} vs recorded {}",
            fresh.test_accuracy, record.test_accuracy
        )));
    }
    if fresh.e.len() != record.e.len() {
        return Err(integrity("importance vector length changed".into()));
    }
    let drift = fresh.e.iter().zip(&record.e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if drift > RETRAIN_TOL {
        return Err(integrity(format!("importance vector drifted by {drift:e}")));
    }
    Ok(model)
}

/// `max_i p_i(x) - min_i p_i(x)` over the per-model probability vectors.
pub fn delta_from_probs(probs: &[Vec<f64>]) -> Result<Vec<f64>, DisagreementError> {
    if probs.len() < 2 {
        return Err(DisagreementError::TooFewModels(probs.len()));
    }
    let n = probs[0].len();
    if probs.iter().any(|p| p.len() != n) {
        return Err(DisagreementError::DimensionMismatch("probability vectors differ in length".into()));
    }
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = probs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[i]), hi.max(p[i])));
            hi - lo
        })
        .collect())
}

/// Per-model positive-class probabilities on `x` and the resulting deltas.
pub fn disagreement_scores(
    models: &[TrainedModel],
    x: ArrayView2<f64>,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), DisagreementError> {
    let probs = models.iter().map(|m| m.predict_proba(x)).collect::<Result<Vec<_>, _>>()?;
    let delta = delta_from_probs(&probs)?;
    Ok((probs, delta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRow {
    /// Position within the test set.
    pub instance: usize,
    /// Row of the source dataset.
    pub row_index: usize,
    pub y_true: u8,
    pub probs: Vec<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementReport {
    pub n_instances: usize,
    pub mean_delta: f64,
    pub max_delta: f64,
    /// Largest deltas first, ties to the lower instance.
    pub top: Vec<DisagreementRow>,
}

/// `probs[m][i]` is model `m`'s probability for test instance `i`;
/// `row_index[i]` maps it back to the dataset.
pub fn top_disagreements(
    delta: &[f64],
    y_test: &[u8],
    probs: &[Vec<f64>],
    row_index: &[usize],
    n: usize,
) -> Result<DisagreementReport, DisagreementError> {
    let len = delta.len();
    if y_test.len() != len || row_index.len() != len || probs.iter().any(|p| p.len() != len) {
        return Err(DisagreementError::DimensionMismatch("disagreement inputs differ in length".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| delta[b].total_cmp(&delta[a]).then(a.cmp(&b)));
    let top = order
        .iter()
        .take(n)
        .map(|&i| DisagreementRow {
            instance: i,
            row_index: row_index[i],
            y_true: y_test[i],
            probs: probs.iter().map(|p| p[i]).collect(),
            delta: delta[i],
        })
        .collect();
    let mean_delta = if len == 0 { 0.0 } else { delta.iter().sum::<f64>() / len as f64 };
    let max_delta = delta.iter().copied().fold(0.0, f64::max);
    Ok(DisagreementReport { n_instances: len, mean_delta, max_delta, top })
}

/// `instance_id,y_true,p_model_0..,delta` for the top rows.
pub fn write_csv<W: Write>(report: &DisagreementReport, out: W) -> Result<(), DisagreementError> {
    let mut w = csv::Writer::from_writer(out);
    let k = report.top.first().map_or(0, |r| r.probs.len());
    let mut header = vec!["instance_id".to_string(), "row_index".into(), "y_true".into()];
    header.extend((0..k).map(|m| format!("p_model_{m}")));
    header.push("delta".into());
    w.write_record(&header).map_err(std::io::Error::other)?;
    for r in &report.top {
        let mut rec = vec![r.instance.to_string(), r.row_index.to_string(), r.y_true.to_string()];
        rec.extend(r.probs.iter().map(|p| p.to_string()));
        rec.push(r.delta.to_string());
        w.write_record(&rec).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}
