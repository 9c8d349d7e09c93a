//! Per-split analysis and the assembled report envelope.

use super::chunks::{aggregate, chunk_dir, explanation_matrix, split_contexts};
use super::config::ExperimentConfig;
use super::schedule::HYPER_STREAM;
use super::HarnessError;
use crate::data::Dataset;
use crate::disagreement::{
    disagreement_scores, retrain_representative, select_representatives, top_disagreements,
    DisagreementError, DisagreementReport, Representative, RETRAIN_TOL,
};
use crate::landscape::{
    analyze_basins, centroid_profiles, mean_offset_score, normalize_with, pca_embed, BasinReport,
    BasinSettings, ClusterProfile, Embedding2D, LandscapeError, NormalizationMode, PcaMode,
    DEFAULT_RESTARTS, MAX_LLOYD_ITERS,
};
use crate::model::LogRegHyper;
use crate::rng::{derive_seed, PRNG_NAME};
use crate::runs::{RunRecord, SplitContext};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

/// One row of the split-level table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub split_seed: u64,
    pub runs: usize,
    pub k_star: usize,
    pub silhouette: Option<f64>,
    pub h_norm: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub degenerate: bool,
    pub mean_offset: Option<f64>,
    pub mean_delta: Option<f64>,
    pub max_delta: Option<f64>,
}

/// One row of the cluster-level table. C statistics are absent for forests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub split_seed: u64,
    pub cluster: usize,
    pub runs: usize,
    pub support: f64,
    pub c_mean: Option<f64>,
    pub c_std: Option<f64>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub acc_mean: f64,
    pub acc_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEmbedding {
    pub embedding: Embedding2D,
    pub run_ids: Vec<u64>,
    pub labels: Vec<usize>,
    pub accuracy: Vec<f64>,
    /// Mean embedded position of each basin's members.
    pub centroid_points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAnalysis {
    pub split_seed: u64,
    pub basins: BasinReport,
    pub profiles: Vec<ClusterProfile>,
    pub embedding: Option<SplitEmbedding>,
    pub representatives: Vec<Representative>,
    pub disagreement: Option<DisagreementReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalEmbedding {
    pub embedding: Embedding2D,
    pub split_seeds: Vec<u64>,
    pub run_ids: Vec<u64>,
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub prng: String,
    pub degeneracy_tol: f64,
    pub drop_eps: f64,
    pub normalization: NormalizationMode,
    pub kmeans_restarts: usize,
    pub max_lloyd_iters: usize,
    pub kmeans_refinement: String,
    pub silhouette_metric: String,
    pub logreg_grad_tol: f64,
    pub logreg_max_iter: usize,
    pub retrain_tol: f64,
    pub hyper_stream: u64,
    pub std_ddof: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub class_counts: [usize; 2],
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub constants: Constants,
    pub dataset: DatasetSummary,
    pub split_table: Vec<SplitRow>,
    pub cluster_table: Vec<ClusterRow>,
    pub splits: Vec<SplitAnalysis>,
    pub universal: Option<UniversalEmbedding>,
}

/// Arithmetic mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        v
    }
}

/// Normalised rows kept for geometry, aligned with the basin run ids.
pub struct SplitGeometry {
    pub split_seed: u64,
    pub ehat: Array2<f64>,
    pub run_ids: Vec<u64>,
    pub accuracy: Vec<f64>,
}

fn integrity(e: DisagreementError) -> HarnessError {
    match e {
        DisagreementError::Integrity { .. } => HarnessError::Integrity(e.to_string()),
        other => HarnessError::Disagreement(other),
    }
}

/// Cluster one split's runs and derive every table row, embedding and
/// disagreement summary for it. `records` must be aggregated (ids `0..R`).
pub fn analyze_split(
    records: &[RunRecord],
    ctx: &SplitContext,
    names: &[String],
    cfg: &ExperimentConfig,
) -> Result<(SplitAnalysis, SplitRow, Vec<ClusterRow>, Option<SplitGeometry>), HarnessError> {
    let split_seed = ctx.split.split_seed;
    let em = explanation_matrix(records, split_seed)?;
    let a = &cfg.analysis;
    let settings = BasinSettings {
        mode: a.normalization,
        drop_eps: a.drop_eps,
        degeneracy_tol: a.degeneracy_tol,
        k_range: a.k_range.clone(),
        seed: derive_seed(&[a.clustering_seed, split_seed]),
    };
    let basins = analyze_basins(&em, &settings)?;
    let kept: Vec<usize> = basins.run_ids.iter().map(|&id| id as usize).collect();
    let raw = em.e.select(Axis(0), &kept);
    let ehat = match normalize_with(&em, a.drop_eps, a.normalization) {
        Ok(n) if n.run_ids == basins.run_ids => Some(n.ehat),
        Ok(_) | Err(LandscapeError::TotalDegeneracy) => None,
        Err(e) => return Err(e.into()),
    };
    // with no normalised rows (everything collapsed onto the mean) the raw
    // rows stand in for the profile centroids
    let profile_rows = ehat.as_ref().unwrap_or(&raw);
    let profiles = centroid_profiles(profile_rows.view(), &basins.labels, raw.view(), names, a.top_m)?;
    let accuracy: Vec<f64> = kept.iter().map(|&i| records[i].test_accuracy).collect();

    let embedding = match &ehat {
        Some(ehat) => {
            let mean_vector = match a.normalization {
                NormalizationMode::Unit => unit(em.e.mean_axis(Axis(0)).expect("rows").to_vec()),
                NormalizationMode::Centered => vec![0.0; em.e.ncols()],
            };
            match pca_embed(&[ehat.view()], PcaMode::PerSplit, &mean_vector) {
                Ok(embedding) => {
                    let mut sums = vec![[0.0; 2]; basins.k_star];
                    for (p, &l) in embedding.coords.iter().zip(&basins.labels) {
                        sums[l][0] += p[0];
                        sums[l][1] += p[1];
                    }
                    let centroid_points = sums
                        .iter()
                        .zip(&basins.cluster_sizes)
                        .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64])
                        .collect();
                    Some(SplitEmbedding {
                        embedding,
                        run_ids: basins.run_ids.clone(),
                        labels: basins.labels.clone(),
                        accuracy: accuracy.clone(),
                        centroid_points,
                    })
                }
                Err(LandscapeError::RankZero | LandscapeError::TooFewRows { .. }) => None,
                Err(e) => return Err(e.into()),
            }
        }
        None => None,
    };

    let mean_offset = if em.n_runs() >= 10 { finite(mean_offset_score(&em)?) } else { None };

    let (representatives, disagreement) = match (&ehat, basins.k_star >= 2) {
        (Some(ehat), true) => {
            let mut reps = select_representatives(&basins, ehat.view(), records).map_err(integrity)?;
            if let Some(n) = a.representative_count {
                reps.truncate(n);
            }
            let models = reps
                .iter()
                .map(|r| retrain_representative(&records[r.run_id as usize], ctx))
                .collect::<Result<Vec<_>, _>>()
                .map_err(integrity)?;
            let (probs, delta) = disagreement_scores(&models, ctx.x_test.view()).map_err(integrity)?;
            let report = top_disagreements(&delta, &ctx.y_test, &probs, &ctx.split.test_idx, a.top_n_disagreements)
                .map_err(integrity)?;
            (reps, Some(report))
        }
        _ => (Vec::new(), None),
    };

    let all_acc: Vec<f64> = records.iter().map(|r| r.test_accuracy).collect();
    let (acc_mean, acc_std) = mean_std(&all_acc);
    let split_row = SplitRow {
        split_seed,
        runs: records.len(),
        k_star: basins.k_star,
        silhouette: basins.silhouette,
        h_norm: basins.entropy_norm,
        acc_mean,
        acc_std,
        degenerate: basins.degenerate,
        mean_offset,
        mean_delta: disagreement.as_ref().map(|d| d.mean_delta),
        max_delta: disagreement.as_ref().map(|d| d.max_delta),
    };

    let cluster_rows = (0..basins.k_star)
        .map(|c| {
            let members: Vec<&RunRecord> =
                basins.members(c).iter().map(|&id| &records[id as usize]).collect();
            let acc: Vec<f64> = members.iter().map(|r| r.test_accuracy).collect();
            let cs: Vec<f64> = members.iter().filter_map(|r| r.hyper.c()).collect();
            let (acc_mean, acc_std) = mean_std(&acc);
            let c_stats = (!cs.is_empty()).then(|| {
                let (m, s) = mean_std(&cs);
                let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (m, s, lo, hi)
            });
            ClusterRow {
                split_seed,
                cluster: c,
                runs: members.len(),
                support: basins.supports[c],
                c_mean: c_stats.map(|s| s.0),
                c_std: c_stats.map(|s| s.1),
                c_min: c_stats.map(|s| s.2),
                c_max: c_stats.map(|s| s.3),
                acc_mean,
                acc_std,
            }
        })
        .collect();

    let geometry = ehat.map(|ehat| SplitGeometry {
        split_seed,
        ehat,
        run_ids: basins.run_ids.clone(),
        accuracy,
    });
    let analysis = SplitAnalysis {
        split_seed,
        basins,
        profiles,
        embedding,
        representatives,
        disagreement,
    };
    Ok((analysis, split_row, cluster_rows, geometry))
}

pub fn constants(cfg: &ExperimentConfig) -> Constants {
    Constants {
        prng: PRNG_NAME.to_string(),
        degeneracy_tol: cfg.analysis.degeneracy_tol,
        drop_eps: cfg.analysis.drop_eps,
        normalization: cfg.analysis.normalization,
        kmeans_restarts: DEFAULT_RESTARTS,
        max_lloyd_iters: MAX_LLOYD_ITERS,
        kmeans_refinement: "hartigan single-point transfers".to_string(),
        silhouette_metric: "euclidean".to_string(),
        logreg_grad_tol: LogRegHyper::DEFAULT_GRAD_TOL,
        logreg_max_iter: LogRegHyper::DEFAULT_MAX_ITER,
        retrain_tol: RETRAIN_TOL,
        hyper_stream: HYPER_STREAM,
        std_ddof: 1,
    }
}

/// Aggregate the chunks of every split and analyse them into an envelope.
pub fn run_analysis(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ReportEnvelope, HarnessError> {
    let dir = chunk_dir(&cfg.output_dir);
    let contexts = split_contexts(cfg, ds)?;
    let mut split_table = Vec::new();
    let mut cluster_table = Vec::new();
    let mut splits = Vec::new();
    let mut geometry = Vec::new();
    for ctx in &contexts {
        let records = aggregate(&dir, ctx.split.split_seed, cfg.runs)?;
        let (analysis, row, clusters, geo) = analyze_split(&records, ctx, &ds.schema.names, cfg)?;
        log::info!(
            "split {}: k* = {}, H = {:.3}, accuracy {:.3}",
            row.split_seed,
            row.k_star,
            row.h_norm,
            row.acc_mean
        );
        split_table.push(row);
        cluster_table.extend(clusters);
        splits.push(analysis);
        geometry.extend(geo);
    }
    let universal = universal_embedding(&geometry, cfg, &splits)?;
    Ok(ReportEnvelope {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        constants: constants(cfg),
        dataset: DatasetSummary {
            name: ds.name.clone(),
            n_rows: ds.n_rows(),
            n_features: ds.n_features(),
            class_counts: ds.class_counts(),
            feature_names: ds.schema.names.clone(),
        },
        split_table,
        cluster_table,
        splits,
        universal,
    })
}

fn universal_embedding(
    geometry: &[SplitGeometry],
    cfg: &ExperimentConfig,
    splits: &[SplitAnalysis],
) -> Result<Option<UniversalEmbedding>, HarnessError> {
    let n: usize = geometry.iter().map(|g| g.ehat.nrows()).sum();
    if n < 3 {
        return Ok(None);
    }
    let d = geometry[0].ehat.ncols();
    let mean_vector = match cfg.analysis.normalization {
        NormalizationMode::Unit => {
            // average raw attribution over every run of every split
            let mut acc = vec![0.0; d];
            let mut count = 0usize;
            for s in splits {
                for p in &s.profiles {
                    for (a, v) in acc.iter_mut().zip(&p.raw_mean) {
                        *a += v * p.size as f64;
                    }
                    count += p.size;
                }
            }
            unit(acc.into_iter().map(|v| v / count.max(1) as f64).collect())
        }
        NormalizationMode::Centered => vec![0.0; d],
    };
    let blocks: Vec<_> = geometry.iter().map(|g| g.ehat.view()).collect();
    let embedding = match pca_embed(&blocks, PcaMode::Universal, &mean_vector) {
        Ok(e) => e,
        Err(LandscapeError::RankZero) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    Ok(Some(UniversalEmbedding {
        embedding,
        split_seeds: geometry.iter().flat_map(|g| std::iter::repeat_n(g.split_seed, g.run_ids.len())).collect(),
        run_ids: geometry.iter().flat_map(|g| g.run_ids.iter().copied()).collect(),
        accuracy: geometry.iter().flat_map(|g| g.accuracy.iter().copied()).collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
