//! Geometry of a stack of per-run importance vectors: normalisation,
//! collapse detection, clustering into basins, entropy and embeddings.

mod basins;
mod kmeans;
mod normalize;
mod offset;
mod pca;
mod silhouette;

pub use basins::{
    analyze_basins, centroid_profiles, mechanistic_entropy, select_k, BasinReport, BasinSettings,
    ClusterProfile, KSelection, DEFAULT_K_RANGE, DEFAULT_TOP_M,
};
pub use kmeans::{kmeans, kmeans_with_restarts, KMeansResult, DEFAULT_RESTARTS, MAX_LLOYD_ITERS};
pub use normalize::{
    detect_degenerate, normalize, normalize_with, NormalizationMode, NormalizedMatrix,
    DEFAULT_DEGENERACY_TOL, DEFAULT_DROP_EPS,
};
pub use offset::{cosine_distance, mean_offset_score};
pub use pca::{pca_embed, Embedding2D, PcaMode};
pub use silhouette::{silhouette, silhouette_samples, DistanceMatrix};

use ndarray::Array2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LandscapeError {
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("every row collapsed onto the mean (total degeneracy)")]
    TotalDegeneracy,
    #[error("k = {k} exceeds the number of rows {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("silhouette is undefined for a single cluster")]
    SingleCluster,
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("input has rank 0")]
    RankZero,
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Row `r` is the importance vector of run `run_ids[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationMatrix {
    pub e: Array2<f64>,
    pub run_ids: Vec<u64>,
    pub split_seed: u64,
}

impl ExplanationMatrix {
    /// Checks finiteness, non-negativity and consecutive run ids.
    pub fn new(e: Array2<f64>, run_ids: Vec<u64>, split_seed: u64) -> Result<Self, LandscapeError> {
        if e.nrows() != run_ids.len() {
            return Err(LandscapeError::Invalid(format!(
                "{} rows but {} run ids",
                e.nrows(),
                run_ids.len()
            )));
        }
        if let Some(w) = run_ids.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(LandscapeError::Invalid(format!("run ids jump from {} to {}", w[0], w[1])));
        }
        if let Some(v) = e.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(LandscapeError::Invalid(format!("entry {v} is not a finite non-negative value")));
        }
        Ok(Self { e, run_ids, split_seed })
    }

    pub fn n_runs(&self) -> usize {
        self.e.nrows()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
