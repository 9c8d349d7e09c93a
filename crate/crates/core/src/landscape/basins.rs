use super::{
    detect_degenerate, kmeans, normalize_with, norm2, silhouette, DistanceMatrix, ExplanationMatrix,
    LandscapeError, NormalizationMode, DEFAULT_DEGENERACY_TOL, DEFAULT_DROP_EPS,
};
use crate::rng::derive_seed;
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_K_RANGE: [usize; 7] = [2, 3, 4, 5, 6, 7, 8];
pub const DEFAULT_TOP_M: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinSettings {
    pub mode: NormalizationMode,
    pub drop_eps: f64,
    pub degeneracy_tol: f64,
    pub k_range: Vec<usize>,
    pub seed: u64,
}

impl Default for BasinSettings {
    fn default() -> Self {
        Self {
            mode: NormalizationMode::Centered,
            drop_eps: DEFAULT_DROP_EPS,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            k_range: DEFAULT_K_RANGE.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k_star: usize,
    /// Raw k-means labels for `k_star` (not canonicalised).
    pub labels: Vec<usize>,
    pub silhouette_by_k: BTreeMap<usize, f64>,
    /// Set when every row is identical, in which case `k_star` is 1.
    pub degenerate: bool,
}

/// Silhouette-maximising k over `k_range`, ties to the smaller k. k-means
/// for each k is seeded with `derive_seed(&[seed, k])`.
pub fn select_k(ehat: ArrayView2<f64>, seed: u64, k_range: &[usize]) -> Result<KSelection, LandscapeError> {
    let n = ehat.nrows();
    if n < 2 {
        return Err(LandscapeError::TooFewRows { needed: 2, found: n });
    }
    let first = ehat.row(0);
    if ehat.rows().into_iter().all(|r| r == first) {
        return Ok(KSelection {
            k_star: 1,
            labels: vec![0; n],
            silhouette_by_k: BTreeMap::new(),
            degenerate: true,
        });
    }
    let dist = DistanceMatrix::new(ehat);
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    let mut silhouette_by_k = BTreeMap::new();
    let mut ks: Vec<usize> = k_range.iter().copied().filter(|&k| k >= 2 && k <= n).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(LandscapeError::Invalid(format!("no candidate k in {k_range:?} fits {n} rows")));
    }
    for k in ks {
        let fit = kmeans(ehat, k, derive_seed(&[seed, k as u64]))?;
        let s = silhouette(&dist, &fit.labels)?;
        silhouette_by_k.insert(k, s);
        if best.as_ref().is_none_or(|b| s > b.1) {
            best = Some((k, s, fit.labels));
        }
    }
    let (k_star, _, labels) = best.expect("non-empty candidate set");
    Ok(KSelection { k_star, labels, silhouette_by_k, degenerate: false })
}

/// Shannon entropy (natural log) of basin supports divided by `log k`.
pub fn mechanistic_entropy(supports: &[f64]) -> Result<f64, LandscapeError> {
    if supports.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(LandscapeError::Invalid(format!("supports {supports:?} contain a negative value")));
    }
    let total: f64 = supports.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(LandscapeError::Invalid(format!("supports sum to {total}, not 1")));
    }
    let k = supports.len();
    if k <= 1 {
        return Ok(0.0);
    }
    let h: f64 = supports.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    Ok((h / (k as f64).ln()).clamp(0.0, 1.0))
}

/// Clustering outcome for one split, with labels numbered by descending
/// cluster size (ties to the cluster holding the smallest run id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub k_star: usize,
    /// Runs that were clustered, ascending.
    pub run_ids: Vec<u64>,
    pub labels: Vec<usize>,
    pub silhouette_by_k: BTreeMap<usize, f64>,
    /// Silhouette at `k_star`; absent for the collapsed case.
    pub silhouette: Option<f64>,
    pub cluster_sizes: Vec<usize>,
    pub supports: Vec<f64>,
    pub entropy_norm: f64,
    /// `k_star × d`: mean of each basin's normalised members.
    pub centroids: Vec<Vec<f64>>,
    pub degenerate: bool,
    pub dropped_rows: Vec<u64>,
    pub mode: NormalizationMode,
}

impl BasinReport {
    /// Run ids belonging to basin `c`.
    pub fn members(&self, c: usize) -> Vec<u64> {
        self.run_ids
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == c)
            .map(|(&r, _)| r)
            .collect()
    }
}

fn canonical_labels(raw: &[usize], run_ids: &[u64]) -> Vec<usize> {
    let k = raw.iter().max().map_or(0, |m| m + 1);
    let mut info: Vec<(usize, u64, usize)> = (0..k).map(|c| (0, u64::MAX, c)).collect();
    for (&c, &id) in raw.iter().zip(run_ids) {
        info[c].0 += 1;
        info[c].1 = info[c].1.min(id);
    }
    info.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut map = vec![0; k];
    for (new, &(_, _, old)) in info.iter().enumerate() {
        map[old] = new;
    }
    raw.iter().map(|&c| map[c]).collect()
}

fn collapsed(e: &ExplanationMatrix, mode: NormalizationMode) -> BasinReport {
    let mu = e.e.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let len = norm2(&mu);
    let centroid = if len > 0.0 { mu.iter().map(|v| v / len).collect() } else { mu };
    BasinReport {
        k_star: 1,
        run_ids: e.run_ids.clone(),
        labels: vec![0; e.n_runs()],
        silhouette_by_k: BTreeMap::new(),
        silhouette: None,
        cluster_sizes: vec![e.n_runs()],
        supports: vec![1.0],
        entropy_norm: 0.0,
        centroids: vec![centroid],
        degenerate: true,
        dropped_rows: Vec::new(),
        mode,
    }
}

/// Full basin analysis of one split: degeneracy check, normalisation,
/// k selection, canonical labels, supports, entropy and centroids.
pub fn analyze_basins(e: &ExplanationMatrix, s: &BasinSettings) -> Result<BasinReport, LandscapeError> {
    if e.n_runs() < 2 {
        return Err(LandscapeError::TooFewRows { needed: 2, found: e.n_runs() });
    }
    if detect_degenerate(e, s.degeneracy_tol) {
        return Ok(collapsed(e, s.mode));
    }
    let norm = match normalize_with(e, s.drop_eps, s.mode) {
        Ok(n) => n,
        Err(LandscapeError::TotalDegeneracy) => return Ok(collapsed(e, s.mode)),
        Err(err) => return Err(err),
    };
    let sel = select_k(norm.ehat.view(), s.seed, &s.k_range)?;
    let labels = canonical_labels(&sel.labels, &norm.run_ids);
    let k = sel.k_star;
    let n = labels.len();
    let mut cluster_sizes = vec![0usize; k];
    labels.iter().for_each(|&c| cluster_sizes[c] += 1);
    let supports: Vec<f64> = cluster_sizes.iter().map(|&c| c as f64 / n as f64).collect();
    let entropy_norm = mechanistic_entropy(&supports)?;
    let d = norm.ehat.ncols();
    let mut centroids = vec![vec![0.0; d]; k];
    for (row, &c) in norm.ehat.rows().into_iter().zip(&labels) {
        for (acc, v) in centroids[c].iter_mut().zip(row) {
            *acc += v / cluster_sizes[c] as f64;
        }
    }
    Ok(BasinReport {
        k_star: k,
        silhouette: sel.silhouette_by_k.get(&k).copied(),
        run_ids: norm.run_ids,
        labels,
        silhouette_by_k: sel.silhouette_by_k,
        cluster_sizes,
        supports,
        entropy_norm,
        centroids,
        degenerate: sel.degenerate,
        dropped_rows: norm.dropped_rows,
        mode: s.mode,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub size: usize,
    /// Mean of the normalised member rows.
    pub centroid: Vec<f64>,
    /// Mean of the raw importance vectors of the members.
    pub raw_mean: Vec<f64>,
    /// The `m` largest entries of `raw_mean` as `(feature, value)`.
    pub top_features: Vec<(String, f64)>,
}

/// Per-cluster centroids and raw importance profiles. Row `i` of `ehat` and
/// `e_raw` must describe the same run.
pub fn centroid_profiles(
    ehat: ArrayView2<f64>,
    labels: &[usize],
    e_raw: ArrayView2<f64>,
    names: &[String],
    m: usize,
) -> Result<Vec<ClusterProfile>, LandscapeError> {
    let n = ehat.nrows();
    if labels.len() != n || e_raw.nrows() != n || e_raw.ncols() != names.len() {
        return Err(LandscapeError::Invalid("profile inputs disagree in shape".into()));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            return Err(LandscapeError::EmptyCluster(c));
        }
        let mean_of = |x: ArrayView2<f64>| -> Vec<f64> {
            let sel: Array2<f64> = x.select(Axis(0), &idx);
            sel.mean_axis(Axis(0)).expect("non-empty").to_vec()
        };
        let centroid = mean_of(ehat);
        let raw_mean = mean_of(e_raw);
        let mut order: Vec<usize> = (0..raw_mean.len()).collect();
        order.sort_by(|&a, &b| raw_mean[b].total_cmp(&raw_mean[a]).then(a.cmp(&b)));
        let top_features = order.iter().take(m).map(|&j| (names[j].clone(), raw_mean[j])).collect();
        out.push(ClusterProfile { cluster: c, size: idx.len(), centroid, raw_mean, top_features });
    }
    Ok(out)
}
