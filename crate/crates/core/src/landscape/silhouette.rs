use super::{sq_dist, LandscapeError};
use ndarray::{Array2, ArrayView2};

/// Pairwise Euclidean distances, computed once and shared across k.
#[derive(Debug, Clone)]
pub struct DistanceMatrix(Array2<f64>);

impl DistanceMatrix {
    pub fn new(x: ArrayView2<f64>) -> Self {
        let n = x.nrows();
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut d = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = sq_dist(&rows[i], &rows[j]).sqrt();
                d[[i, j]] = v;
                d[[j, i]] = v;
            }
        }
        Self(d)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }
}

/// Per-point silhouette values; points in singleton clusters score 0.
pub fn silhouette_samples(dist: &DistanceMatrix, labels: &[usize]) -> Result<Vec<f64>, LandscapeError> {
    let n = dist.len();
    if labels.len() != n {
        return Err(LandscapeError::Invalid(format!("{} labels for {n} points", labels.len())));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&c| sizes[c] += 1);
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(LandscapeError::EmptyCluster(c));
    }
    if k < 2 {
        return Err(LandscapeError::SingleCluster);
    }
    let mut out = Vec::with_capacity(n);
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            sums[labels[j]] += dist.get(i, j);
        }
        let own = labels[i];
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette of a labelling.
pub fn silhouette(dist: &DistanceMatrix, labels: &[usize]) -> Result<f64, LandscapeError> {
    let s = silhouette_samples(dist, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn four_corner_points() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let s = silhouette(&DistanceMatrix::new(x.view()), &[0, 0, 1, 1]).unwrap();
        // every point: a = 1, b = (10 + sqrt(101)) / 2
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        let expected = (b - 1.0) / b;
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 0.9002).abs() < 1e-4);
    }

    #[test]
    fn coincident_clusters_score_zero() {
        // same 50 points in both clusters; a and b differ only by the self term
        let pts: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let both: Vec<f64> = pts.iter().chain(&pts).copied().collect();
        let x = Array2::from_shape_vec((100, 1), both).unwrap();
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 50)).collect();
        let s = silhouette(&DistanceMatrix::new(x.view()), &labels).unwrap();
        assert!(s.abs() < 0.05, "{s}");
    }

    #[test]
    fn duplicate_point_clusters_score_one() {
        let x = array![[0.0], [0.0], [5.0], [5.0]];
        assert_eq!(silhouette(&DistanceMatrix::new(x.view()), &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn errors_and_singletons() {
        let x = array![[0.0], [1.0], [5.0]];
        let d = DistanceMatrix::new(x.view());
        assert_eq!(silhouette(&d, &[0, 0, 0]), Err(LandscapeError::SingleCluster));
        assert_eq!(silhouette(&d, &[0, 0, 2]), Err(LandscapeError::EmptyCluster(1)));
        assert_eq!(silhouette_samples(&d, &[0, 0, 1]).unwrap()[2], 0.0);
    }

    proptest! {
        #[test]
        fn per_point_values_bounded(
            pts in prop::collection::vec(-5.0f64..5.0, 6..40),
            split in 1usize..3,
        ) {
            let n = pts.len() / 2;
            let x = Array2::from_shape_vec((n, 2), pts[..2 * n].to_vec()).unwrap();
            let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= split)).collect();
            let s = silhouette_samples(&DistanceMatrix::new(x.view()), &labels).unwrap();
            prop_assert!(s.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
