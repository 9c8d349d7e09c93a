use super::{sq_dist, LandscapeError};
use crate::rng::{derive_seed, Prng};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `k × d`, the mean of each cluster's members.
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squared Euclidean distances.
    pub inertia: f64,
}

/// Best of [`DEFAULT_RESTARTS`] k-means++ / Lloyd runs.
pub fn kmeans(x: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeansResult, LandscapeError> {
    kmeans_with_restarts(x, k, seed, DEFAULT_RESTARTS)
}

/// Restart `i` is seeded with `derive_seed(&[seed, i])`; the lowest inertia
/// wins, earlier restarts on ties.
pub fn kmeans_with_restarts(
    x: ArrayView2<f64>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<KMeansResult, LandscapeError> {
    let n = x.nrows();
    if k == 0 {
        return Err(LandscapeError::Invalid("k must be positive".into()));
    }
    if k > n {
        return Err(LandscapeError::KTooLarge { k, n });
    }
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut best: Option<KMeansResult> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = Prng::seed_from_u64(derive_seed(&[seed, restart as u64]));
        let centres = plus_plus(&rows, k, &mut rng);
        let fit = lloyd(&rows, centres);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut Prng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centres = vec![rows[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding landing on a zero-weight tail
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = rows[pick].clone();
        for (w, r) in d2.iter_mut().zip(rows) {
            *w = w.min(sq_dist(r, &c));
        }
        centres.push(c);
    }
    centres
}

fn nearest(r: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centres.iter().enumerate() {
        let d = sq_dist(r, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn means(rows: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in rows.iter().zip(labels) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    sums
}

/// Move points into empty clusters: each empty cluster takes the point
/// farthest from its centroid among clusters that can spare one.
fn fill_empty(rows: &[Vec<f64>], labels: &mut [usize], centres: &[Vec<f64>]) {
    let k = centres.len();
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&c| counts[c] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (usize::MAX, -1.0);
        for (i, r) in rows.iter().enumerate() {
            if counts[labels[i]] >= 2 {
                let d = sq_dist(r, &centres[labels[i]]);
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        labels[far.0] = empty;
    }
}

/// Single-point transfers that strictly lower the sum of squares. Moving
/// `x` from `a` to `b` changes it by
/// `n_b/(n_b+1)·|x-c_b|² - n_a/(n_a-1)·|x-c_a|²`. Every such optimum is
/// also a Lloyd fixed point, but many Lloyd fixed points are not optima.
fn hartigan(rows: &[Vec<f64>], labels: &mut [usize], centres: &mut [Vec<f64>]) {
    let k = centres.len();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&c| counts[c] += 1);
    for _ in 0..MAX_LLOYD_ITERS {
        let mut moved = false;
        for (i, r) in rows.iter().enumerate() {
            let a = labels[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let cost_out = na / (na - 1.0) * sq_dist(r, &centres[a]);
            let mut best = (a, 0.0);
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let delta = nb / (nb + 1.0) * sq_dist(r, &centres[b]) - cost_out;
                if delta < best.1 - 1e-12 * cost_out.max(f64::MIN_POSITIVE) {
                    best = (b, delta);
                }
            }
            let b = best.0;
            if b != a {
                let nb = counts[b] as f64;
                for (j, v) in r.iter().enumerate() {
                    centres[a][j] = (centres[a][j] * na - v) / (na - 1.0);
                    centres[b][j] = (centres[b][j] * nb + v) / (nb + 1.0);
                }
                counts[a] -= 1;
                counts[b] += 1;
                labels[i] = b;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    // recompute exactly to shed drift from the incremental updates
    let fresh = means(rows, labels, k);
    centres.iter_mut().zip(fresh).for_each(|(c, f)| *c = f);
}

fn lloyd(rows: &[Vec<f64>], mut centres: Vec<Vec<f64>>) -> KMeansResult {
    let k = centres.len();
    let mut labels: Vec<usize> = vec![usize::MAX; rows.len()];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut next: Vec<usize> = rows.iter().map(|r| nearest(r, &centres).0).collect();
        fill_empty(rows, &mut next, &centres);
        let changed = next != labels;
        labels = next;
        centres = means(rows, &labels, k);
        if !changed {
            break;
        }
    }
    hartigan(rows, &mut labels, &mut centres);
    let inertia = rows.iter().zip(&labels).map(|(r, &c)| sq_dist(r, &centres[c])).sum();
    let d = rows[0].len();
    let centroids = Array2::from_shape_vec((k, d), centres.concat()).expect("shape");
    KMeansResult { labels, centroids, inertia }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exhaustive_kmeans_inertia;
    use crate::rng::prng;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn one_dimensional_pairs() {
        let x = array![[0.0], [0.1], [10.0], [10.1]];
        let r = kmeans(x.view(), 2, 3).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[2], r.labels[3]);
        assert_ne!(r.labels[0], r.labels[2]);
        let mut c: Vec<f64> = r.centroids.column(0).to_vec();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.05).abs() < 1e-12 && (c[1] - 10.05).abs() < 1e-12);
        assert!((r.inertia - exhaustive_kmeans_inertia(x.view(), 2)).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [5.0, -1.0]];
        let r = kmeans(x.view(), 3, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut l = r.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn duplicated_points_same_centroids() {
        let x = array![[0.0], [0.1], [10.0], [10.1]];
        let xx = array![[0.0], [0.0], [0.1], [0.1], [10.0], [10.0], [10.1], [10.1]];
        let sorted = |r: &KMeansResult| {
            let mut c = r.centroids.column(0).to_vec();
            c.sort_by(f64::total_cmp);
            c
        };
        let a = sorted(&kmeans(x.view(), 2, 1).unwrap());
        let b = sorted(&kmeans(xx.view(), 2, 1).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_rows_fewer_distinct_than_k() {
        let x = array![[1.0], [1.0], [1.0], [2.0]];
        let r = kmeans(x.view(), 3, 5).unwrap();
        let mut counts = [0; 3];
        r.labels.iter().for_each(|&c| counts[c] += 1);
        assert!(counts.iter().all(|&c| c > 0));
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn k_too_large() {
        let x = array![[1.0], [2.0]];
        assert_eq!(kmeans(x.view(), 3, 0), Err(LandscapeError::KTooLarge { k: 3, n: 2 }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn more_restarts_never_worse(seed in any::<u64>(), k in 2usize..5) {
            let mut rng = prng(&[seed]);
            let x = Array2::from_shape_fn((30, 2), |_| rng.gen::<f64>());
            let mut last = f64::INFINITY;
            for restarts in 1..=6 {
                let r = kmeans_with_restarts(x.view(), k, seed, restarts).unwrap();
                prop_assert!(r.inertia <= last);
                last = r.inertia;
            }
        }

        #[test]
        fn deterministic(seed in any::<u64>()) {
            let mut rng = prng(&[seed, 1]);
            let x = Array2::from_shape_fn((25, 3), |_| rng.gen::<f64>());
            prop_assert_eq!(kmeans(x.view(), 3, seed).unwrap(), kmeans(x.view(), 3, seed).unwrap());
        }
    }
}
