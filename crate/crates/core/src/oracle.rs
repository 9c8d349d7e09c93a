//! Slow, obviously-correct reference computations.
//!
//! These are used by the unit tests, the acceptance suite and the `verify`
//! subcommand to cross-check the fast implementations.

use crate::model::{LinearModel, Tree, TreeNode};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

fn shapley_weights(d: usize) -> Vec<f64> {
    // weight of a coalition of size s not containing the feature
    let fact: Vec<f64> = (0..=d).scan(1.0, |acc, i| {
        if i > 0 {
            *acc *= i as f64;
        }
        Some(*acc)
    })
    .collect();
    (0..d).map(|s| fact[s] * fact[d - s - 1] / fact[d]).collect()
}

/// Shapley values of an arbitrary set function over `d` players, by
/// enumerating every coalition. `value` receives a bitmask.
pub fn brute_force_shapley(d: usize, value: impl Fn(u32) -> f64) -> Vec<f64> {
    assert!(d < 31, "too many players to enumerate");
    let v: Vec<f64> = (0..1u32 << d).map(&value).collect();
    let weights = shapley_weights(d);
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << j;
        for s in 0..1u32 << d {
            if s & bit == 0 {
                *p += weights[s.count_ones() as usize] * (v[(s | bit) as usize] - v[s as usize]);
            }
        }
    }
    phi
}

/// Expected tree output when only the features in `mask` are known; unknown
/// features split the mass by child cover.
pub fn conditional_tree_value(tree: &Tree, x: &[f64], mask: u32) -> f64 {
    fn walk(tree: &Tree, x: &[f64], mask: u32, i: usize) -> f64 {
        match tree.nodes[i] {
            TreeNode::Leaf { proba, .. } => proba[1],
            TreeNode::Split { feature, threshold, left, right, cover } => {
                if mask & (1 << feature) != 0 {
                    walk(tree, x, mask, if x[feature] <= threshold { left } else { right })
                } else {
                    let wl = tree.nodes[left].cover() / cover;
                    let wr = tree.nodes[right].cover() / cover;
                    wl * walk(tree, x, mask, left) + wr * walk(tree, x, mask, right)
                }
            }
        }
    }
    walk(tree, x, mask, 0)
}

/// Path-dependent Shapley values of one tree by subset enumeration.
pub fn brute_force_tree_shapley(tree: &Tree, x: &[f64]) -> Vec<f64> {
    brute_force_shapley(x.len(), |mask| conditional_tree_value(tree, x, mask))
}

/// Shapley values of a linear margin with absent features imputed to `mu`.
pub fn brute_force_linear_shapley(m: &LinearModel, x: &[f64], mu: &[f64]) -> Vec<f64> {
    brute_force_shapley(x.len(), |mask| {
        let z: Vec<f64> = (0..x.len())
            .map(|j| if mask & (1 << j) != 0 { x[j] } else { mu[j] })
            .collect();
        m.margin(&z)
    })
}

/// A random tree over `d` features with between 1 and `max_leaves` leaves.
/// Features may repeat along a path; covers are consistent positive integers.
pub fn random_tree<R: Rng>(rng: &mut R, d: usize, max_leaves: usize) -> Tree {
    assert!(d >= 1 && max_leaves >= 1);
    let target = rng.gen_range(1..=max_leaves);
    let mut nodes = vec![TreeNode::Leaf { proba: [0.5, 0.5], cover: 0.0 }];
    let mut leaves = vec![0usize];
    while leaves.len() < target {
        let pick = leaves.swap_remove(rng.gen_range(0..leaves.len()));
        let left = nodes.len();
        nodes.push(TreeNode::Leaf { proba: [0.5, 0.5], cover: 0.0 });
        nodes.push(TreeNode::Leaf { proba: [0.5, 0.5], cover: 0.0 });
        nodes[pick] = TreeNode::Split {
            feature: rng.gen_range(0..d),
            threshold: rng.gen_range(-1.0..1.0),
            left,
            right: left + 1,
            cover: 0.0,
        };
        leaves.push(left);
        leaves.push(left + 1);
    }
    for &l in &leaves {
        let p: f64 = rng.gen();
        nodes[l] = TreeNode::Leaf { proba: [1.0 - p, p], cover: rng.gen_range(1..=20) as f64 };
    }
    // children always sit after their parent, so a reverse sweep fills covers
    for i in (0..nodes.len()).rev() {
        if let TreeNode::Split { left, right, .. } = nodes[i] {
            let c = nodes[left].cover() + nodes[right].cover();
            if let TreeNode::Split { cover, .. } = &mut nodes[i] {
                *cover = c;
            }
        }
    }
    Tree { nodes }
}

/// Minimum within-cluster sum of squares over every partition of the rows
/// into at most `k` non-empty groups. Exponential; keep `n` small.
pub fn exhaustive_kmeans_inertia(points: ArrayView2<f64>, k: usize) -> f64 {
    let n = points.nrows();
    assert!(k >= 1 && k <= n);
    let d = points.ncols();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    // restricted growth strings enumerate each set partition exactly once
    fn rec(
        i: usize,
        used: usize,
        k: usize,
        labels: &mut [usize],
        points: ArrayView2<f64>,
        d: usize,
        best: &mut f64,
    ) {
        let n = labels.len();
        if i == n {
            let mut sums = Array2::<f64>::zeros((used, d));
            let mut counts = vec![0usize; used];
            for (r, &c) in labels.iter().enumerate() {
                counts[c] += 1;
                for j in 0..d {
                    sums[[c, j]] += points[[r, j]];
                }
            }
            let mut sse = 0.0;
            for (r, &c) in labels.iter().enumerate() {
                for j in 0..d {
                    let diff = points[[r, j]] - sums[[c, j]] / counts[c] as f64;
                    sse += diff * diff;
                }
            }
            if sse < *best {
                *best = sse;
            }
            return;
        }
        for c in 0..used.min(k) {
            labels[i] = c;
            rec(i + 1, used, k, labels, points, d, best);
        }
        if used < k {
            labels[i] = used;
            rec(i + 1, used + 1, k, labels, points, d, best);
        }
    }
    rec(0, 0, k, &mut labels, points, d, &mut best);
    best
}

/// Root of a continuous `f` on `[lo, hi]` with a sign change, to `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on the bracket");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Central-difference gradient with step `h`.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    (0..x.len())
        .map(|j| {
            z[j] = x[j] + h;
            let up = f(&z);
            z[j] = x[j] - h;
            let down = f(&z);
            z[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Index of the row with the smallest cosine distance to `target`, ties to
/// the lower index. Plain scan over every row.
pub fn nearest_by_cosine(rows: ArrayView2<f64>, target: &[f64]) -> usize {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let tn = norm(target);
    let mut best = (f64::INFINITY, 0);
    for (i, r) in rows.rows().into_iter().enumerate() {
        let r = r.to_vec();
        let dot: f64 = r.iter().zip(target).map(|(a, b)| a * b).sum();
        let dist = 1.0 - dot / (norm(&r) * tn);
        if dist < best.0 {
            best = (dist, i);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::prng;
    use ndarray::array;

    #[test]
    fn weights_sum_to_one_per_feature() {
        for d in 1..8 {
            let w = shapley_weights(d);
            let total: f64 = (0..d).map(|s| w[s] * binom(d - 1, s)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn random_trees_are_valid() {
        let mut rng = prng(&[1]);
        for _ in 0..50 {
            let t = random_tree(&mut rng, 5, 16);
            t.validate().unwrap();
            assert!(t.n_leaves() <= 16);
        }
    }

    #[test]
    fn exhaustive_kmeans_small() {
        let p = array![[0.0], [0.1], [10.0], [10.1]];
        assert!((exhaustive_kmeans_inertia(p.view(), 2) - 0.01).abs() < 1e-12);
        assert_eq!(exhaustive_kmeans_inertia(p.view(), 4), 0.0);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12);
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn fd_gradient_quadratic() {
        let g = finite_difference_gradient(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn cosine_scan() {
        let rows = array![[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]];
        assert_eq!(nearest_by_cosine(rows.view(), &[0.5, 0.6]), 1);
        assert_eq!(nearest_by_cosine(rows.view(), &[1.0, 1.0]), 1);
    }
}
