//! Oracle suites that cross-check the fast implementations against slow
//! reference computations. Each suite is seeded and returns one outcome.

use crate::attribution::{forest_shap, linear_shap, tree_shap};
use crate::disagreement::disagreement_scores;
use crate::landscape::{kmeans_with_restarts, mechanistic_entropy, DEFAULT_RESTARTS};
use crate::model::lbfgs::Objective;
use crate::model::{
    predict_proba_forest, sigmoid, train_forest, train_logreg, ForestHyper, LinearModel, LogRegHyper,
    LogisticObjective, MaxFeatures,
};
use crate::oracle::{
    bisect, brute_force_tree_shapley, exhaustive_kmeans_inertia, finite_difference_gradient, random_tree,
};
use crate::rng::{derive_seed, prng};
use crate::runs::TrainedModel;
use ndarray::{array, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

pub const ENTROPY_TOL: f64 = 1e-3;
pub const EFFICIENCY_TOL: f64 = 1e-8;
pub const TREE_SHAP_TOL: f64 = 1e-8;
pub const KMEANS_TOL: f64 = 1e-9;
pub const SCALAR_TOL: f64 = 1e-3;
pub const GRADIENT_REL_TOL: f64 = 1e-4;

/// `(name, supports, expected)` pairs for the entropy check.
pub const ENTROPY_CASES: [(&str, [f64; 2], f64); 2] =
    [("866/134", [0.866, 0.134], 0.568), ("556/444", [0.556, 0.444], 0.991)];

pub fn entropy_examples() -> CheckOutcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, supports, expected) in ENTROPY_CASES {
        match mechanistic_entropy(&supports) {
            Ok(h) => {
                ok &= (h - expected).abs() <= ENTROPY_TOL;
                parts.push(format!("{label}: {h:.6} (want {expected} ± {ENTROPY_TOL})"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{label}: {e}"));
            }
        }
    }
    CheckOutcome::new("entropy", ok, parts.join("; "))
}

fn random_linear<R: Rng>(rng: &mut R, d: usize) -> LinearModel {
    LinearModel {
        w: (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        b: rng.gen_range(-2.0..2.0),
        converged: true,
        final_grad_norm: 0.0,
        iterations: 0,
    }
}

fn random_rows<R: Rng>(rng: &mut R, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0))
}

/// Attributions plus base value reproduce the model output on every row.
pub fn shap_efficiency(n_linear: usize, n_forest: usize, seed: u64) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut instances = 0usize;
    let mut failure = None;
    for i in 0..n_linear {
        let mut rng = prng(&[seed, 1, i as u64]);
        let d = rng.gen_range(1..=12);
        let m = random_linear(&mut rng, d);
        let x = random_rows(&mut rng, 10, d);
        let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        match linear_shap(&m, x.view(), &mu) {
            Ok(s) => {
                for (row, phi) in x.rows().into_iter().zip(s.values.rows()) {
                    let err = (phi.sum() + s.base_value - m.margin(&row.to_vec())).abs();
                    worst = worst.max(err);
                    instances += 1;
                }
            }
            Err(e) => failure = Some(format!("linear model {i}: {e}")),
        }
    }
    for i in 0..n_forest {
        let mut rng = prng(&[seed, 2, i as u64]);
        let d = rng.gen_range(2..=6);
        let x = random_rows(&mut rng, 40, d);
        let y: Vec<u8> = x
            .rows()
            .into_iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1] + rng.gen_range(-0.7..0.7) > 0.0))
            .collect();
        let h = ForestHyper {
            n_estimators: rng.gen_range(1..=8),
            max_depth: [None, Some(1), Some(2), Some(3), Some(5)][rng.gen_range(0..5)],
            min_samples_leaf: rng.gen_range(1..=3),
            max_features: [MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::Fraction(1.0)][rng.gen_range(0..3)],
            seed: rng.gen(),
        };
        let explained = random_rows(&mut rng, 10, d);
        let result = train_forest(x.view(), &y, &h).map_err(|e| e.to_string()).and_then(|f| {
            let s = forest_shap(&f, explained.view()).map_err(|e| e.to_string())?;
            let p = predict_proba_forest(&f, explained.view()).map_err(|e| e.to_string())?;
            Ok((s, p))
        });
        match result {
            Ok((s, p)) => {
                for (phi, pi) in s.values.rows().into_iter().zip(&p) {
                    worst = worst.max((phi.sum() + s.base_value - pi).abs());
                    instances += 1;
                }
            }
            Err(e) => failure = Some(format!("forest {i}: {e}")),
        }
    }
    let passed = failure.is_none() && worst <= EFFICIENCY_TOL;
    let detail = failure.unwrap_or_else(|| {
        format!("{n_linear} linear models, {n_forest} forests, {instances} instances, max error {worst:.2e}")
    });
    CheckOutcome::new("shap_efficiency", passed, detail)
}

/// Path-dependent TreeSHAP against subset enumeration on random trees.
pub fn tree_shap_oracle(n_trees: usize, seed: u64) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for i in 0..n_trees {
        let mut rng = prng(&[seed, 3, i as u64]);
        let d = rng.gen_range(1..=10);
        let t = random_tree(&mut rng, d, 16);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        match tree_shap(&t, &x) {
            Ok(phi) => {
                let oracle = brute_force_tree_shapley(&t, &x);
                for (a, b) in phi.iter().zip(&oracle) {
                    worst = worst.max((a - b).abs());
                }
            }
            Err(e) => failure = Some(format!("tree {i}: {e}")),
        }
    }
    let passed = failure.is_none() && worst <= TREE_SHAP_TOL;
    let detail = failure.unwrap_or_else(|| format!("{n_trees} trees, max deviation {worst:.2e}"));
    CheckOutcome::new("tree_shap_oracle", passed, detail)
}

/// Restarted k-means against the exhaustive partition minimum on small
/// uniform instances.
pub fn kmeans_oracle(n_instances: usize, seed: u64) -> CheckOutcome {
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..n_instances {
        let mut rng = prng(&[seed, 4, i as u64]);
        let n = rng.gen_range(4..=12);
        let d = rng.gen_range(1..=3);
        let k = rng.gen_range(2..=4.min(n - 1));
        let x = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>());
        let best = exhaustive_kmeans_inertia(x.view(), k);
        match kmeans_with_restarts(x.view(), k, derive_seed(&[seed, i as u64]), DEFAULT_RESTARTS) {
            Ok(r) => {
                let gap = r.inertia - best;
                worst = worst.max(gap.abs());
                if gap.abs() > KMEANS_TOL {
                    misses.push(format!("#{i} (n={n}, k={k}, gap {gap:.3e})"));
                }
            }
            Err(e) => misses.push(format!("#{i}: {e}")),
        }
    }
    let detail = if misses.is_empty() {
        format!("{n_instances} instances, max gap {worst:.2e}")
    } else {
        format!("{} of {n_instances} instances above the optimum: {}", misses.len(), misses.join(", "))
    };
    CheckOutcome::new("kmeans_oracle", misses.is_empty(), detail)
}

/// Root of the stationarity condition `w = 2C·σ(−w)` of the two-point,
/// no-intercept instance, found by bisection.
pub fn scalar_oracle(c: f64) -> f64 {
    bisect(|w| w - 2.0 * c * sigmoid(-w), 0.0, 2.0 * c, 1e-12)
}

/// Fitted weight and bisection root of the two-point scalar instance.
pub fn scalar_fit() -> Result<(f64, f64), String> {
    let x = array![[1.0], [-1.0]];
    let h = LogRegHyper { fit_intercept: false, ..LogRegHyper::with_c(1.0) };
    let m = train_logreg(x.view(), &[1, 0], &h).map_err(|e| e.to_string())?;
    Ok((m.w[0], scalar_oracle(1.0)))
}

pub fn logreg_scalar() -> CheckOutcome {
    match scalar_fit() {
        Ok((w, root)) => CheckOutcome::new(
            "logreg_scalar",
            (w - root).abs() <= SCALAR_TOL,
            format!("w = {w:.6}, bisection root {root:.6}, |diff| {:.2e}", (w - root).abs()),
        ),
        Err(e) => CheckOutcome::new("logreg_scalar", false, e),
    }
}

/// Analytic objective gradient against central differences, as the
/// relative max-norm error.
pub fn logreg_gradient(n_instances: usize, seed: u64) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for i in 0..n_instances {
        let mut rng = prng(&[seed, 5, i as u64]);
        let n = rng.gen_range(5..=30);
        let d = rng.gen_range(1..=6);
        let x = random_rows(&mut rng, n, d);
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let c = 10f64.powf(rng.gen_range(-2.0..2.0));
        let intercept = rng.gen_bool(0.5);
        let obj = LogisticObjective::new(x.view(), &y, c, intercept);
        let theta: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; obj.dim()];
        obj.value_grad(&theta, &mut g);
        let fd = finite_difference_gradient(|t| obj.value(t), &theta, 1e-5);
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    CheckOutcome::new(
        "logreg_gradient",
        worst <= GRADIENT_REL_TOL,
        format!("{n_instances} instances, max relative error {worst:.2e}"),
    )
}

/// Bounds, exactness and permutation invariance of the per-instance spread
/// of predicted probabilities over random model sets.
pub fn delta_properties(n_sets: usize, seed: u64) -> CheckOutcome {
    let mut problems = Vec::new();
    for i in 0..n_sets {
        let mut rng = prng(&[seed, 6, i as u64]);
        let m = rng.gen_range(2..=6);
        let d = rng.gen_range(1..=5);
        let mut models: Vec<TrainedModel> = (0..m).map(|_| TrainedModel::Linear(random_linear(&mut rng, d))).collect();
        let x = random_rows(&mut rng, 25, d);
        let (probs, delta) = match disagreement_scores(&models, x.view()) {
            Ok(v) => v,
            Err(e) => {
                problems.push(format!("set {i}: {e}"));
                continue;
            }
        };
        for (j, dj) in delta.iter().enumerate() {
            let col: Vec<f64> = probs.iter().map(|p| p[j]).collect();
            let spread = col.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - col.iter().copied().fold(f64::INFINITY, f64::min);
            if !(0.0..=1.0).contains(dj) || *dj != spread {
                problems.push(format!("set {i} instance {j}: delta {dj} vs spread {spread}"));
            }
        }
        models.shuffle(&mut rng);
        match disagreement_scores(&models, x.view()) {
            Ok((_, shuffled)) if shuffled == delta => {}
            _ => problems.push(format!("set {i}: delta changed under model permutation")),
        }
        let same = vec![models[0].clone(); m];
        match disagreement_scores(&same, x.view()) {
            Ok((_, zero)) if zero.iter().all(|v| *v == 0.0) => {}
            _ => problems.push(format!("set {i}: identical models disagree")),
        }
    }
    let passed = problems.is_empty();
    let detail = if passed {
        format!("{n_sets} model sets")
    } else {
        problems.into_iter().take(5).collect::<Vec<_>>().join("; ")
    };
    CheckOutcome::new("delta_properties", passed, detail)
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        entropy_examples(),
        shap_efficiency(100, 100, seed),
        tree_shap_oracle(200, seed),
        kmeans_oracle(100, seed),
        logreg_scalar(),
        logreg_gradient(50, seed),
        delta_properties(50, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(entropy_examples().passed);
        assert!(shap_efficiency(5, 5, 3).passed);
        assert!(tree_shap_oracle(10, 3).passed);
        assert!(logreg_gradient(5, 3).passed);
        assert!(delta_properties(5, 3).passed);
    }

    #[test]
    fn scalar_root_is_stationary() {
        let r = scalar_oracle(1.0);
        assert!((r - 2.0 * sigmoid(-r)).abs() < 1e-11);
    }
}
