//! Per-sample attributions and their reduction to a global importance vector.

mod global;
mod linear;
mod tree_shap;

pub use global::{global_importance, GlobalImportance};
pub use linear::linear_shap;
pub use tree_shap::tree_shap;

use crate::model::ForestModel;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttributionError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("empty forest")]
    EmptyForest,
    #[error("empty test set")]
    EmptyTestSet,
}

/// What the attributions (and `base_value`) are measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpace {
    LogOdds,
    Probability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix {
    /// `n_test × d`
    pub values: Array2<f64>,
    pub base_value: f64,
    pub output_space: OutputSpace,
}

/// Mean of per-tree TreeSHAP attributions over the ensemble.
pub fn forest_shap(m: &ForestModel, x: ArrayView2<f64>) -> Result<ShapMatrix, AttributionError> {
    if m.trees.is_empty() {
        return Err(AttributionError::EmptyForest);
    }
    if x.ncols() != m.n_features {
        return Err(AttributionError::DimensionMismatch {
            expected: m.n_features,
            found: x.ncols(),
        });
    }
    for t in &m.trees {
        tree_shap::validate_tree(t)?;
    }
    let n_trees = m.trees.len() as f64;
    let mut values = Array2::zeros((x.nrows(), x.ncols()));
    let mut row = vec![0.0; x.ncols()];
    for (i, xi) in x.rows().into_iter().enumerate() {
        let xi = xi.to_vec();
        row.iter_mut().for_each(|v| *v = 0.0);
        for t in &m.trees {
            tree_shap::tree_shap_into(t, &xi, &mut row)?;
        }
        for (j, v) in row.iter().enumerate() {
            values[[i, j]] = v / n_trees;
        }
    }
    let base_value = m.trees.iter().map(|t| t.expected_value()).sum::<f64>() / n_trees;
    Ok(ShapMatrix {
        values,
        base_value,
        output_space: OutputSpace::Probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{predict_proba_forest, train_forest, ForestHyper, MaxFeatures, Tree, TreeNode};
    use ndarray::array;
    use proptest::prelude::*;

    fn stump(feature: usize, left_p: f64, right_p: f64) -> Tree {
        weighted_stump(feature, left_p, right_p, 2.0, 2.0)
    }

    fn weighted_stump(feature: usize, left_p: f64, right_p: f64, lc: f64, rc: f64) -> Tree {
        Tree {
            nodes: vec![
                TreeNode::Split { feature, threshold: 0.0, left: 1, right: 2, cover: lc + rc },
                TreeNode::Leaf { proba: [1.0 - left_p, left_p], cover: lc },
                TreeNode::Leaf { proba: [1.0 - right_p, right_p], cover: rc },
            ],
        }
    }

    fn forest(trees: Vec<Tree>, d: usize) -> ForestModel {
        ForestModel {
            trees,
            hyper: ForestHyper {
                n_estimators: 1,
                max_depth: None,
                min_samples_leaf: 1,
                max_features: MaxFeatures::Sqrt,
                seed: 0,
            },
            n_features: d,
        }
    }

    #[test]
    fn identical_trees_match_single_tree() {
        let t = stump(1, 0.2, 0.9);
        let m = forest(vec![t.clone(), t.clone(), t.clone()], 2);
        let x = array![[0.0, -1.0], [0.0, 1.0]];
        let s = forest_shap(&m, x.view()).unwrap();
        for i in 0..2 {
            let single = tree_shap(&t, &x.row(i).to_vec()).unwrap();
            for j in 0..2 {
                assert!((s.values[[i, j]] - single[j]).abs() < 1e-15);
            }
        }
        assert!((s.base_value - t.expected_value()).abs() < 1e-15);
    }

    #[test]
    fn ensemble_is_mean_of_trees() {
        // per-tree phi_0 = 0.2 and 0.6 for a row going right
        let m = forest(vec![stump(0, 0.3, 0.7), weighted_stump(0, 0.0, 1.0, 3.0, 2.0)], 1);
        let s = forest_shap(&m, array![[1.0]].view()).unwrap();
        assert!((s.values[[0, 0]] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn empty_forest_and_bad_width() {
        let m = forest(vec![], 2);
        assert_eq!(forest_shap(&m, array![[0.0, 0.0]].view()), Err(AttributionError::EmptyForest));
        let m = forest(vec![stump(0, 0.0, 1.0)], 2);
        assert!(matches!(
            forest_shap(&m, array![[0.0]].view()),
            Err(AttributionError::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn trained_forest_is_efficient(seed in 0u64..1000) {
            let n = 60;
            let x = Array2::from_shape_fn((n, 4), |(i, j)| (((i * 7 + j * 13 + seed as usize) % 17) as f64) / 17.0);
            let y: Vec<u8> = (0..n).map(|i| u8::from(x[[i, 0]] + x[[i, 2]] > 1.0)).collect();
            let h = ForestHyper {
                n_estimators: 5,
                max_depth: Some(4),
                min_samples_leaf: 1,
                max_features: MaxFeatures::Sqrt,
                seed,
            };
            let m = train_forest(x.view(), &y, &h).unwrap();
            let s = forest_shap(&m, x.view()).unwrap();
            let p = predict_proba_forest(&m, x.view()).unwrap();
            for i in 0..n {
                let sum: f64 = s.values.row(i).sum();
                prop_assert!((sum - (p[i] - s.base_value)).abs() < 1e-8);
            }
            let again = forest_shap(&m, x.view()).unwrap();
            prop_assert_eq!(again.values, s.values);
        }
    }
}
