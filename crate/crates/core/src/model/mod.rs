//! The two studied model classes, trained from first principles.

pub mod forest;
pub mod lbfgs;
pub mod logreg;

pub use forest::{
    predict_proba_forest, train_forest, ForestHyper, ForestModel, MaxFeatures, Tree, TreeNode,
};
pub use logreg::{
    predict_proba_linear, sigmoid, train_logreg, train_logreg_from, LinearModel, LogRegHyper,
    LogisticObjective,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("empty input")]
    Empty,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, found })
    }
}

/// Fraction of rows whose thresholded probability (`p >= 0.5` is positive)
/// matches the label.
pub fn accuracy(p: &[f64], y: &[u8]) -> Result<f64, ModelError> {
    if p.is_empty() {
        return Err(ModelError::Empty);
    }
    check_dim(p.len(), y.len())?;
    let hits = p
        .iter()
        .zip(y)
        .filter(|(&p, &y)| u8::from(p >= 0.5) == y)
        .count();
    Ok(hits as f64 / p.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1.0, 0.0, 1.0], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0.5, 0.5], &[1, 1]).unwrap(), 1.0);
        assert!((accuracy(&[0.9, 0.2, 0.7], &[1, 1, 0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&[], &[]), Err(ModelError::Empty));
        assert!(accuracy(&[0.1], &[1, 0]).is_err());
    }
}
