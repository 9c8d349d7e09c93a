use super::{AttributionError, ShapMatrix};
use serde::{Deserialize, Serialize};

/// Mean absolute attribution per feature for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub e: Vec<f64>,
    pub run_id: u64,
}

pub fn global_importance(s: &ShapMatrix, run_id: u64) -> Result<GlobalImportance, AttributionError> {
    let n = s.values.nrows();
    if n == 0 {
        return Err(AttributionError::EmptyTestSet);
    }
    let e = s
        .values
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n as f64)
        .collect();
    Ok(GlobalImportance { e, run_id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::OutputSpace;
    use ndarray::{array, Array2};

    fn shap(values: Array2<f64>) -> ShapMatrix {
        ShapMatrix { values, base_value: 0.0, output_space: OutputSpace::LogOdds }
    }

    #[test]
    fn examples() {
        let g = global_importance(&shap(array![[1.0, -1.0], [-3.0, 1.0]]), 7).unwrap();
        assert_eq!(g.e, vec![2.0, 1.0]);
        assert_eq!(g.run_id, 7);
        assert_eq!(global_importance(&shap(Array2::zeros((3, 2))), 0).unwrap().e, vec![0.0, 0.0]);
        assert_eq!(global_importance(&shap(array![[-0.5, 2.0]]), 0).unwrap().e, vec![0.5, 2.0]);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(global_importance(&shap(Array2::zeros((0, 2))), 0), Err(AttributionError::EmptyTestSet));
    }
}
