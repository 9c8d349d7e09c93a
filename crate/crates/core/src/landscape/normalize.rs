use super::{norm2, ExplanationMatrix, LandscapeError};
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

pub const DEFAULT_DROP_EPS: f64 = 1e-12;
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-6;

/// Whether rows are mean-centred before unit scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// `(e - mu) / ||e - mu||`
    #[default]
    Centered,
    /// `e / ||e||`: compares attribution directions only
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub ehat: Array2<f64>,
    /// Column mean of the raw matrix, whether or not it was subtracted.
    pub mu: Vec<f64>,
    /// Run ids of the rows of `ehat`.
    pub run_ids: Vec<u64>,
    pub dropped_rows: Vec<u64>,
    pub mode: NormalizationMode,
}

/// Centre on the column mean, then scale each row to unit length.
pub fn normalize(e: &ExplanationMatrix, eps: f64) -> Result<NormalizedMatrix, LandscapeError> {
    normalize_with(e, eps, NormalizationMode::Centered)
}

/// Rows whose (centred) norm is below `eps` are dropped and listed.
pub fn normalize_with(
    e: &ExplanationMatrix,
    eps: f64,
    mode: NormalizationMode,
) -> Result<NormalizedMatrix, LandscapeError> {
    let n = e.n_runs();
    if n < 2 {
        return Err(LandscapeError::TooFewRows { needed: 2, found: n });
    }
    let mu = e.e.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let mut kept = Vec::new();
    let mut run_ids = Vec::new();
    let mut dropped_rows = Vec::new();
    for (row, &id) in e.e.rows().into_iter().zip(&e.run_ids) {
        let v: Vec<f64> = match mode {
            NormalizationMode::Centered => row.iter().zip(&mu).map(|(a, m)| a - m).collect(),
            NormalizationMode::Unit => row.to_vec(),
        };
        let len = norm2(&v);
        if len < eps {
            dropped_rows.push(id);
        } else {
            kept.extend(v.iter().map(|a| a / len));
            run_ids.push(id);
        }
    }
    if run_ids.is_empty() {
        return Err(LandscapeError::TotalDegeneracy);
    }
    let ehat = Array2::from_shape_vec((run_ids.len(), e.e.ncols()), kept).expect("shape");
    Ok(NormalizedMatrix { ehat, mu, run_ids, dropped_rows, mode })
}

/// True when every row lies within a relative `tol` of the column mean.
pub fn detect_degenerate(e: &ExplanationMatrix, tol: f64) -> bool {
    let Some(mu) = e.e.mean_axis(Axis(0)) else {
        return true;
    };
    let mu = mu.to_vec();
    let scale = norm2(&mu).max(tol);
    let spread = e
        .e
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(&mu).map(|(a, m)| (a - m) * (a - m)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    spread / scale < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn em(e: Array2<f64>) -> ExplanationMatrix {
        let ids = (0..e.nrows() as u64).collect();
        ExplanationMatrix::new(e, ids, 0).unwrap()
    }

    #[test]
    fn three_four_five() {
        // mean (3,4); first row minus mean is (3,4)
        let n = normalize(&em(array![[6.0, 8.0], [0.0, 0.0]]), 1e-12).unwrap();
        assert!((n.ehat[[0, 0]] - 0.6).abs() < 1e-15);
        assert!((n.ehat[[0, 1]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn identical_rows_are_totally_degenerate() {
        let e = em(array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]);
        assert_eq!(normalize(&e, 1e-12), Err(LandscapeError::TotalDegeneracy));
        // unit mode still has directions to compare
        let u = normalize_with(&e, 1e-12, NormalizationMode::Unit).unwrap();
        assert_eq!(u.ehat.nrows(), 3);
    }

    #[test]
    fn two_rows_are_antipodal() {
        let n = normalize(&em(array![[1.0, 0.0, 3.0], [2.0, 5.0, 0.0]]), 1e-12).unwrap();
        for j in 0..3 {
            assert!((n.ehat[[0, j]] + n.ehat[[1, j]]).abs() < 1e-15);
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(normalize(&em(array![[1.0]]), 1e-12), Err(LandscapeError::TooFewRows { .. })));
    }

    #[test]
    fn zero_rows_dropped_in_unit_mode() {
        let n = normalize_with(&em(array![[0.0, 0.0], [3.0, 4.0]]), 1e-12, NormalizationMode::Unit).unwrap();
        assert_eq!(n.dropped_rows, vec![0]);
        assert_eq!(n.run_ids, vec![1]);
    }

    #[test]
    fn degeneracy_examples() {
        let base = [0.3, 0.1, 0.7];
        let e = Array2::from_shape_fn((20, 3), |(i, j)| base[j] + 1e-12 * (i as f64));
        assert!(detect_degenerate(&em(e), 1e-6));
        assert!(!detect_degenerate(&em(array![[1.0, 0.0], [0.0, 1.0]]), 1e-6));
        assert!(detect_degenerate(&em(Array2::zeros((5, 3))), 1e-6));
    }

    proptest! {
        #[test]
        fn retained_rows_have_unit_norm(
            vals in prop::collection::vec(0.0f64..10.0, 4..60),
            unit in any::<bool>(),
        ) {
            let n = vals.len() / 2;
            let e = em(Array2::from_shape_vec((n, 2), vals[..2 * n].to_vec()).unwrap());
            let mode = if unit { NormalizationMode::Unit } else { NormalizationMode::Centered };
            if let Ok(out) = normalize_with(&e, 1e-12, mode) {
                for r in out.ehat.rows() {
                    prop_assert!((norm2(&r.to_vec()) - 1.0).abs() < 1e-10);
                }
                prop_assert_eq!(out.run_ids.len() + out.dropped_rows.len(), n);
            }
        }
    }
}
