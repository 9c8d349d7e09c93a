use super::{AttributionError, OutputSpace, ShapMatrix};
use crate::model::LinearModel;
use ndarray::{Array2, ArrayView2};

/// Exact SHAP values of a linear model's margin under feature independence.
///
/// `phi_j = w_j (x_j - mu_j)` with base value `w·mu + b`.
pub fn linear_shap(
    m: &LinearModel,
    x: ArrayView2<f64>,
    background_mean: &[f64],
) -> Result<ShapMatrix, AttributionError> {
    let d = m.w.len();
    for found in [x.ncols(), background_mean.len()] {
        if found != d {
            return Err(AttributionError::DimensionMismatch { expected: d, found });
        }
    }
    let values = Array2::from_shape_fn(x.raw_dim(), |(i, j)| m.w[j] * (x[[i, j]] - background_mean[j]));
    let base_value = m.w.iter().zip(background_mean).map(|(w, mu)| w * mu).sum::<f64>() + m.b;
    Ok(ShapMatrix {
        values,
        base_value,
        output_space: OutputSpace::LogOdds,
    })
}
