use super::{norm2, ExplanationMatrix, LandscapeError};
use ndarray::Axis;

/// `1 - cos(a, b)`; zero vectors are at distance 0 from each other and 1
/// from anything else.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm2(a), norm2(b));
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot / (na * nb)).max(0.0)
}

/// How far the average importance vector sits from the populated region:
/// its cosine distance to the nearest run, relative to the median
/// nearest-neighbour distance between runs. `0/0` is 0; a positive value
/// over 0 is infinite.
pub fn mean_offset_score(e: &ExplanationMatrix) -> Result<f64, LandscapeError> {
    let n = e.n_runs();
    if n < 10 {
        return Err(LandscapeError::TooFewRows { needed: 10, found: n });
    }
    let rows: Vec<Vec<f64>> = e.e.rows().into_iter().map(|r| r.to_vec()).collect();
    let mean = e.e.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let to_mean = rows.iter().map(|r| cosine_distance(&mean, r)).fold(f64::INFINITY, f64::min);
    let mut nn: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| cosine_distance(&rows[i], &rows[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { nn[n / 2] } else { 0.5 * (nn[n / 2 - 1] + nn[n / 2]) };
    Ok(if to_mean == 0.0 {
        0.0
    } else if median == 0.0 {
        f64::INFINITY
    } else {
        to_mean / median
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::prng;
    use ndarray::Array2;
    use rand::Rng;

    fn em(e: Array2<f64>) -> ExplanationMatrix {
        let ids = (0..e.nrows() as u64).collect();
        ExplanationMatrix::new(e, ids, 0).unwrap()
    }

    #[test]
    fn identical_runs_score_zero() {
        assert_eq!(mean_offset_score(&em(Array2::from_elem((12, 3), 0.4))).unwrap(), 0.0);
    }

    #[test]
    fn two_opposed_clusters_push_the_mean_off_manifold() {
        // half the runs load on feature 0, half on feature 1
        let mut rng = prng(&[4]);
        let e = Array2::from_shape_fn((40, 2), |(i, j)| {
            let hot = usize::from(i >= 20) == j;
            (if hot { 1.0 } else { 0.0 }) + 0.01 * rng.gen::<f64>()
        });
        let s = mean_offset_score(&em(e)).unwrap();
        assert!(s > 1.0, "{s}");
    }

    #[test]
    fn tight_cluster_is_on_manifold() {
        let mut rng = prng(&[5]);
        let e = Array2::from_shape_fn((40, 3), |_| 1.0 + 0.01 * rng.gen::<f64>());
        let s = mean_offset_score(&em(e)).unwrap();
        assert!(s <= 1.5, "{s}");
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[2.0, 0.0]), 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine_distance(&[0.0], &[0.0]), 0.0);
        assert!(mean_offset_score(&em(Array2::zeros((3, 2)))).is_err());
    }
}
