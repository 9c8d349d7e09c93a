use super::LandscapeError;
use nalgebra::DMatrix;
use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMode {
    /// Each block is centred on its own mean.
    PerSplit,
    /// All blocks share one global centring.
    Universal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
    pub explained_variance_ratio: [f64; 2],
    pub mode: PcaMode,
    /// Projection of the supplied reference vector.
    pub mean_point: [f64; 2],
    /// The two unit projection directions.
    pub components: [Vec<f64>; 2],
}

/// Two-component PCA of the stacked `blocks`.
///
/// `mean_vector` is projected with the same transform (minus the global
/// mean of the stacked rows) so it can be drawn alongside the runs. Each
/// direction is signed so its largest-magnitude entry is positive.
pub fn pca_embed(
    blocks: &[ArrayView2<f64>],
    mode: PcaMode,
    mean_vector: &[f64],
) -> Result<Embedding2D, LandscapeError> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    if n < 3 {
        return Err(LandscapeError::TooFewRows { needed: 3, found: n });
    }
    let d = blocks[0].ncols();
    if blocks.iter().any(|b| b.ncols() != d) || mean_vector.len() != d {
        return Err(LandscapeError::Invalid("blocks disagree in width".into()));
    }
    let mut global = vec![0.0; d];
    for b in blocks {
        for r in b.rows() {
            for (g, v) in global.iter_mut().zip(r) {
                *g += v / n as f64;
            }
        }
    }
    let mut centred = DMatrix::<f64>::zeros(n, d);
    let mut row = 0;
    for b in blocks {
        let centre = match mode {
            PcaMode::PerSplit => match b.mean_axis(Axis(0)) {
                Some(m) => m.to_vec(),
                None => continue,
            },
            PcaMode::Universal => global.clone(),
        };
        for r in b.rows() {
            for j in 0..d {
                centred[(row, j)] = r[j] - centre[j];
            }
            row += 1;
        }
    }
    let svd = centred.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let scale: f64 = centred.iter().map(|v| v * v).sum::<f64>();
    if !(total > 0.0) || scale == 0.0 {
        return Err(LandscapeError::RankZero);
    }
    let mut components: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
    let mut ratio = [0.0; 2];
    for (slot, &idx) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = v_t.row(idx).iter().copied().collect();
        let lead = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (j, x)| if x.abs() > acc.1.abs() { (j, *x) } else { acc });
        if lead.1 < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let s = svd.singular_values[idx];
        ratio[slot] = s * s / total;
        components[slot] = v;
    }
    let project = |x: &[f64]| -> [f64; 2] {
        let dot = |c: &[f64]| x.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        [dot(&components[0]), dot(&components[1])]
    };
    let coords = centred
        .row_iter()
        .map(|r| project(&r.iter().copied().collect::<Vec<_>>()))
        .collect();
    let shifted: Vec<f64> = mean_vector.iter().zip(&global).map(|(a, g)| a - g).collect();
    Ok(Embedding2D {
        coords,
        explained_variance_ratio: ratio,
        mode,
        mean_point: project(&shifted),
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::prng;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn collinear_points() {
        let x = array![[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let emb = pca_embed(&[x.view()], PcaMode::PerSplit, &[0.0, 0.0]).unwrap();
        assert!((emb.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(emb.explained_variance_ratio[1].abs() < 1e-12);
    }

    #[test]
    fn symmetric_points_project_mean_to_origin() {
        let x = array![[1.0, 0.5], [-1.0, -0.5], [0.3, -2.0], [-0.3, 2.0]];
        let emb = pca_embed(&[x.view()], PcaMode::Universal, &[0.0, 0.0]).unwrap();
        assert!(emb.mean_point[0].abs() < 1e-12 && emb.mean_point[1].abs() < 1e-12);
    }

    #[test]
    fn modes_differ_only_by_block_offsets() {
        let a = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let b = a.mapv(|v| v + 10.0);
        let per = pca_embed(&[a.view(), b.view()], PcaMode::PerSplit, &[0.0, 0.0]).unwrap();
        let uni = pca_embed(&[a.view(), b.view()], PcaMode::Universal, &[0.0, 0.0]).unwrap();
        // the shared offset dominates the universal embedding
        assert!(uni.explained_variance_ratio[0] > 0.95);
        assert!(per.explained_variance_ratio[0] < 0.9);
    }

    #[test]
    fn rank_zero_and_small() {
        let x = Array2::from_elem((4, 3), 1.0);
        assert_eq!(pca_embed(&[x.view()], PcaMode::PerSplit, &[0.0; 3]), Err(LandscapeError::RankZero));
        let y = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(pca_embed(&[y.view()], PcaMode::PerSplit, &[0.0; 2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn orthonormal_and_row_order_invariant(seed in any::<u64>()) {
            let mut rng = prng(&[seed]);
            let x = Array2::from_shape_fn((12, 4), |_| rng.gen::<f64>());
            let emb = pca_embed(&[x.view()], PcaMode::PerSplit, &[0.0; 4]).unwrap();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            let [c0, c1] = &emb.components;
            prop_assert!((dot(c0, c0) - 1.0).abs() < 1e-10);
            prop_assert!((dot(c1, c1) - 1.0).abs() < 1e-10);
            prop_assert!(dot(c0, c1).abs() < 1e-10);
            let r = emb.explained_variance_ratio;
            prop_assert!(r[0] >= r[1] && r[1] >= 0.0 && r[0] <= 1.0);

            let mut rev = x.clone();
            rev.invert_axis(Axis(0));
            let emb2 = pca_embed(&[rev.view()], PcaMode::PerSplit, &[0.0; 4]).unwrap();
            for i in 0..12 {
                for a in 0..2 {
                    prop_assert!((emb.coords[i][a].abs() - emb2.coords[11 - i][a].abs()).abs() < 1e-9);
                }
            }
        }
    }
}
