use super::{DataError, Dataset};
use crate::rng::Prng;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// One stratified train/test realisation plus the scaler fit on its train rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitData {
    pub split_seed: u64,
    pub test_fraction: f64,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub scaler_mean: Vec<f64>,
    pub scaler_std: Vec<f64>,
}

fn per_class_test_counts(counts: [usize; 2], test_fraction: f64) -> [usize; 2] {
    let n: usize = counts.iter().sum();
    let total = (test_fraction * n as f64).round() as i64;
    let mut t = counts.map(|c| (test_fraction * c as f64).round() as i64);
    let largest = if counts[1] > counts[0] { 1 } else { 0 };
    t[largest] += total - (t[0] + t[1]);
    t.map(|v| v.max(0) as usize)
}

/// Stratified split: each class is shuffled with a PRNG seeded by
/// `split_seed` and its first `round(fraction * n_c)` members go to test.
/// The largest class absorbs the rounding difference so the test set has
/// exactly `round(fraction * n)` rows. Index lists are returned sorted.
pub fn stratified_split(
    ds: &Dataset,
    split_seed: u64,
    test_fraction: f64,
) -> Result<SplitData, DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Split(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let counts = ds.class_counts();
    for (c, &n) in counts.iter().enumerate() {
        if n < 2 {
            return Err(DataError::Split(format!("class {c} has {n} members (need >= 2)")));
        }
    }
    let t = per_class_test_counts(counts, test_fraction);
    for c in 0..2 {
        if t[c] == 0 || t[c] >= counts[c] {
            return Err(DataError::Split(format!(
                "class {c}: {} of {} rows would go to test",
                t[c], counts[c]
            )));
        }
    }

    let mut rng = Prng::seed_from_u64(split_seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, &n_test) in t.iter().enumerate() {
        let mut members: Vec<usize> = (0..ds.n_rows())
            .filter(|&i| ds.y[i] as usize == class)
            .collect();
        members.shuffle(&mut rng);
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let (scaler_mean, scaler_std) = fit_scaler(ds.x.select(Axis(0), &train_idx).view());
    Ok(SplitData {
        split_seed,
        test_fraction,
        train_idx,
        test_idx,
        scaler_mean,
        scaler_std,
    })
}

/// Column means and population standard deviations. Constant columns get
/// mean equal to the constant and std 1, so they standardise to exact zeros.
fn fit_scaler(x: ArrayView2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    x.axis_iter(Axis(1))
        .map(|col| {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return (first, 1.0);
            }
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            (mean, if std > 0.0 { std } else { 1.0 })
        })
        .unzip()
}

/// Apply the split's train-fitted scaler to its train and test rows.
pub fn standardize(ds: &Dataset, split: &SplitData) -> (Array2<f64>, Array2<f64>) {
    let apply = |idx: &[usize]| {
        let mut m = ds.x.select(Axis(0), idx);
        for mut row in m.axis_iter_mut(Axis(0)) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - split.scaler_mean[j]) / split.scaler_std[j];
            }
        }
        m
    };
    (apply(&split.train_idx), apply(&split.test_idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use ndarray::array;
    use proptest::prelude::*;

    fn balanced(n_each: usize) -> Dataset {
        let n = 2 * n_each;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * (j + 1)) as f64);
        let y = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new("t", x, y, FeatureSchema::numeric(vec!["a".into(), "b".into()]).unwrap())
            .unwrap()
    }

    #[test]
    fn exact_stratification_on_balanced_data() {
        let ds = balanced(100);
        let s = stratified_split(&ds, 7, 0.3).unwrap();
        let pos = s.test_idx.iter().filter(|&&i| ds.y[i] == 1).count();
        assert_eq!(s.test_idx.len(), 60);
        assert_eq!(pos, 30);
        assert_eq!(s.train_idx.len(), 140);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let ds = balanced(100);
        assert_eq!(
            stratified_split(&ds, 100, 0.3).unwrap(),
            stratified_split(&ds, 100, 0.3).unwrap()
        );
    }

    #[test]
    fn different_seeds_same_counts() {
        let ds = balanced(100);
        let a = stratified_split(&ds, 100, 0.3).unwrap();
        let b = stratified_split(&ds, 101, 0.3).unwrap();
        assert_ne!(a.test_idx, b.test_idx);
        let count = |s: &SplitData| s.test_idx.iter().filter(|&&i| ds.y[i] == 1).count();
        assert_eq!(count(&a), count(&b));
        assert_eq!(a.test_idx.len(), b.test_idx.len());
    }

    #[test]
    fn tiny_class_is_rejected() {
        let x = array![[0.0], [1.0], [2.0]];
        let ds = Dataset::new("t", x, vec![0, 0, 1], FeatureSchema::numeric(vec!["a".into()]).unwrap())
            .unwrap();
        assert!(matches!(stratified_split(&ds, 1, 0.3), Err(DataError::Split(_))));
        assert!(stratified_split(&balanced(5), 1, 1.0).is_err());
    }

    #[test]
    fn standardize_examples() {
        let x = array![[2.0, 5.0], [4.0, 5.0], [3.0, 5.0]];
        let ds = Dataset::new(
            "t",
            x,
            vec![0, 1, 1],
            FeatureSchema::numeric(vec!["a".into(), "b".into()]).unwrap(),
        )
        .unwrap();
        let split = SplitData {
            split_seed: 0,
            test_fraction: 0.3,
            train_idx: vec![0, 1],
            test_idx: vec![2],
            scaler_mean: vec![],
            scaler_std: vec![],
        };
        let (m, s) = fit_scaler(ds.x.select(Axis(0), &split.train_idx).view());
        let split = SplitData { scaler_mean: m, scaler_std: s, ..split };
        let (tr, te) = standardize(&ds, &split);
        assert_eq!(tr.column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(tr.column(1).to_vec(), vec![0.0, 0.0]);
        // test value equal to the train mean
        assert_eq!(te[[0, 0]], 0.0);
        assert_eq!(te[[0, 1]], 0.0);
    }

    proptest! {
        #[test]
        fn stratification_and_standardisation(
            labels in proptest::collection::vec(0u8..2, 20..120),
            seed in 0u64..1000,
            frac in 0.15f64..0.6,
        ) {
            let counts = [labels.iter().filter(|&&l| l == 0).count(), labels.iter().filter(|&&l| l == 1).count()];
            prop_assume!(counts[0] >= 6 && counts[1] >= 6);
            let n = labels.len();
            let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 7 + j * 13) % 11) as f64 + if j == 2 { 0.0 } else { i as f64 * 0.01 });
            let ds = Dataset::new("p", x, labels.clone(), FeatureSchema::numeric(vec!["a".into(), "b".into(), "c".into()]).unwrap()).unwrap();
            let s = stratified_split(&ds, seed, frac).unwrap();

            let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.test_idx.len(), (frac * n as f64).round() as usize);
            let tt = s.test_idx.len() as f64;
            for c in 0..2u8 {
                let tc = s.test_idx.iter().filter(|&&i| labels[i] == c).count() as f64;
                let full = counts[c as usize] as f64 / n as f64;
                prop_assert!((tc / tt - full).abs() <= 1.0 / tt + 1e-12);
            }

            let (tr, _) = standardize(&ds, &s);
            for col in tr.axis_iter(Axis(1)) {
                let m = col.mean().unwrap();
                let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
                prop_assert!(m.abs() < 1e-10);
                prop_assert!((sd - 1.0).abs() < 1e-10 || sd == 0.0);
            }
            prop_assert!(s.scaler_std.iter().all(|&v| v > 0.0));
        }
    }
}
