use super::config::{ExperimentConfig, Schedule};
use super::HarnessError;
use crate::rng::{derive_seed, prng};
use crate::runs::Hyperparameters;
use rand::Rng;

/// Extra stream id so grid draws never share a stream with model seeds.
pub const HYPER_STREAM: u64 = 0x0048_5950_4552;

/// Hyperparameters and model seed of run `run_id` on split `split_seed`.
///
/// Varied C is log-spaced: `run_id = 0` gets `c_min` and `runs - 1` gets
/// `c_max`. Forest settings are drawn uniformly from the grid.
pub fn schedule_hyperparams(
    cfg: &ExperimentConfig,
    split_seed: u64,
    run_id: u64,
) -> Result<(Hyperparameters, u64), HarnessError> {
    let r = cfg.runs as u64;
    if run_id >= r {
        return Err(HarnessError::Config(format!("run id {run_id} outside 0..{r}")));
    }
    let model_seed = derive_seed(&[split_seed, run_id]);
    let hyper = match cfg.schedule()? {
        Schedule::FixedC(c) => Hyperparameters::Logreg { c },
        Schedule::VariedC { c_min, c_max } => {
            if r < 2 {
                return Err(HarnessError::Config("varied C needs at least two runs".into()));
            }
            let (lo, hi) = (c_min.log10(), c_max.log10());
            let c = if run_id == 0 {
                c_min
            } else if run_id == r - 1 {
                c_max
            } else {
                10f64.powf(lo + (hi - lo) * run_id as f64 / (r - 1) as f64)
            };
            Hyperparameters::Logreg { c }
        }
        Schedule::Forest(grid) => {
            let mut rng = prng(&[split_seed, run_id, HYPER_STREAM]);
            let mut pick = |n: usize| rng.gen_range(0..n);
            Hyperparameters::Forest {
                n_estimators: grid.n_estimators[pick(grid.n_estimators.len())],
                max_depth: grid.max_depth[pick(grid.max_depth.len())],
                min_samples_leaf: grid.min_samples_leaf[pick(grid.min_samples_leaf.len())],
                max_features: grid.max_features[pick(grid.max_features.len())],
            }
        }
    };
    Ok((hyper, model_seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(model: &str, runs: usize) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "name = \"t\"\nruns = {runs}\n[dataset]\nkind = \"breast_cancer\"\npath = \"x\"\n[model]\n{model}\n"
        ))
        .unwrap()
    }

    fn c_of(cfg: &ExperimentConfig, run: u64) -> f64 {
        schedule_hyperparams(cfg, 100, run).unwrap().0.c().unwrap()
    }

    #[test]
    fn varied_grid_endpoints_and_symmetry() {
        let cfg = cfg("class = \"logreg\"\nregularization = \"varied\"\nc_min = 0.01\nc_max = 100.0", 1000);
        assert_eq!(c_of(&cfg, 0), 0.01);
        assert_eq!(c_of(&cfg, 999), 100.0);
        let (a, b) = (c_of(&cfg, 499).log10(), c_of(&cfg, 500).log10());
        assert!((a + b).abs() < 1e-12 && a < 0.0);
        assert!(schedule_hyperparams(&cfg, 100, 1000).is_err());
    }

    #[test]
    fn fixed_c() {
        let cfg = cfg("class = \"logreg\"\nregularization = \"fixed\"\nc = 1.0", 5);
        assert!((0..5).all(|r| c_of(&cfg, r) == 1.0));
    }

    #[test]
    fn forest_draws_are_seeded() {
        let cfg = cfg("class = \"forest\"", 50);
        let a = schedule_hyperparams(&cfg, 101, 7).unwrap();
        assert_eq!(a, schedule_hyperparams(&cfg, 101, 7).unwrap());
        let distinct: std::collections::HashSet<String> = (0..50)
            .map(|r| format!("{:?}", schedule_hyperparams(&cfg, 101, r).unwrap().0))
            .collect();
        assert!(distinct.len() > 20);
        assert_ne!(a.1, schedule_hyperparams(&cfg, 102, 7).unwrap().1);
    }
}
