//! TOML experiment configuration.

use super::HarnessError;
use crate::data::{load_breast_cancer, load_compas_with, CompasCovariates, Dataset};
use crate::landscape::{NormalizationMode, DEFAULT_DEGENERACY_TOL, DEFAULT_DROP_EPS, DEFAULT_K_RANGE, DEFAULT_TOP_M};
use crate::model::MaxFeatures;
use crate::runs::ModelClass;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    BreastCancer,
    Compas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Relative paths are resolved against the config file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub compas_covariates: CompasCovariates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationMode {
    Fixed,
    Varied,
}

/// `[model]` table. Linear runs use `regularization` with `c` or
/// `c_min`/`c_max`; forests use the four grid lists (defaults shown in
/// [`ForestGrid::default`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub class: ModelClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<RegularizationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_estimators: Option<Vec<usize>>,
    /// `0` stands for unlimited depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples_leaf: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_k_range")]
    pub k_range: Vec<usize>,
    #[serde(default)]
    pub clustering_seed: u64,
    #[serde(default = "default_normalization")]
    pub normalization: NormalizationMode,
    #[serde(default = "default_tol")]
    pub degeneracy_tol: f64,
    #[serde(default = "default_eps")]
    pub drop_eps: f64,
    #[serde(default = "default_top_m")]
    pub top_m: usize,
    #[serde(default = "default_top_n")]
    pub top_n_disagreements: usize,
    /// Compare at most this many of the largest basins (all when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representative_count: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            k_range: default_k_range(),
            clustering_seed: 0,
            normalization: default_normalization(),
            degeneracy_tol: default_tol(),
            drop_eps: default_eps(),
            top_m: default_top_m(),
            top_n_disagreements: default_top_n(),
            representative_count: None,
        }
    }
}

fn default_k_range() -> Vec<usize> {
    DEFAULT_K_RANGE.to_vec()
}
fn default_normalization() -> NormalizationMode {
    NormalizationMode::Unit
}
fn default_tol() -> f64 {
    DEFAULT_DEGENERACY_TOL
}
fn default_eps() -> f64 {
    DEFAULT_DROP_EPS
}
fn default_top_m() -> usize {
    DEFAULT_TOP_M
}
fn default_top_n() -> usize {
    crate::disagreement::DEFAULT_TOP_N
}
fn default_split_seeds() -> Vec<u64> {
    (100..110).collect()
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_chunk_size() -> usize {
    100
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub runs: usize,
    #[serde(default = "default_split_seeds")]
    pub split_seeds: Vec<u64>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    /// Relative paths are resolved against the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            n_estimators: vec![50, 100, 200],
            max_depth: vec![Some(3), Some(5), Some(10), None],
            min_samples_leaf: vec![1, 2, 5],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::Fraction(0.5)],
        }
    }
}

/// How hyperparameters vary over run ids.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    FixedC(f64),
    VariedC { c_min: f64, c_max: f64 },
    Forest(ForestGrid),
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.schedule()?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Read a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.dataset.path.is_relative() {
            cfg.dataset.path = base.join(&cfg.dataset.path);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    /// Replace the output directory, split list or run count, then
    /// revalidate.
    pub fn apply_overrides(
        &mut self,
        output_dir: Option<PathBuf>,
        split_seeds: Option<Vec<u64>>,
        runs: Option<usize>,
    ) -> Result<(), HarnessError> {
        if let Some(o) = output_dir {
            self.output_dir = o;
        }
        if let Some(s) = split_seeds {
            self.split_seeds = s;
        }
        if let Some(r) = runs {
            self.runs = r;
        }
        self.schedule()?;
        self.check()
    }

    fn check(&self) -> Result<(), HarnessError> {
        if self.runs < 2 {
            return Err(config_err(format!("runs must be at least 2, got {}", self.runs)));
        }
        if self.split_seeds.is_empty() {
            return Err(config_err("split_seeds must not be empty"));
        }
        let mut seen = self.split_seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("split_seeds contain duplicates"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(config_err(format!("test_fraction {} not in (0, 1)", self.test_fraction)));
        }
        if self.chunk_size == 0 {
            return Err(config_err("chunk_size must be positive"));
        }
        let a = &self.analysis;
        if a.k_range.is_empty() || a.k_range.iter().any(|&k| k < 2) {
            return Err(config_err("k_range must list values of at least 2"));
        }
        if !(a.degeneracy_tol > 0.0) || !(a.drop_eps > 0.0) {
            return Err(config_err("degeneracy_tol and drop_eps must be positive"));
        }
        if a.representative_count.is_some_and(|n| n < 2) {
            return Err(config_err("representative_count must be at least 2"));
        }
        Ok(())
    }

    /// Validated hyperparameter schedule.
    pub fn schedule(&self) -> Result<Schedule, HarnessError> {
        let m = &self.model;
        match m.class {
            ModelClass::Logreg => {
                if m.n_estimators.is_some() || m.max_depth.is_some() || m.min_samples_leaf.is_some() || m.max_features.is_some() {
                    return Err(config_err("forest grid keys given for a logreg model"));
                }
                let positive = |name: &str, v: Option<f64>| match v {
                    Some(c) if c > 0.0 && c.is_finite() => Ok(c),
                    Some(c) => Err(config_err(format!("{name} must be positive, got {c}"))),
                    None => Err(config_err(format!("{name} is required"))),
                };
                match m.regularization {
                    Some(RegularizationMode::Fixed) => {
                        if m.c_min.is_some() || m.c_max.is_some() {
                            return Err(config_err("c_min/c_max given with fixed regularization"));
                        }
                        Ok(Schedule::FixedC(positive("c", m.c)?))
                    }
                    Some(RegularizationMode::Varied) => {
                        if m.c.is_some() {
                            return Err(config_err("c given with varied regularization"));
                        }
                        let c_min = positive("c_min", m.c_min)?;
                        let c_max = positive("c_max", m.c_max)?;
                        if c_min >= c_max {
                            return Err(config_err(format!("c_min {c_min} must be below c_max {c_max}")));
                        }
                        Ok(Schedule::VariedC { c_min, c_max })
                    }
                    None => Err(config_err("logreg models need `regularization = \"fixed\"` or `\"varied\"`")),
                }
            }
            ModelClass::Forest => {
                if m.regularization.is_some() || m.c.is_some() || m.c_min.is_some() || m.c_max.is_some() {
                    return Err(config_err("regularization keys given for a forest model"));
                }
                let mut grid = ForestGrid::default();
                if let Some(v) = &m.n_estimators {
                    grid.n_estimators = v.clone();
                }
                if let Some(v) = &m.max_depth {
                    grid.max_depth = v.iter().map(|&d| (d > 0).then_some(d)).collect();
                }
                if let Some(v) = &m.min_samples_leaf {
                    grid.min_samples_leaf = v.clone();
                }
                if let Some(v) = &m.max_features {
                    grid.max_features = v
                        .iter()
                        .map(|s| s.parse::<MaxFeatures>().map_err(config_err))
                        .collect::<Result<_, _>>()?;
                }
                if grid.n_estimators.is_empty()
                    || grid.max_depth.is_empty()
                    || grid.min_samples_leaf.is_empty()
                    || grid.max_features.is_empty()
                {
                    return Err(config_err("forest grid axes must be non-empty"));
                }
                if grid.n_estimators.contains(&0) || grid.min_samples_leaf.contains(&0) {
                    return Err(config_err("n_estimators and min_samples_leaf must be positive"));
                }
                Ok(Schedule::Forest(grid))
            }
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset, HarnessError> {
        let ds = match self.dataset.kind {
            DatasetKind::BreastCancer => load_breast_cancer(&self.dataset.path)?,
            DatasetKind::Compas => load_compas_with(&self.dataset.path, self.dataset.compas_covariates)?,
        };
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
runs = 10
[dataset]
kind = "breast_cancer"
path = "data/wdbc.csv"
"#;

    fn with_model(model: &str) -> String {
        format!("{BASE}[model]\n{model}\n")
    }

    #[test]
    fn varied_defaults() {
        let cfg = ExperimentConfig::from_toml(&with_model(
            "class = \"logreg\"\nregularization = \"varied\"\nc_min = 0.01\nc_max = 100.0",
        ))
        .unwrap();
        assert_eq!(cfg.split_seeds, (100..110).collect::<Vec<_>>());
        assert_eq!(cfg.test_fraction, 0.3);
        assert_eq!(cfg.analysis.k_range, vec![2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(cfg.schedule().unwrap(), Schedule::VariedC { c_min: 0.01, c_max: 100.0 });
    }

    #[test]
    fn forest_grid_overrides() {
        let cfg = ExperimentConfig::from_toml(&with_model(
            "class = \"forest\"\nmax_depth = [3, 0]\nmax_features = [\"sqrt\", \"0.5\"]",
        ))
        .unwrap();
        let Schedule::Forest(g) = cfg.schedule().unwrap() else { panic!() };
        assert_eq!(g.max_depth, vec![Some(3), None]);
        assert_eq!(g.n_estimators, vec![50, 100, 200]);
        assert_eq!(g.max_features, vec![MaxFeatures::Sqrt, MaxFeatures::Fraction(0.5)]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            with_model("class = \"logreg\"\nregularization = \"varied\"\nc_min = 1.0\nc_max = 1.0"),
            with_model("class = \"logreg\"\nregularization = \"fixed\""),
            with_model("class = \"logreg\"\nregularization = \"fixed\"\nc = 1.0\nbogus = 3"),
            with_model("class = \"forest\"\nc = 1.0"),
            with_model("class = \"forest\"\nmax_features = [\"cube\"]"),
            format!("{}[model]\nclass = \"logreg\"\nregularization = \"fixed\"\nc = 1.0\n", BASE.replace("runs = 10", "runs = 1")),
            format!("typo = 1\n{}", with_model("class = \"logreg\"\nregularization = \"fixed\"\nc = 1.0")),
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_toml(&text), Err(HarnessError::Config(_))), "{text}");
        }
    }
}
