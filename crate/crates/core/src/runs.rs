//! One training run: fit a model on a split, score it, explain it.

use crate::attribution::{forest_shap, global_importance, linear_shap, AttributionError, ShapMatrix};
use crate::data::{standardize, Dataset, SplitData};
use crate::model::{
    accuracy, predict_proba_forest, predict_proba_linear, train_forest, train_logreg, ForestHyper,
    ForestModel, LinearModel, LogRegHyper, MaxFeatures, ModelError,
};
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Logreg,
    Forest,
}

/// Everything needed to retrain a run besides the split and its seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum Hyperparameters {
    Logreg {
        c: f64,
    },
    Forest {
        n_estimators: usize,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
        max_features: MaxFeatures,
    },
}

impl Hyperparameters {
    pub fn model_class(&self) -> ModelClass {
        match self {
            Hyperparameters::Logreg { .. } => ModelClass::Logreg,
            Hyperparameters::Forest { .. } => ModelClass::Forest,
        }
    }

    /// Regularisation strength, for linear runs.
    pub fn c(&self) -> Option<f64> {
        match self {
            Hyperparameters::Logreg { c } => Some(*c),
            Hyperparameters::Forest { .. } => None,
        }
    }
}

/// The persisted outcome of one run. Timing lives outside the record so
/// records are a pure function of their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub split_seed: u64,
    pub model_class: ModelClass,
    pub hyper: Hyperparameters,
    pub model_seed: u64,
    pub test_accuracy: f64,
    /// Solver convergence for linear runs; always true for forests.
    pub converged: bool,
    /// Mean absolute attribution per feature over the test rows.
    pub e: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Attribution(#[from] AttributionError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl TrainedModel {
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, ModelError> {
        match self {
            TrainedModel::Linear(m) => predict_proba_linear(m, x),
            TrainedModel::Forest(m) => predict_proba_forest(m, x),
        }
    }
}

/// A split prepared once and shared by every run on it: linear models see
/// standardised features, forests the raw ones.
#[derive(Debug, Clone)]
pub struct SplitContext {
    pub split: SplitData,
    pub model_class: ModelClass,
    pub x_train: Array2<f64>,
    pub y_train: Vec<u8>,
    pub x_test: Array2<f64>,
    pub y_test: Vec<u8>,
    /// Column mean of `x_train`, the linear explainer's background.
    pub background_mean: Vec<f64>,
}

impl SplitContext {
    pub fn new(ds: &Dataset, split: SplitData, model_class: ModelClass) -> Self {
        let (x_train, x_test) = match model_class {
            ModelClass::Logreg => standardize(ds, &split),
            ModelClass::Forest => (
                ds.x.select(Axis(0), &split.train_idx),
                ds.x.select(Axis(0), &split.test_idx),
            ),
        };
        let pick = |idx: &[usize]| idx.iter().map(|&i| ds.y[i]).collect::<Vec<u8>>();
        let background_mean = x_train.mean_axis(Axis(0)).map_or_else(Vec::new, |m| m.to_vec());
        Self {
            y_train: pick(&split.train_idx),
            y_test: pick(&split.test_idx),
            split,
            model_class,
            x_train,
            x_test,
            background_mean,
        }
    }
}

pub fn train(ctx: &SplitContext, hyper: &Hyperparameters, model_seed: u64) -> Result<TrainedModel, ModelError> {
    match *hyper {
        Hyperparameters::Logreg { c } => {
            Ok(TrainedModel::Linear(train_logreg(ctx.x_train.view(), &ctx.y_train, &LogRegHyper::with_c(c))?))
        }
        Hyperparameters::Forest { n_estimators, max_depth, min_samples_leaf, max_features } => {
            let h = ForestHyper { n_estimators, max_depth, min_samples_leaf, max_features, seed: model_seed };
            Ok(TrainedModel::Forest(train_forest(ctx.x_train.view(), &ctx.y_train, &h)?))
        }
    }
}

/// SHAP values of `model` on the split's test rows.
pub fn explain(ctx: &SplitContext, model: &TrainedModel) -> Result<ShapMatrix, AttributionError> {
    match model {
        TrainedModel::Linear(m) => linear_shap(m, ctx.x_test.view(), &ctx.background_mean),
        TrainedModel::Forest(m) => forest_shap(m, ctx.x_test.view()),
    }
}

/// Train, score and explain one run.
pub fn execute_run(
    ctx: &SplitContext,
    run_id: u64,
    hyper: &Hyperparameters,
    model_seed: u64,
) -> Result<(RunRecord, TrainedModel), RunError> {
    if hyper.model_class() != ctx.model_class {
        return Err(ModelError::InvalidHyper(format!(
            "{:?} hyperparameters on a {:?} split",
            hyper.model_class(),
            ctx.model_class
        ))
        .into());
    }
    let model = train(ctx, hyper, model_seed)?;
    let p = model.predict_proba(ctx.x_test.view())?;
    let test_accuracy = accuracy(&p, &ctx.y_test)?;
    let shap = explain(ctx, &model)?;
    let e = global_importance(&shap, run_id)?.e;
    let converged = match &model {
        TrainedModel::Linear(m) => m.converged,
        TrainedModel::Forest(_) => true,
    };
    let record = RunRecord {
        run_id,
        split_seed: ctx.split.split_seed,
        model_class: ctx.model_class,
        hyper: *hyper,
        model_seed,
        test_accuracy,
        converged,
        e,
    };
    Ok((record, model))
}
