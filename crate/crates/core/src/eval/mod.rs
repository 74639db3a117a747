//! Downstream utility: train the fixed classifier on (synthetic or real)
//! rows and score it by AUC on held-out real rows.

pub mod gbdt;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::stats;

pub use gbdt::{GbdtConfig, GbdtModel, Node, Tree};

/// AUC of a classifier on a labelled evaluation set. `loss` is `-auc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auc: f64,
    pub loss: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Set when the training rows held a single class (or none); the AUC is
    /// then reported as exactly 0.5.
    pub degenerate: bool,
}

impl EvalResult {
    pub fn new(auc: f64, n_pos: usize, n_neg: usize) -> Self {
        Self {
            auc,
            loss: -auc,
            n_pos,
            n_neg,
            degenerate: false,
        }
    }

    pub fn degenerate(n_pos: usize, n_neg: usize) -> Self {
        Self {
            degenerate: true,
            ..Self::new(0.5, n_pos, n_neg)
        }
    }
}

pub fn train_classifier(train: &Dataset, cfg: &GbdtConfig) -> Result<GbdtModel> {
    gbdt::train_matrix(&train.features(), &train.labels(), cfg)
}

pub fn predict_proba(model: &GbdtModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

pub fn score(model: &GbdtModel, target: &Dataset) -> Result<EvalResult> {
    let labels = target.labels();
    let [n_neg, n_pos] = target.class_counts();
    let scores = model.predict_proba(&target.features())?;
    Ok(EvalResult::new(stats::auc(&scores, &labels)?, n_pos, n_neg))
}

/// Trains on `train` and scores on `target`. Training rows with fewer than
/// two classes yield the degenerate result instead of an error; `target`
/// must hold both classes.
pub fn evaluate(train: &Dataset, target: &Dataset, cfg: &GbdtConfig) -> Result<EvalResult> {
    if train.schema() != target.schema() {
        return Err(Error::schema("training and evaluation rows have different schemas"));
    }
    let [n_neg, n_pos] = target.class_counts();
    if n_neg == 0 || n_pos == 0 {
        return Err(Error::SingleClass);
    }
    match train_classifier(train, cfg) {
        Ok(model) => score(&model, target),
        Err(Error::SingleClass) => Ok(EvalResult::degenerate(n_pos, n_neg)),
        Err(e) => Err(e),
    }
}
