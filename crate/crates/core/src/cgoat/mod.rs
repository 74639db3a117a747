//! Composition of several generators into one synthetic dataset: TPE over
//! the simplex of mixture weights, scoring each mixture by the validation
//! AUC of a classifier trained on the stacked rows.

mod weights;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::eval::{self, EvalResult, GbdtConfig};
use crate::seed;
use crate::synth::Generator;
use crate::tpe::{ParamValue, Point, SearchSpace, TpeConfig, TrialHistory, TrialTag};

pub use weights::{allocate_rows, block_seed, compose, warm_starts, MixtureWeights};

const TPE_STREAM: u64 = 0x4347_4f41;
/// Name of the simplex parameter in the trial log.
pub const ALPHA: &str = "alpha";

#[derive(Clone)]
pub struct CgoatConfig {
    /// One generator per method, in fixed method order.
    pub generators: Vec<Arc<dyn Generator>>,
    /// Validation AUC of each generator on its own.
    pub auc_val: Vec<f64>,
    /// Maximum number of trials, warm starts included.
    pub k: usize,
    pub patience: usize,
    /// Total synthetic rows per composed dataset.
    pub n_rows: usize,
    pub seed: u64,
    pub classifier: GbdtConfig,
    pub tpe: TpeConfig,
}

impl fmt::Debug for CgoatConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CgoatConfig")
            .field("generators", &self.generators.iter().map(|g| g.name()).collect::<Vec<_>>())
            .field("auc_val", &self.auc_val)
            .field("k", &self.k)
            .field("patience", &self.patience)
            .field("n_rows", &self.n_rows)
            .field("seed", &self.seed)
            .finish()
    }
}

impl CgoatConfig {
    pub fn new(generators: Vec<Arc<dyn Generator>>, auc_val: Vec<f64>, n_rows: usize, seed: u64) -> Self {
        Self {
            generators,
            auc_val,
            k: 150,
            patience: 15,
            n_rows,
            seed,
            classifier: GbdtConfig::default(),
            tpe: TpeConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.patience == 0 {
            return Err(Error::config("C-GOAT needs k >= 1 and patience >= 1"));
        }
        if self.generators.len() < 2 {
            return Err(Error::config("C-GOAT needs at least two generators"));
        }
        if self.auc_val.len() != self.generators.len() {
            return Err(Error::Dimension {
                expected: self.generators.len(),
                got: self.auc_val.len(),
            });
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.name()).collect()
    }
}

/// Method -> weight, in method order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub method: String,
    pub weight: f64,
}

pub fn alpha_record(names: &[String], alpha: &MixtureWeights) -> Vec<AlphaEntry> {
    names
        .iter()
        .zip(alpha.as_slice())
        .map(|(m, &w)| AlphaEntry {
            method: m.clone(),
            weight: w,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureTrial {
    pub iteration: usize,
    pub alpha: MixtureWeights,
    pub rows: Vec<usize>,
    pub auc: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct CgoatResult {
    pub names: Vec<String>,
    pub best_alpha: MixtureWeights,
    /// The composed dataset of the best trial.
    pub best_synthetic: Dataset,
    pub best_val_loss: f64,
    pub history: TrialHistory,
    pub trials: Vec<MixtureTrial>,
    /// Losses of the warm-start trials, in evaluation order.
    pub warm_start_losses: Vec<f64>,
    pub iterations_run: usize,
    pub stopped_early: bool,
    /// Every trial produced single-class data.
    pub degenerate: bool,
}

impl CgoatResult {
    pub fn best_val_auc(&self) -> f64 {
        -self.best_val_loss
    }

    pub fn alpha_record(&self) -> Vec<AlphaEntry> {
        alpha_record(&self.names, &self.best_alpha)
    }

    /// A fresh draw of `n` rows from the winning mixture, independent of the
    /// rows scored during the search.
    pub fn resample(&self, generators: &[Arc<dyn Generator>], n: usize, seed: u64) -> Result<Dataset> {
        compose(generators, &self.best_alpha, n, seed)
    }
}

/// Seed of trial `k` (1-based); block `m` then uses `block_seed(seed, m)`.
pub fn trial_seed(base: u64, k: usize) -> u64 {
    seed::derive_seed(base, &[k as u64])
}

pub fn alpha_space(m: usize) -> Result<SearchSpace> {
    SearchSpace::new().simplex(ALPHA, m)
}

fn alpha_point(alpha: &MixtureWeights) -> Point {
    alpha
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &w)| (SearchSpace::simplex_coordinate(ALPHA, i), ParamValue::Real(w)))
        .collect()
}

struct Scored {
    data: Dataset,
    result: EvalResult,
    rows: Vec<usize>,
}

fn score(cfg: &CgoatConfig, part: &Partition, alpha: &MixtureWeights, k: usize) -> Result<Scored> {
    let data = compose(&cfg.generators, alpha, cfg.n_rows, trial_seed(cfg.seed, k))?;
    let result = eval::evaluate(&data, &part.val, &cfg.classifier)?;
    Ok(Scored {
        data,
        result,
        rows: allocate_rows(alpha, cfg.n_rows),
    })
}

/// Runs the composition search. The warm starts (every corner, then the
/// AUC-proportional point) are evaluated first; TPE then proposes raw
/// uniform weights which are normalised onto the simplex. Stops after `k`
/// trials, or once past the startup phase with no improvement within the
/// last `patience` trials.
pub fn run_cgoat(cfg: &CgoatConfig, part: &Partition) -> Result<CgoatResult> {
    cfg.validate()?;
    let m = cfg.generators.len();
    let space = alpha_space(m)?;
    let mut history = TrialHistory::with_config(space, seed::derive_seed(cfg.seed, &[TPE_STREAM]), cfg.tpe);
    let mut trials = Vec::new();
    let mut best: Option<(f64, Dataset, MixtureWeights)> = None;

    let mut record = |history: &mut TrialHistory, alpha: MixtureWeights, s: Scored, tag: TrialTag| -> Result<()> {
        let loss = s.result.loss;
        history.record(alpha_point(&alpha), loss, tag)?;
        trials.push(MixtureTrial {
            iteration: history.len(),
            alpha: alpha.clone(),
            rows: s.rows,
            auc: s.result.auc,
            degenerate: s.result.degenerate,
        });
        if best.as_ref().is_none_or(|(l, _, _)| loss < *l) {
            best = Some((loss, s.data, alpha));
        }
        Ok(())
    };

    let starts: Vec<MixtureWeights> = warm_starts(&cfg.auc_val)?.into_iter().take(cfg.k).collect();
    let scored = starts
        .par_iter()
        .enumerate()
        .map(|(i, a)| score(cfg, part, a, i + 1))
        .collect::<Result<Vec<_>>>()?;
    let warm_start_losses: Vec<f64> = scored.iter().map(|s| s.result.loss).collect();
    for (alpha, s) in starts.into_iter().zip(scored) {
        record(&mut history, alpha, s, TrialTag::WarmStart)?;
    }

    let mut stopped_early = false;
    let stop = |h: &TrialHistory| h.len() > cfg.tpe.n_startup && h.should_stop(cfg.patience);
    if stop(&history) {
        stopped_early = history.len() < cfg.k;
    } else {
        for k in history.len() + 1..=cfg.k {
            let point = history.suggest();
            let raw = history.space().simplex_weights(&point, ALPHA)?;
            let alpha = MixtureWeights::normalize(&raw)?;
            let s = score(cfg, part, &alpha, k)?;
            log::debug!("mixture trial {k}: auc {:.4}", s.result.auc);
            record(&mut history, alpha, s, TrialTag::Suggested)?;
            if stop(&history) {
                stopped_early = k < cfg.k;
                break;
            }
        }
    }

    let (best_val_loss, best_synthetic, best_alpha) = best.expect("at least one trial");
    Ok(CgoatResult {
        names: cfg.names(),
        best_alpha,
        best_synthetic,
        best_val_loss,
        iterations_run: history.len(),
        degenerate: trials.iter().all(|t| t.degenerate),
        stopped_early,
        history,
        trials,
        warm_start_losses,
    })
}
