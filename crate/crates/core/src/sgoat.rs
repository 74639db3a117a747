//! Supervised tuning of one synthesizer: TPE over its hyperparameters,
//! scoring each candidate by the validation AUC of a classifier trained on
//! the synthetic rows it produces.

use serde::{Deserialize, Serialize};

use crate::data::Partition;
use crate::error::{Error, Result};
use crate::eval::{self, EvalResult, GbdtConfig};
use crate::seed;
use crate::synth::{self, FittedSynthesizer, HyperParams, Method};
use crate::tpe::{TpeConfig, TrialHistory, TrialTag};

/// Salt separating the optimizer's seed stream from the evaluation seeds.
const TPE_STREAM: u64 = 0x5470_6553;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgoatConfig {
    pub method: Method,
    /// Maximum number of trials, the default-parameter trial included.
    pub k: usize,
    pub patience: usize,
    /// Synthetic rows per trial; `None` means the training-set size.
    pub n_rows: Option<usize>,
    pub seed: u64,
    pub freeze_copula: bool,
    pub classifier: GbdtConfig,
    pub tpe: TpeConfig,
}

impl SgoatConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            k: 350,
            patience: 10,
            n_rows: None,
            seed,
            freeze_copula: false,
            classifier: GbdtConfig::default(),
            tpe: TpeConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.patience == 0 || self.n_rows == Some(0) {
            return Err(Error::config("S-GOAT needs k >= 1, patience >= 1 and at least one synthetic row"));
        }
        Ok(())
    }
}

/// One fit -> sample -> train -> score pass.
#[derive(Debug, Clone)]
pub struct ThetaEval {
    pub result: EvalResult,
    pub synthesizer: FittedSynthesizer,
}

/// Fits `method` with `theta` on the training split, samples `n` rows, trains
/// the classifier on them and scores it on the validation split. A synthetic
/// sample with a single class scores exactly 0.5 and is flagged.
pub fn evaluate_theta(
    method: Method,
    theta: &HyperParams,
    part: &Partition,
    n: usize,
    seed: u64,
    classifier: &GbdtConfig,
) -> Result<ThetaEval> {
    let synthesizer = synth::fit(method, &part.train, theta, seed::derive_seed(seed, &[0]))?;
    let rows = synthesizer.sample(n, seed::derive_seed(seed, &[1]));
    let result = eval::evaluate(&rows, &part.val, classifier)?;
    Ok(ThetaEval { result, synthesizer })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub auc: f64,
    pub degenerate: bool,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SgoatResult {
    pub method: Method,
    pub best_theta: HyperParams,
    pub best_val_loss: f64,
    /// Fully resolved parameters of the best trial.
    pub best_params: HyperParams,
    /// Seed of the best trial; `evaluate_theta` with it reproduces the score.
    pub best_seed: u64,
    pub history: TrialHistory,
    pub outcomes: Vec<TrialOutcome>,
    pub iterations_run: usize,
    pub stopped_early: bool,
    /// Every trial produced single-class synthetic data.
    pub degenerate: bool,
}

impl SgoatResult {
    pub fn best_val_auc(&self) -> f64 {
        -self.best_val_loss
    }
}

/// Seed of trial `k` (1-based).
pub fn trial_seed(base: u64, k: usize) -> u64 {
    seed::derive_seed(base, &[k as u64])
}

/// Runs the tuning loop. Trial 1 is the method's default configuration;
/// later trials come from TPE. The loop stops after `k` trials, or once the
/// optimizer has left its startup phase and the best loss has not improved
/// within the last `patience` trials.
pub fn run_sgoat(cfg: &SgoatConfig, part: &Partition) -> Result<SgoatResult> {
    cfg.validate()?;
    let space = synth::search_space(cfg.method, cfg.freeze_copula);
    if space.is_empty() {
        return Err(Error::config(format!(
            "{} has no tunable parameters; evaluate its default configuration once instead",
            cfg.method
        )));
    }
    let n = cfg.n_rows.unwrap_or(part.train.n_rows());
    let defaults: HyperParams = synth::default_params(cfg.method)
        .0
        .into_iter()
        .filter(|(name, _)| space.params().iter().any(|p| p.name == *name))
        .collect::<crate::tpe::Point>()
        .into();

    let mut history = TrialHistory::with_config(space, seed::derive_seed(cfg.seed, &[TPE_STREAM]), cfg.tpe);
    let mut outcomes = Vec::new();
    let mut stopped_early = false;
    for k in 1..=cfg.k {
        let (point, tag) = if k == 1 {
            (defaults.0.clone(), TrialTag::WarmStart)
        } else {
            (history.suggest(), TrialTag::Suggested)
        };
        let seed = trial_seed(cfg.seed, k);
        let theta = HyperParams::from(point.clone());
        let ev = evaluate_theta(cfg.method, &theta, part, n, seed, &cfg.classifier)?;
        log::debug!("{} trial {k}: auc {:.4}", cfg.method, ev.result.auc);
        history.record(point, ev.result.loss, tag)?;
        outcomes.push(TrialOutcome {
            auc: ev.result.auc,
            degenerate: ev.result.degenerate,
            seed,
        });
        if history.len() > cfg.tpe.n_startup && history.should_stop(cfg.patience) {
            stopped_early = k < cfg.k;
            break;
        }
    }
    let best_idx = history.best_index()?;
    let best = &history.trials()[best_idx];
    let best_theta = HyperParams::from(best.point.clone());
    Ok(SgoatResult {
        method: cfg.method,
        best_params: synth::resolve_params(cfg.method, &best_theta)?,
        best_theta,
        best_val_loss: best.loss,
        best_seed: outcomes[best_idx].seed,
        iterations_run: history.len(),
        degenerate: outcomes.iter().all(|o| o.degenerate),
        stopped_early,
        outcomes,
        history,
    })
}
