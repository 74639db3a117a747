//! The repeated end-to-end protocol: real-data baseline, every synthesizer
//! untuned and tuned, both composition modes, paired tests against the
//! tuned composition, fidelity and class-share tables.

pub mod bundled;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgoat::{self, AlphaEntry, CgoatConfig};
use crate::data::{self, Dataset, Partition, SchemaSpec, SmoteConfig, SplitFractions};
use crate::error::{Error, Result};
use crate::eval::{self, EvalResult, GbdtConfig};
use crate::seed;
use crate::sgoat::{self, SgoatConfig};
use crate::stats::{self, TTest};
use crate::synth::{self, FittedSynthesizer, Generator, Method};

pub use report::{load_report, render, write_runs_csv, ExperimentReport, FidelityRow, RunEntry, RunRecord, ShareRow, SummaryRow};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "GOATMIX_THREADS";
/// Row cap applied to large sources before splitting.
pub const SAMPLE_CAP: usize = 50_000;

/// Builds a worker pool honouring `GOATMIX_THREADS` (all cores when unset).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, schema: Option<PathBuf> },
    Bundled { name: String, rows: Option<usize> },
}

impl DataSource {
    /// `bundled:<name>[:<rows>]` selects a generated stand-in; anything else
    /// is a CSV path.
    pub fn parse(data: &str, schema: Option<&Path>) -> Result<Self> {
        if let Some(rest) = data.strip_prefix("bundled:") {
            let mut parts = rest.splitn(2, ':');
            let name = parts.next().unwrap_or_default().to_string();
            let rows = parts
                .next()
                .map(|r| r.parse::<usize>().map_err(|_| Error::config(format!("bad row count in `{data}`"))))
                .transpose()?;
            return Ok(DataSource::Bundled { name, rows });
        }
        Ok(DataSource::Csv {
            path: PathBuf::from(data),
            schema: schema.map(Path::to_path_buf),
        })
    }

    pub fn describe(&self) -> String {
        match self {
            DataSource::Csv { path, .. } => path.display().to_string(),
            DataSource::Bundled { name, rows: Some(n) } => format!("bundled:{name}:{n}"),
            DataSource::Bundled { name, rows: None } => format!("bundled:{name}"),
        }
    }

    /// Loads the rows. Without a schema file the last CSV column is taken
    /// as the label and every column type is inferred.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DataSource::Bundled { name, rows } => bundled::by_name(name, *rows, seed),
            DataSource::Csv { path, schema } => {
                let spec = match schema {
                    Some(s) => SchemaSpec::load(s)?,
                    None => {
                        let mut reader = csv::Reader::from_path(path)?;
                        let label = reader
                            .headers()?
                            .iter()
                            .last()
                            .map(|h| h.trim().to_string())
                            .ok_or_else(|| Error::data("CSV has no header"))?;
                        SchemaSpec::label_only(label)
                    }
                };
                data::load_csv(path, &spec)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Target,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    Smote,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub encode: Encoding,
    pub balance: Balance,
    pub repeats: usize,
    pub k_sgoat: usize,
    pub k_cgoat: usize,
    pub patience_sgoat: usize,
    pub patience_cgoat: usize,
    /// Synthetic rows per evaluation; `None` matches the training split.
    pub rows: Option<usize>,
    pub seed: u64,
    /// Keep the Gaussian copula untunable (its BIC-selected marginals are
    /// then used for both setups).
    pub freeze_copula: bool,
    pub sample_cap: usize,
    pub smoothing: f64,
    pub smote: SmoteConfig,
    /// Score the composed search winner on test instead of a fresh draw.
    pub reuse_composed: bool,
    pub classifier: GbdtConfig,
}

impl ExperimentConfig {
    pub fn new(data: DataSource, seed: u64) -> Self {
        Self {
            data,
            encode: Encoding::None,
            balance: Balance::None,
            repeats: 10,
            k_sgoat: 350,
            k_cgoat: 150,
            patience_sgoat: 10,
            patience_cgoat: 15,
            rows: None,
            seed,
            freeze_copula: true,
            sample_cap: SAMPLE_CAP,
            smoothing: 10.0,
            smote: SmoteConfig::default(),
            reuse_composed: false,
            classifier: GbdtConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        if self.k_sgoat == 0 || self.k_cgoat == 0 || self.patience_sgoat == 0 || self.patience_cgoat == 0 {
            return Err(Error::config("iteration budgets and patience must be at least 1"));
        }
        if self.rows == Some(0) {
            return Err(Error::config("synthetic row count must be at least 1"));
        }
        if self.sample_cap == 0 || !(self.smoothing > 0.0) {
            return Err(Error::config("sample cap and smoothing must be positive"));
        }
        if let DataSource::Csv { path, schema } = &self.data {
            for p in std::iter::once(path).chain(schema) {
                if !p.exists() {
                    return Err(Error::config(format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

/// Seed streams, kept apart so adding a stage never shifts another.
mod stream {
    pub const DATA: u64 = 1;
    pub const CAP: u64 = 2;
    pub const SMOTE: u64 = 3;
    pub const REPEAT: u64 = 4;
    pub const FIT: u64 = 10;
    pub const VAL: u64 = 11;
    pub const TEST: u64 = 12;
    pub const SGOAT: u64 = 13;
    pub const CGOAT: u64 = 14;
}

/// Loads, caps and (optionally) balances the source rows.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut d = cfg.data.load(seed::derive_seed(cfg.seed, &[stream::DATA]))?;
    if d.n_rows() > cfg.sample_cap {
        let mut rng = seed::derived_rng(cfg.seed, &[stream::CAP]);
        let mut idx = index::sample(&mut rng, d.n_rows(), cfg.sample_cap).into_vec();
        idx.sort_unstable();
        d = d.select_rows(&idx);
    }
    if cfg.balance == Balance::Smote {
        if d.schema().feature_indices().iter().any(|&j| d.schema().column(j).is_categorical()) {
            return Err(Error::config(
                "SMOTE balancing needs all-continuous features; it runs before the split, so target encoding cannot help",
            ));
        }
        let smote = SmoteConfig {
            seed: seed::derive_seed(cfg.seed, &[stream::SMOTE]),
            ..cfg.smote
        };
        d = data::smote_balance(&d, &smote)?;
    }
    Ok(d)
}

/// Splits for repeat `r` and applies train-fitted target encoding.
pub fn prepare_partition(cfg: &ExperimentConfig, d: &Dataset, r: usize) -> Result<Partition> {
    let part = data::split(d, SplitFractions::default(), repeat_seed(cfg.seed, r))?;
    Ok(match cfg.encode {
        Encoding::None => part,
        Encoding::Target => Partition {
            val: data::target_encode(&part.train, &part.val, cfg.smoothing)?,
            test: data::target_encode(&part.train, &part.test, cfg.smoothing)?,
            train: data::target_encode(&part.train, &part.train, cfg.smoothing)?,
            seed: part.seed,
        },
    })
}

pub fn repeat_seed(base: u64, r: usize) -> u64 {
    seed::derive_seed(base, &[stream::REPEAT, r as u64])
}

/// Test AUC of a classifier trained on `n` rows drawn from `g`; a sample
/// holding one class scores exactly 0.5.
pub fn score_generator(g: &dyn Generator, n: usize, seed: u64, target: &Dataset, classifier: &GbdtConfig) -> Result<(EvalResult, Dataset)> {
    let rows = g.generate(n, seed)?;
    Ok((eval::evaluate(&rows, target, classifier)?, rows))
}

/// Row label of a setup in the summary and run tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    Real,
    Untuned,
    Tuned,
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setup::Real => "real",
            Setup::Untuned => "untuned",
            Setup::Tuned => "tuned",
        })
    }
}

pub const BASELINE: &str = "Baseline";
pub const CGOAT: &str = "C-GOAT";
pub const SCGOAT: &str = "SC-GOAT";

/// Everything measured in one repeat; `samples` holds the synthetic rows
/// that were scored on test, for the fidelity tables.
struct RepeatOutcome {
    record: RunRecord,
    samples: Vec<(String, Setup, Dataset)>,
    train: Dataset,
}

struct MethodRun {
    fitted: Arc<FittedSynthesizer>,
    val_auc: f64,
}

fn run_repeat(cfg: &ExperimentConfig, d: &Dataset, r: usize) -> Result<RepeatOutcome> {
    let part = prepare_partition(cfg, d, r)?;
    let rs = repeat_seed(cfg.seed, r);
    let n = cfg.rows.unwrap_or(part.train.n_rows());
    let clf = &cfg.classifier;
    let mut entries = Vec::new();
    let mut samples = Vec::new();

    let base = eval::evaluate(&part.train, &part.test, clf)?;
    entries.push(RunEntry::new(BASELINE, Setup::Real, &base, None));

    let mut untuned = Vec::new();
    let mut tuned = Vec::new();
    for (i, &m) in Method::ALL.iter().enumerate() {
        let i = i as u64;
        // untuned: default parameters
        let theta = synth::default_params(m);
        let fitted = Arc::new(synth::fit(m, &part.train, &theta, seed::derive_seed(rs, &[stream::FIT, i]))?);
        let (val, _) = score_generator(&*fitted, n, seed::derive_seed(rs, &[stream::VAL, i]), &part.val, clf)?;
        let (test, rows) = score_generator(&*fitted, n, seed::derive_seed(rs, &[stream::TEST, i, 0]), &part.test, clf)?;
        entries.push(RunEntry::new(m.as_str(), Setup::Untuned, &test, None));
        let untuned_run = MethodRun {
            fitted,
            val_auc: val.auc,
        };

        // tuned: supervised search; a method with nothing to tune is
        // evaluated once and both rows share that score
        let space = synth::search_space(m, cfg.freeze_copula);
        let tuned_run = if space.is_empty() {
            entries.push(RunEntry::new(m.as_str(), Setup::Tuned, &test, None));
            samples.push((m.to_string(), Setup::Untuned, rows.clone()));
            samples.push((m.to_string(), Setup::Tuned, rows));
            MethodRun {
                fitted: untuned_run.fitted.clone(),
                val_auc: untuned_run.val_auc,
            }
        } else {
            samples.push((m.to_string(), Setup::Untuned, rows));
            let sg = sgoat::run_sgoat(
                &SgoatConfig {
                    k: cfg.k_sgoat,
                    patience: cfg.patience_sgoat,
                    n_rows: Some(n),
                    freeze_copula: cfg.freeze_copula,
                    classifier: *clf,
                    ..SgoatConfig::new(m, seed::derive_seed(rs, &[stream::SGOAT, i]))
                },
                &part,
            )?;
            let fitted = Arc::new(synth::fit(m, &part.train, &sg.best_theta, seed::derive_seed(sg.best_seed, &[0]))?);
            let (test, rows) = score_generator(&*fitted, n, seed::derive_seed(rs, &[stream::TEST, i, 1]), &part.test, clf)?;
            entries.push(RunEntry::new(m.as_str(), Setup::Tuned, &test, Some(sg.iterations_run)));
            samples.push((m.to_string(), Setup::Tuned, rows));
            MethodRun {
                fitted,
                val_auc: sg.best_val_auc(),
            }
        };
        untuned.push(untuned_run);
        tuned.push(tuned_run);
    }

    let mut alphas = Vec::new();
    for (mode, runs) in [(0u64, &untuned), (1, &tuned)] {
        let generators: Vec<Arc<dyn Generator>> = runs.iter().map(|r| r.fitted.clone() as Arc<dyn Generator>).collect();
        let ccfg = CgoatConfig {
            k: cfg.k_cgoat,
            patience: cfg.patience_cgoat,
            classifier: *clf,
            ..CgoatConfig::new(
                generators.clone(),
                runs.iter().map(|r| r.val_auc).collect(),
                n,
                seed::derive_seed(rs, &[stream::CGOAT, mode]),
            )
        };
        let res = cgoat::run_cgoat(&ccfg, &part)?;
        let rows = if cfg.reuse_composed {
            res.best_synthetic.clone()
        } else {
            res.resample(&generators, n, seed::derive_seed(rs, &[stream::TEST, stream::CGOAT, mode]))?
        };
        let test = eval::evaluate(&rows, &part.test, clf)?;
        let (name, setup) = if mode == 0 { (CGOAT, Setup::Untuned) } else { (SCGOAT, Setup::Tuned) };
        entries.push(RunEntry::new(name, setup, &test, Some(res.iterations_run)));
        samples.push((name.to_string(), setup, rows));
        alphas.push(res.alpha_record());
    }
    let alpha_tuned = alphas.pop().unwrap_or_default();
    let alpha_untuned = alphas.pop().unwrap_or_default();

    Ok(RepeatOutcome {
        record: RunRecord {
            repeat: r,
            seed: rs,
            entries,
            alpha_untuned,
            alpha_tuned,
        },
        samples,
        train: part.train,
    })
}

/// One fitted member of the composition set.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub fitted: Arc<FittedSynthesizer>,
    pub val_auc: f64,
    /// Supervised-search trials spent, when tuned.
    pub iterations: Option<usize>,
}

/// Fits every method on the training split, with default parameters or
/// tuned by supervised search, and scores each on validation. Used by the
/// standalone composition command; the full protocol interleaves the same
/// steps with test scoring.
pub fn fit_candidates(cfg: &ExperimentConfig, part: &Partition, seed: u64, tuned: bool) -> Result<Vec<Candidate>> {
    let n = cfg.rows.unwrap_or(part.train.n_rows());
    let clf = &cfg.classifier;
    Method::ALL
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let i = i as u64;
            let space = synth::search_space(m, cfg.freeze_copula);
            if tuned && !space.is_empty() {
                let sg = sgoat::run_sgoat(
                    &SgoatConfig {
                        k: cfg.k_sgoat,
                        patience: cfg.patience_sgoat,
                        n_rows: Some(n),
                        freeze_copula: cfg.freeze_copula,
                        classifier: *clf,
                        ..SgoatConfig::new(m, seed::derive_seed(seed, &[stream::SGOAT, i]))
                    },
                    part,
                )?;
                let fitted = synth::fit(m, &part.train, &sg.best_theta, seed::derive_seed(sg.best_seed, &[0]))?;
                return Ok(Candidate {
                    fitted: Arc::new(fitted),
                    val_auc: sg.best_val_auc(),
                    iterations: Some(sg.iterations_run),
                });
            }
            let fitted = Arc::new(synth::fit(m, &part.train, &synth::default_params(m), seed::derive_seed(seed, &[stream::FIT, i]))?);
            let (val, _) = score_generator(&*fitted, n, seed::derive_seed(seed, &[stream::VAL, i]), &part.val, clf)?;
            Ok(Candidate {
                fitted,
                val_auc: val.auc,
                iterations: None,
            })
        })
        .collect()
}

/// Per-column fidelity of `synthetic` against `real`: KS distance for
/// continuous columns, chi-square statistic and p-value for categorical.
pub fn fidelity(real: &Dataset, synthetic: &Dataset) -> Vec<(String, &'static str, Option<f64>, Option<f64>)> {
    real.schema()
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            if synthetic.is_empty() {
                return (c.name.clone(), if c.is_categorical() { "CS" } else { "KS" }, None, None);
            }
            if c.is_categorical() {
                let counts = |d: &Dataset| {
                    let mut k = vec![0usize; c.n_categories()];
                    for v in d.column(j) {
                        k[v as usize] += 1;
                    }
                    k
                };
                match stats::chi_square_counts(&counts(real), &counts(synthetic)) {
                    Ok(cs) => (c.name.clone(), "CS", Some(cs.statistic), Some(cs.p_value)),
                    Err(_) => (c.name.clone(), "CS", None, None),
                }
            } else {
                let ks = stats::ks_statistic(&real.column(j), &synthetic.column(j)).ok();
                (c.name.clone(), "KS", ks, None)
            }
        })
        .collect()
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| stats::mean(&v))
}

/// Runs the full protocol. Repeats execute in parallel on the current
/// worker pool; the report does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let d = prepare_data(cfg)?;
    let outcomes = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_repeat(cfg, &d, r))
        .collect::<Result<Vec<_>>>()?;

    // summary: mean/std per row, paired test of SC-GOAT against each row
    let keys: Vec<(String, Setup)> = outcomes[0]
        .record
        .entries
        .iter()
        .map(|e| (e.method.clone(), e.setup))
        .collect();
    let aucs = |k: &(String, Setup)| -> Vec<f64> {
        outcomes
            .iter()
            .map(|o| {
                o.record
                    .entries
                    .iter()
                    .find(|e| e.method == k.0 && e.setup == k.1)
                    .map_or(f64::NAN, |e| e.auc)
            })
            .collect()
    };
    let reference = aucs(&(SCGOAT.to_string(), Setup::Tuned));
    let summary = keys
        .iter()
        .map(|k| {
            let a = aucs(k);
            let t_test: Option<TTest> = if cfg.repeats >= 2 {
                Some(stats::paired_t_test(&reference, &a)?)
            } else {
                None
            };
            Ok(SummaryRow {
                method: k.0.clone(),
                setup: k.1,
                mean_auc: stats::mean(&a),
                std_auc: if a.len() >= 2 { stats::std_dev(&a) } else { 0.0 },
                t_test,
                degenerate_runs: outcomes
                    .iter()
                    .flat_map(|o| &o.record.entries)
                    .filter(|e| e.method == k.0 && e.setup == k.1 && e.degenerate)
                    .count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // fidelity and class shares, averaged over repeats
    let mut fid: BTreeMap<(usize, usize), Vec<(String, &'static str, Option<f64>, Option<f64>)>> = BTreeMap::new();
    let mut shares: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for o in &outcomes {
        for (s, (_, _, rows)) in o.samples.iter().enumerate() {
            for (j, f) in fidelity(&o.train, rows).into_iter().enumerate() {
                fid.entry((s, j)).or_default().push(f);
            }
            if !rows.is_empty() {
                shares.entry(s).or_default().push(rows.class_counts()[1] as f64 / rows.n_rows() as f64);
            }
        }
    }
    let sample_keys: Vec<(String, Setup)> = outcomes[0].samples.iter().map(|(m, s, _)| (m.clone(), *s)).collect();
    let fidelity_rows = fid
        .into_iter()
        .map(|((s, _), cells)| FidelityRow {
            method: sample_keys[s].0.clone(),
            setup: sample_keys[s].1,
            column: cells[0].0.clone(),
            test: cells[0].1.to_string(),
            statistic: mean_of(cells.iter().map(|c| c.2)),
            p_value: mean_of(cells.iter().map(|c| c.3)),
        })
        .collect();
    let class_shares = sample_keys
        .iter()
        .enumerate()
        .map(|(s, (m, setup))| {
            // every scored sample holds at least one row
            let p1 = shares.get(&s).map_or(0.0, |v| stats::mean(v));
            ShareRow {
                method: m.clone(),
                setup: *setup,
                share_0: 1.0 - p1,
                share_1: p1,
            }
        })
        .collect();

    let runs: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
    let degenerate = runs.iter().flat_map(|r| &r.entries).any(|e| e.degenerate);
    Ok(ExperimentReport {
        format: report::REPORT_FORMAT.to_string(),
        version: report::REPORT_VERSION,
        dataset: cfg.data.describe(),
        n_rows: d.n_rows(),
        real_class_shares: stats::class_share_report(&d)?,
        classifier_fingerprint: cfg.classifier.fingerprint(),
        config: cfg.clone(),
        summary,
        runs,
        fidelity: fidelity_rows,
        class_shares,
        degenerate,
    })
}

/// Writes `report.json`, `runs.csv` and `report.txt` into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    let mut csv_out = Vec::new();
    write_runs_csv(report, &mut csv_out)?;
    std::fs::write(dir.join("runs.csv"), csv_out)?;
    std::fs::write(dir.join("report.txt"), render(report))?;
    Ok(())
}
