//! `goatmix`: ingest data, tune one synthesizer, compose all of them, or run
//! the full repeated protocol.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
//! run (single-class synthetic data somewhere; outputs are still written).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use goatmix::cgoat::{self, CgoatConfig};
use goatmix::data::{self, SchemaSpec};
use goatmix::harness::{self, Balance, DataSource, Encoding, ExperimentConfig};
use goatmix::sgoat::{self, SgoatConfig};
use goatmix::stats;
use goatmix::synth::{self, Generator, Method};
use goatmix::{eval, Error};
use serde::Serialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

#[derive(Parser)]
#[command(name = "goatmix", version, about = "Supervised tuning and composition of tabular synthesizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and write it as a CSV + schema bundle.
    Ingest(Source),
    /// Tune one synthesizer against validation AUC.
    Sgoat(SgoatArgs),
    /// Learn mixture weights over all synthesizers.
    Cgoat(CgoatArgs),
    /// Run the full repeated protocol and write the report.
    Experiment(ExperimentArgs),
    /// Re-render a saved report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodeFlag {
    Target,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum BalanceFlag {
    Smote,
    None,
}

#[derive(Args)]
struct Source {
    /// CSV path, or `bundled:adult[:rows]` / `bundled:credit[:rows]`.
    #[arg(long)]
    data: String,
    /// Schema file for a CSV source; without it the last column is the label.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Prep {
    /// Synthetic rows per evaluation; defaults to the training-split size.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    encode: EncodeFlag,
    #[arg(long, value_enum, default_value = "none")]
    balance: BalanceFlag,
}

#[derive(Args)]
struct SgoatArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    prep: Prep,
    /// GaussianCopula, JointMixture, Histogram or KDEPerturb.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 350)]
    k_sgoat: usize,
    #[arg(long, default_value_t = 10)]
    patience_sgoat: usize,
    /// Let the Gaussian copula's component count be tuned.
    #[arg(long)]
    tune_copula: bool,
}

#[derive(Args)]
struct CgoatArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    prep: Prep,
    #[arg(long, default_value_t = 150)]
    k_cgoat: usize,
    #[arg(long, default_value_t = 15)]
    patience_cgoat: usize,
    /// Tune every synthesizer before composing.
    #[arg(long)]
    tuned: bool,
    #[arg(long, default_value_t = 350)]
    k_sgoat: usize,
    #[arg(long, default_value_t = 10)]
    patience_sgoat: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    prep: Prep,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 350)]
    k_sgoat: usize,
    #[arg(long, default_value_t = 150)]
    k_cgoat: usize,
    #[arg(long, default_value_t = 10)]
    patience_sgoat: usize,
    #[arg(long, default_value_t = 15)]
    patience_cgoat: usize,
    /// Score the composed rows found during the search instead of a fresh draw.
    #[arg(long)]
    reuse_composed: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// A saved `report.json`, or the directory holding it.
    report: PathBuf,
    /// Rewrite `report.json`, `runs.csv` and `report.txt` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn experiment_config(source: &Source, prep: &Prep) -> Result<ExperimentConfig, Error> {
    let data = DataSource::parse(&source.data, source.schema.as_deref())?;
    let cfg = ExperimentConfig {
        rows: prep.rows,
        encode: match prep.encode {
            EncodeFlag::Target => Encoding::Target,
            EncodeFlag::None => Encoding::None,
        },
        balance: match prep.balance {
            BalanceFlag::Smote => Balance::Smote,
            BalanceFlag::None => Balance::None,
        },
        ..ExperimentConfig::new(data, source.seed)
    };
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_dataset(path: &Path, d: &goatmix::data::Dataset) -> Result<(), Error> {
    data::write_csv(d, BufWriter::new(File::create(path)?))
}

/// What a command achieved, beyond "it ran".
enum Outcome {
    Ok,
    Degenerate,
}

fn ingest(args: &Source) -> Result<Outcome, Error> {
    let cfg = ExperimentConfig::new(DataSource::parse(&args.data, args.schema.as_deref())?, args.seed);
    cfg.validate()?;
    let d = cfg.data.load(args.seed)?;
    d.validate()?;
    let shares = stats::class_share_report(&d)?;
    fs::create_dir_all(&args.out)?;
    write_dataset(&args.out.join("data.csv"), &d)?;
    fs::write(args.out.join("schema.txt"), SchemaSpec::from_schema(d.schema()).to_text())?;
    #[derive(Serialize)]
    struct Summary<'a> {
        source: String,
        rows: usize,
        columns: Vec<&'a str>,
        label: &'a str,
        class_shares: std::collections::BTreeMap<u8, f64>,
    }
    write_json(
        &args.out.join("summary.json"),
        &Summary {
            source: cfg.data.describe(),
            rows: d.n_rows(),
            columns: d.schema().columns().iter().map(|c| c.name.as_str()).collect(),
            label: d.schema().label_name(),
            class_shares: shares.clone(),
        },
    )?;
    println!("{} rows, {} columns, label `{}`", d.n_rows(), d.n_cols(), d.schema().label_name());
    for (c, f) in shares {
        println!("  class {c}: {:.2}%", 100.0 * f);
    }
    Ok(Outcome::Ok)
}

fn run_sgoat(args: &SgoatArgs) -> Result<Outcome, Error> {
    let method: Method = args.method.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let mut cfg = experiment_config(&args.source, &args.prep)?;
    cfg.k_sgoat = args.k_sgoat;
    cfg.patience_sgoat = args.patience_sgoat;
    cfg.freeze_copula = !args.tune_copula;
    cfg.validate()?;
    let d = harness::prepare_data(&cfg)?;
    let part = harness::prepare_partition(&cfg, &d, 0)?;
    let n = cfg.rows.unwrap_or(part.train.n_rows());
    let scfg = SgoatConfig {
        k: cfg.k_sgoat,
        patience: cfg.patience_sgoat,
        n_rows: Some(n),
        freeze_copula: cfg.freeze_copula,
        ..SgoatConfig::new(method, harness::repeat_seed(cfg.seed, 0))
    };
    let res = sgoat::run_sgoat(&scfg, &part)?;
    let best = sgoat::evaluate_theta(method, &res.best_theta, &part, n, res.best_seed, &scfg.classifier)?;
    let rows = best.synthesizer.sample(n, harness::repeat_seed(cfg.seed, 1));
    let test = eval::evaluate(&rows, &part.test, &scfg.classifier)?;

    let out = &args.source.out;
    fs::create_dir_all(out)?;
    res.history.write_jsonl(BufWriter::new(File::create(out.join("trials.jsonl"))?))?;
    fs::write(out.join("model.json"), best.synthesizer.to_json()?)?;
    write_dataset(&out.join("synthetic.csv"), &rows)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        method: Method,
        best_theta: &'a synth::HyperParams,
        best_params: &'a synth::HyperParams,
        best_val_auc: f64,
        test_auc: f64,
        iterations_run: usize,
        stopped_early: bool,
        degenerate: bool,
    }
    write_json(
        &out.join("result.json"),
        &Summary {
            method,
            best_theta: &res.best_theta,
            best_params: &res.best_params,
            best_val_auc: res.best_val_auc(),
            test_auc: test.auc,
            iterations_run: res.iterations_run,
            stopped_early: res.stopped_early,
            degenerate: res.degenerate,
        },
    )?;
    println!(
        "{method}: best validation AUC {:.4} after {} trials, test AUC {:.4}",
        res.best_val_auc(),
        res.iterations_run,
        test.auc
    );
    Ok(if res.degenerate || test.degenerate { Outcome::Degenerate } else { Outcome::Ok })
}

fn run_cgoat(args: &CgoatArgs) -> Result<Outcome, Error> {
    let mut cfg = experiment_config(&args.source, &args.prep)?;
    cfg.k_cgoat = args.k_cgoat;
    cfg.patience_cgoat = args.patience_cgoat;
    cfg.k_sgoat = args.k_sgoat;
    cfg.patience_sgoat = args.patience_sgoat;
    cfg.validate()?;
    let d = harness::prepare_data(&cfg)?;
    let part = harness::prepare_partition(&cfg, &d, 0)?;
    let n = cfg.rows.unwrap_or(part.train.n_rows());
    let seed = harness::repeat_seed(cfg.seed, 0);
    let candidates = harness::fit_candidates(&cfg, &part, seed, args.tuned)?;
    let generators: Vec<Arc<dyn Generator>> = candidates.iter().map(|c| c.fitted.clone() as Arc<dyn Generator>).collect();
    let ccfg = CgoatConfig {
        k: cfg.k_cgoat,
        patience: cfg.patience_cgoat,
        ..CgoatConfig::new(generators.clone(), candidates.iter().map(|c| c.val_auc).collect(), n, seed)
    };
    let res = cgoat::run_cgoat(&ccfg, &part)?;
    let fresh = res.resample(&generators, n, harness::repeat_seed(cfg.seed, 1))?;
    let test = eval::evaluate(&fresh, &part.test, &ccfg.classifier)?;

    let out = &args.source.out;
    fs::create_dir_all(out)?;
    res.history.write_jsonl(BufWriter::new(File::create(out.join("trials.jsonl"))?))?;
    write_dataset(&out.join("synthetic.csv"), &res.best_synthetic)?;
    #[derive(Serialize)]
    struct Summary {
        alpha: Vec<cgoat::AlphaEntry>,
        individual_val_auc: Vec<f64>,
        best_val_auc: f64,
        test_auc: f64,
        iterations_run: usize,
        stopped_early: bool,
        degenerate: bool,
    }
    write_json(
        &out.join("result.json"),
        &Summary {
            alpha: res.alpha_record(),
            individual_val_auc: ccfg.auc_val.clone(),
            best_val_auc: res.best_val_auc(),
            test_auc: test.auc,
            iterations_run: res.iterations_run,
            stopped_early: res.stopped_early,
            degenerate: res.degenerate,
        },
    )?;
    let weights: Vec<String> = res.alpha_record().iter().map(|a| format!("{}={:.3}", a.method, a.weight)).collect();
    println!("alpha: {}", weights.join(" "));
    println!(
        "best validation AUC {:.4} after {} trials, test AUC {:.4}",
        res.best_val_auc(),
        res.iterations_run,
        test.auc
    );
    Ok(if res.degenerate || test.degenerate { Outcome::Degenerate } else { Outcome::Ok })
}

fn run_experiment(args: &ExperimentArgs) -> Result<Outcome, Error> {
    let cfg = ExperimentConfig {
        repeats: args.repeats,
        k_sgoat: args.k_sgoat,
        k_cgoat: args.k_cgoat,
        patience_sgoat: args.patience_sgoat,
        patience_cgoat: args.patience_cgoat,
        reuse_composed: args.reuse_composed,
        ..experiment_config(&args.source, &args.prep)?
    };
    let report = harness::run_experiment(&cfg)?;
    harness::write_outputs(&report, &args.source.out)?;
    print!("{}", harness::render(&report));
    Ok(if report.degenerate { Outcome::Degenerate } else { Outcome::Ok })
}

fn rerender(args: &ReportArgs) -> Result<Outcome, Error> {
    let path = if args.report.is_dir() {
        args.report.join("report.json")
    } else {
        args.report.clone()
    };
    if !path.exists() {
        return Err(Error::Config(format!("{} does not exist", path.display())));
    }
    let report = harness::load_report(&path)?;
    if let Some(out) = &args.out {
        harness::write_outputs(&report, out)?;
    }
    print!("{}", harness::render(&report));
    Ok(if report.degenerate { Outcome::Degenerate } else { Outcome::Ok })
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_DATA
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let pool = match harness::thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Sgoat(a) => run_sgoat(a),
        Command::Cgoat(a) => run_cgoat(a),
        Command::Experiment(a) => run_experiment(a),
        Command::Report(a) => rerender(a),
    });
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Degenerate) => {
            eprintln!("warning: some runs trained on single-class synthetic data (scored 0.5)");
            ExitCode::from(EXIT_DEGENERATE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
