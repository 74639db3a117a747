use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AlphaEntry, ExperimentConfig, Setup};
use crate::error::{Error, Result};
use crate::eval::EvalResult;
use crate::stats::TTest;

pub(super) const REPORT_FORMAT: &str = "goatmix-report";
pub(super) const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub method: String,
    pub setup: Setup,
    pub auc: f64,
    pub degenerate: bool,
    /// Optimizer trials run, for tuned and composed rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl RunEntry {
    pub fn new(method: &str, setup: Setup, r: &EvalResult, iterations: Option<usize>) -> Self {
        Self {
            method: method.to_string(),
            setup,
            auc: r.auc,
            degenerate: r.degenerate,
            iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub entries: Vec<RunEntry>,
    pub alpha_untuned: Vec<AlphaEntry>,
    pub alpha_tuned: Vec<AlphaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub setup: Setup,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// One-sided paired test that SC-GOAT beats this row; absent with a
    /// single repeat.
    pub t_test: Option<TTest>,
    pub degenerate_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub method: String,
    pub setup: Setup,
    pub column: String,
    /// `KS` or `CS`.
    pub test: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub method: String,
    pub setup: Setup,
    pub share_0: f64,
    pub share_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub version: u32,
    pub dataset: String,
    pub n_rows: usize,
    pub real_class_shares: BTreeMap<u8, f64>,
    pub classifier_fingerprint: u64,
    pub config: ExperimentConfig,
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<RunRecord>,
    pub fidelity: Vec<FidelityRow>,
    pub class_shares: Vec<ShareRow>,
    /// Some run trained on single-class synthetic data.
    pub degenerate: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(Error::config(format!("unsupported report format {} v{}", r.format, r.version)));
        }
        Ok(r)
    }
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    ExperimentReport::from_json(&std::fs::read_to_string(path)?)
}

/// One row per (repeat, method, setup) test AUC.
pub fn write_runs_csv<W: Write>(report: &ExperimentReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["repeat", "seed", "method", "setup", "auc", "degenerate", "iterations"])?;
    for run in &report.runs {
        for e in &run.entries {
            out.write_record([
                run.repeat.to_string(),
                run.seed.to_string(),
                e.method.clone(),
                e.setup.to_string(),
                format!("{:.6}", e.auc),
                e.degenerate.to_string(),
                e.iterations.map(|i| i.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Plain-text tables: AUC summary, per-run mixture weights, class shares
/// and fidelity.
pub fn render(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dataset: {} ({} rows)", report.dataset, report.n_rows);
    let _ = writeln!(
        s,
        "real class shares: {}",
        report
            .real_class_shares
            .iter()
            .map(|(c, f)| format!("{c}={}%", pct(*f)))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(s, "repeats: {}, seed: {}", report.runs.len(), report.config.seed);
    let _ = writeln!(s, "classifier fingerprint: {:016x}", report.classifier_fingerprint);

    let _ = writeln!(s, "\ntest AUC (%)");
    let _ = writeln!(
        s,
        "{:<16} {:<8} {:>7} {:>6} {:>8} {:>7} {:>5}",
        "method", "setup", "mean", "std", "t", "p", "degen"
    );
    for row in &report.summary {
        let (t, p) = match &row.t_test {
            Some(tt) => (format!("{:.2}", tt.t), format!("{:.3}", tt.p_value)),
            None => ("n/a".into(), "n/a".into()),
        };
        let _ = writeln!(
            s,
            "{:<16} {:<8} {:>7} {:>6} {:>8} {:>7} {:>5}",
            row.method,
            row.setup.to_string(),
            pct(row.mean_auc),
            pct(row.std_auc),
            t,
            p,
            row.degenerate_runs
        );
    }

    let _ = writeln!(s, "\nmixture weights per run (untuned | tuned)");
    for run in &report.runs {
        let fmt = |a: &[AlphaEntry]| {
            a.iter()
                .map(|e| format!("{}={:.3}", e.method, e.weight))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "  run {}: {} | {}", run.repeat, fmt(&run.alpha_untuned), fmt(&run.alpha_tuned));
    }

    let _ = writeln!(s, "\nsynthetic class shares (%)");
    for row in &report.class_shares {
        let _ = writeln!(
            s,
            "  {:<16} {:<8} 0={:>6} 1={:>6}",
            row.method,
            row.setup.to_string(),
            pct(row.share_0),
            pct(row.share_1)
        );
    }

    let _ = writeln!(s, "\nfidelity vs real train (KS distance / CS p-value)");
    for row in &report.fidelity {
        let value = match (row.test.as_str(), row.statistic, row.p_value) {
            ("CS", _, Some(p)) => format!("p={p:.4}"),
            (_, Some(v), _) => format!("{v:.4}"),
            _ => "n/a".into(),
        };
        let _ = writeln!(
            s,
            "  {:<16} {:<8} {:<20} {} {}",
            row.method,
            row.setup.to_string(),
            row.column,
            row.test,
            value
        );
    }
    if report.degenerate {
        let _ = writeln!(s, "\nwarning: some runs trained on single-class synthetic data (scored 0.5)");
    }
    s
}
