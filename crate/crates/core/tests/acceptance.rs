//! The acceptance criteria, each at its stated tolerance. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::oracles::{auc_pairs, ks_brute, t_sf_quadrature};
use common::{Benchmark, NoiseGenerator};
use goatmix::cgoat::{self, allocate_rows, run_cgoat, CgoatConfig};
use goatmix::data::{self, SplitFractions};
use goatmix::eval::{self, GbdtConfig};
use goatmix::harness::{self, bundled, DataSource, Encoding, ExperimentConfig, Setup};
use goatmix::sgoat::{self, SgoatConfig};
use goatmix::stats::{auc, ks_statistic, paired_t_test};
use goatmix::synth::{self, Generator, HyperParams, Method};
use goatmix::tpe::{SearchSpace, TpeConfig, TrialHistory, TrialTag};
use goatmix::{seed, Weights, Weights32};
use rand::Rng;

type Verdict = (bool, String);

fn baseline_plausibility() -> Verdict {
    let start = Instant::now();
    let cfg = ExperimentConfig::new(DataSource::parse("bundled:adult", None).unwrap(), 0);
    let d = harness::prepare_data(&cfg).unwrap();
    let part = harness::prepare_partition(&cfg, &d, 0).unwrap();
    let r = eval::evaluate(&part.train, &part.test, &GbdtConfig::default()).unwrap();
    let elapsed = start.elapsed();
    (
        r.auc >= 0.88 && elapsed < Duration::from_secs(600),
        format!("test AUC {:.4} on {} rows (need >= 0.88), {:.1}s", r.auc, d.n_rows(), elapsed.as_secs_f64()),
    )
}

fn collapsed_sentinel() -> Verdict {
    // the rare class never reaches the synthesizers: each emits one class
    let d = bundled::credit(50_000, bundled::CREDIT_FRAUD_RATE, 3).unwrap();
    let part = data::split(&d, SplitFractions::default(), 3).unwrap();
    let majority = part.train.filter_class(0);
    let mut aucs = Vec::new();
    for (i, m) in Method::ALL.into_iter().enumerate() {
        let f = synth::fit(m, &majority, &HyperParams::new(), i as u64).unwrap();
        let (r, rows) = harness::score_generator(&f, part.train.n_rows(), 7 + i as u64, &part.test, &GbdtConfig::default())
            .unwrap();
        assert_eq!(rows.class_counts()[1], 0);
        assert!(r.degenerate);
        aucs.push(r.auc);
    }

    // and through the full protocol: single-row samples are always one class
    let cfg = ExperimentConfig {
        repeats: 1,
        k_sgoat: 11,
        k_cgoat: 6,
        patience_sgoat: 1,
        patience_cgoat: 1,
        rows: Some(1),
        ..ExperimentConfig::new(DataSource::parse("bundled:credit:20000", None).unwrap(), 3)
    };
    let report = harness::run_experiment(&cfg).unwrap();
    let synthetic: Vec<_> = report.runs[0].entries.iter().filter(|e| e.setup != Setup::Real).collect();
    let reported: Vec<String> = synthetic.iter().map(|e| format!("{:.2}", 100.0 * e.auc)).collect();
    let ok = aucs.iter().all(|&a| a == 0.5)
        && report.degenerate
        && synthetic.iter().all(|e| e.degenerate && e.auc == 0.5)
        && reported.iter().all(|s| s == "50.00");
    (
        ok,
        format!(
            "direct AUCs {aucs:?}; {} protocol rows all reported {}",
            synthetic.len(),
            reported.first().cloned().unwrap_or_default()
        ),
    )
}

fn warm_start_formula() -> Verdict {
    let aucs = [0.9, 0.8, 0.7, 0.6];
    // by hand: auc* = 0.6, gaps (0.3, 0.2, 0.1, 0) over their sum 0.6
    let hand = [1.0 / 2.0, 1.0 / 3.0, 1.0 / 6.0, 0.0];
    let starts = cgoat::warm_starts(&aucs).unwrap();
    let corners_ok = (0..4).all(|m| starts[m] == Weights::corner(4, m));
    let err = starts[4]
        .as_slice()
        .iter()
        .zip(hand)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let starts32 = cgoat::warm_starts(&[0.9f32, 0.8, 0.7, 0.6]).unwrap();
    let err32 = starts32[4]
        .as_slice()
        .iter()
        .zip(hand)
        .map(|(a, b)| (*a as f64 - b).abs())
        .fold(0.0, f64::max);
    let uniform = cgoat::warm_starts(&[0.7; 4]).unwrap()[4] == Weights::uniform(4);
    (
        starts.len() == 5 && corners_ok && err <= 1e-12 && uniform && err32 <= 1e-6,
        format!("fifth point {:?}, max error {err:.1e} (f32 {err32:.1e})", starts[4].as_slice()),
    )
}

fn argmin_dominance() -> Verdict {
    let mut rng = seed::rng(0xa4);
    let mut violations = 0;
    let mut checked = 0;
    for run in 0..50u64 {
        let d = common::signal_data(rng.random_range(150..400), run);
        let part = data::split(&d, SplitFractions::default(), run).unwrap();
        let m = rng.random_range(2..=5);
        let generators: Vec<Arc<dyn Generator>> = (0..m)
            .map(|i| -> Arc<dyn Generator> {
                if rng.random::<f64>() < 0.3 {
                    Arc::new(NoiseGenerator {
                        name: format!("noise{i}"),
                        schema: d.schema_arc().clone(),
                        scale: rng.random_range(0.5..4.0),
                    })
                } else {
                    let method = Method::ALL[rng.random_range(0..4)];
                    let theta = synth::search_space(method, false).sample_prior(&mut rng).into();
                    Arc::new(synth::fit(method, &part.train, &theta, rng.random()).unwrap())
                }
            })
            .collect();
        let cfg = CgoatConfig {
            k: rng.random_range(5..=25),
            patience: rng.random_range(1..=10),
            ..CgoatConfig::new(
                generators,
                (0..m).map(|_| rng.random::<f64>()).collect(),
                rng.random_range(20..400),
                rng.random(),
            )
        };
        let r = run_cgoat(&cfg, &part).unwrap();
        let min_warm = r.warm_start_losses.iter().copied().fold(f64::INFINITY, f64::min);
        let corners = &r.history.trials()[..m];
        checked += 1;
        if r.best_val_loss > min_warm || corners.iter().any(|t| r.best_val_loss > t.loss) {
            violations += 1;
        }
    }
    (violations == 0, format!("{violations} violations in {checked} fuzzed runs"))
}

fn corner_recovery() -> Verdict {
    let start = Instant::now();
    let mut hits = 0;
    for s in 0..20u64 {
        let b = common::dominance(s);
        let r = run_cgoat(&config(&b, 40, s), &b.part).unwrap();
        if r.best_alpha.as_slice()[b.dominant] >= 0.9 || r.best_alpha.corner_index() == Some(b.dominant) {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    (
        hits >= 18 && elapsed < Duration::from_secs(900),
        format!("{hits}/20 runs on the dominant corner or >= 0.9 (need 18), {:.1}s", elapsed.as_secs_f64()),
    )
}

fn mixture_beats_components() -> Verdict {
    let mut wins = 0;
    let mut margins = Vec::new();
    for s in 0..20u64 {
        let b = common::two_halves(s);
        let r = run_cgoat(&config(&b, 40, s), &b.part).unwrap();
        // each component's own validation AUC in this run: its corner trial
        let best_single = r.trials[..2].iter().map(|t| t.auc).fold(f64::MIN, f64::max);
        let margin = r.best_val_auc() - best_single;
        margins.push(margin);
        if margin >= 0.02 {
            wins += 1;
        }
    }
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    (wins >= 16, format!("{wins}/20 runs beat both components by >= 0.02 (need 16), smallest margin {min:.4}"))
}

fn oracle_equivalence() -> Verdict {
    let mut rng = seed::rng(0x07);
    let mut fails = Vec::new();
    let (mut worst_auc, mut worst_p) = (0.0f64, 0.0f64);
    for case in 0..500 {
        let n = rng.random_range(2..120);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-10..10) as f64 / 3.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        worst_auc = worst_auc.max((auc(&scores, &labels).unwrap() - auc_pairs(&scores, &labels)).abs());

        let x: Vec<f64> = (0..rng.random_range(1..80)).map(|_| rng.random_range(-20..20) as f64 / 4.0).collect();
        let y: Vec<f64> = (0..rng.random_range(1..80)).map(|_| rng.random_range(-20..20) as f64 / 4.0).collect();
        if ks_statistic(&x, &y).unwrap() != ks_brute(&x, &y) {
            fails.push(format!("ks case {case}"));
        }

        let k = rng.random_range(2..40);
        let shift = rng.random_range(-1.5..1.5);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v - shift + rng.random_range(-2.0..2.0)).collect();
        let t = paired_t_test(&a, &b).unwrap();
        worst_p = worst_p.max((t.p_value - t_sf_quadrature(t.t, t.df as f64)).abs());
        if paired_t_test(&b, &a).unwrap().t != -t.t {
            fails.push(format!("t antisymmetry case {case}"));
        }

        let raw: Vec<f64> = (0..rng.random_range(1..9)).map(|_| rng.random()).collect();
        let total = rng.random_range(0..100_000);
        if allocate_rows(&Weights::normalize(&raw).unwrap(), total).iter().sum::<usize>() != total {
            fails.push(format!("allocation case {case}"));
        }
        let raw32: Vec<f32> = raw.iter().map(|&v| v as f32).collect();
        if allocate_rows(&Weights32::normalize(&raw32).unwrap(), total).iter().sum::<usize>() != total {
            fails.push(format!("f32 allocation case {case}"));
        }
    }
    let ok = fails.is_empty() && worst_auc <= 1e-12 && worst_p <= 1e-6;
    (
        ok,
        format!(
            "500 cases per suite: max AUC gap {worst_auc:.1e}, max p-value gap {worst_p:.1e}, {} exact mismatches",
            fails.len()
        ),
    )
}

fn tpe_beats_random() -> Verdict {
    let space = || SearchSpace::new().uniform("x", 0.0, 10.0).unwrap();
    let best_after = |cfg: TpeConfig, s: u64| {
        let mut h = TrialHistory::with_config(space(), s, cfg);
        for _ in 0..60 {
            let p = h.suggest();
            let x = p["x"].as_f64().unwrap();
            h.record(p, (x - 7.0).abs(), TrialTag::Suggested).unwrap();
        }
        h.best().unwrap().loss
    };
    let wins = (0..50u64)
        .filter(|&s| best_after(TpeConfig::default(), s) < best_after(TpeConfig::random_search(), s))
        .count();
    (wins >= 35, format!("TPE strictly better in {wins}/50 paired runs (need 35)"))
}

/// Re-checks a stop decision from the serialized trial log.
fn stop_is_justified(log: &[u8], k: usize, patience: usize, n_startup: usize, stopped_early: bool) -> Result<(), String> {
    let trials = TrialHistory::read_jsonl(log).map_err(|e| e.to_string())?;
    let losses: Vec<f64> = trials.iter().map(|t| t.loss).collect();
    let len = losses.len();
    if len > k {
        return Err(format!("{len} trials exceed K = {k}"));
    }
    // the window rule: no strict improvement among the last `patience` trials
    let window_closed = |j: usize| {
        j > n_startup && j > patience && {
            let before = losses[..j - patience].iter().copied().fold(f64::INFINITY, f64::min);
            losses[j - patience..j].iter().all(|&l| l >= before)
        }
    };
    if let Some(j) = (1..len).find(|&j| window_closed(j)) {
        return Err(format!("should have stopped at trial {j}, ran {len}"));
    }
    match (stopped_early, window_closed(len)) {
        (true, false) => Err(format!("stopped at {len} without a stale window")),
        (false, _) if len != k => Err(format!("ran {len} of {k} trials without stopping early")),
        _ => Ok(()),
    }
}

fn early_stopping() -> Verdict {
    let mut runs = 0;
    let mut early = 0;
    let mut problems = Vec::new();
    let d = common::signal_data(800, 21);
    let part = data::split(&d, SplitFractions::default(), 21).unwrap();
    for (i, m) in [Method::GaussianCopula, Method::JointMixture, Method::Histogram, Method::KdePerturb]
        .into_iter()
        .enumerate()
    {
        for s in 0..2u64 {
            let cfg = SgoatConfig::new(m, 100 * i as u64 + s);
            assert_eq!((cfg.k, cfg.patience), (350, 10));
            let r = sgoat::run_sgoat(&cfg, &part).unwrap();
            let mut log = Vec::new();
            r.history.write_jsonl(&mut log).unwrap();
            runs += 1;
            early += r.stopped_early as usize;
            if let Err(e) = stop_is_justified(&log, cfg.k, cfg.patience, cfg.tpe.n_startup, r.stopped_early) {
                problems.push(format!("S-GOAT {m} seed {s}: {e}"));
            }
        }
    }
    for s in 0..3u64 {
        let b = common::dominance(30 + s);
        let cfg = config(&b, 150, s);
        assert_eq!(cfg.patience, 15);
        let r = run_cgoat(&cfg, &b.part).unwrap();
        let mut log = Vec::new();
        r.history.write_jsonl(&mut log).unwrap();
        runs += 1;
        early += r.stopped_early as usize;
        if let Err(e) = stop_is_justified(&log, cfg.k, cfg.patience, cfg.tpe.n_startup, r.stopped_early) {
            problems.push(format!("C-GOAT seed {s}: {e}"));
        }
    }
    (
        problems.is_empty(),
        format!("{runs} runs ({early} stopped early), {} unjustified stops {problems:?}", problems.len()),
    )
}

fn determinism() -> Verdict {
    let cfg = ExperimentConfig {
        encode: Encoding::Target,
        repeats: 2,
        k_sgoat: 12,
        k_cgoat: 10,
        patience_sgoat: 3,
        patience_cgoat: 3,
        ..ExperimentConfig::new(DataSource::parse("bundled:adult:1000", None).unwrap(), 17)
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (i, dir) in dirs.iter().enumerate() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1 + 3 * i).build().unwrap();
        let report = pool.install(|| harness::run_experiment(&cfg)).unwrap();
        harness::write_outputs(&report, dir.path()).unwrap();
    }
    let files = ["report.json", "runs.csv", "report.txt"];
    let same = files.iter().all(|f| {
        std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap()
    });
    let size = std::fs::metadata(dirs[0].path().join("report.json")).unwrap().len();
    (same, format!("two runs (1 and 4 workers): {} byte-identical, report.json {size} bytes", files.join(", ")))
}

fn config(b: &Benchmark, k: usize, seed: u64) -> CgoatConfig {
    let n = b.part.train.n_rows();
    let aucs = common::individual_aucs(&b.generators, &b.part, n, seed);
    CgoatConfig {
        k,
        ..CgoatConfig::new(b.generators.clone(), aucs, n, seed)
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("baseline plausibility", baseline_plausibility),
        ("collapsed-synthesizer sentinel", collapsed_sentinel),
        ("warm-start formula", warm_start_formula),
        ("argmin dominance", argmin_dominance),
        ("corner-solution recovery", corner_recovery),
        ("mixture beats components", mixture_beats_components),
        ("oracle equivalence", oracle_equivalence),
        ("TPE sanity", tpe_beats_random),
        ("early stopping", early_stopping),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        failed += !ok as usize;
        println!(
            "criterion {id:>2} {:<4} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
