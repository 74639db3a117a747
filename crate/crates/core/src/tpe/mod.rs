//! Tree-structured Parzen Estimator over mixed search spaces.
//!
//! The history is split at the `gamma` quantile of observed losses into a
//! good set and a bad set. Each dimension gets an independent density for
//! both sets (`l` and `g`); candidates are drawn from `l` and the one with
//! the largest `l(x) / g(x)` is suggested. The optimizer always minimises.

mod parzen;
mod space;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use parzen::Estimator;
pub use space::{normalize_simplex, Param, ParamSpec, ParamValue, Point, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    /// Fraction of trials treated as "good".
    pub gamma: f64,
    /// Prior samples drawn before the density model kicks in.
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
        }
    }
}

impl TpeConfig {
    /// Pure prior sampling; the random-search baseline.
    pub fn random_search() -> Self {
        Self {
            n_startup: usize::MAX,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialTag {
    WarmStart,
    Suggested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// 1-based position in the history.
    pub iteration: usize,
    pub point: Point,
    pub loss: f64,
    pub tag: TrialTag,
}

/// Append-only record of evaluated points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialHistory {
    space: SearchSpace,
    trials: Vec<Trial>,
    seed: u64,
    config: TpeConfig,
}

impl TrialHistory {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        Self::with_config(space, seed, TpeConfig::default())
    }

    pub fn with_config(space: SearchSpace, seed: u64, config: TpeConfig) -> Self {
        Self {
            space,
            trials: Vec::new(),
            seed,
            config,
        }
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn config(&self) -> &TpeConfig {
        &self.config
    }

    /// True while suggestions still come from the prior.
    pub fn in_startup(&self) -> bool {
        self.trials.len() < self.config.n_startup
    }

    /// Next point to evaluate. A pure function of the history contents and
    /// the history seed.
    pub fn suggest(&self) -> Point {
        let mut rng = seed::derived_rng(self.seed, &[self.trials.len() as u64]);
        if self.in_startup() || self.trials.is_empty() {
            return self.space.sample_prior(&mut rng);
        }
        let dims = self.space.dimensions();

        let mut order: Vec<usize> = (0..self.trials.len()).collect();
        order.sort_by(|&a, &b| {
            self.trials[a]
                .loss
                .total_cmp(&self.trials[b].loss)
                .then(a.cmp(&b))
        });
        let n_good = ((self.config.gamma * self.trials.len() as f64).ceil() as usize)
            .clamp(1, self.trials.len());
        let (good, bad) = order.split_at(n_good);

        let internal = |idx: &[usize], d: &space::Dimension| -> Vec<f64> {
            idx.iter()
                .filter_map(|&i| d.kind.to_internal(&self.trials[i].point[&d.name]))
                .collect()
        };
        let models: Vec<(Estimator, Estimator)> = dims
            .iter()
            .map(|d| {
                (
                    Estimator::build(&d.kind, &internal(good, d)),
                    Estimator::build(&d.kind, &internal(bad, d)),
                )
            })
            .collect();

        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..self.config.n_candidates.max(1) {
            let cand: Vec<f64> = models.iter().map(|(l, _)| l.sample(&mut rng)).collect();
            let score: f64 = dims
                .iter()
                .zip(&models)
                .zip(&cand)
                .map(|((d, (l, g)), &x)| {
                    // score integers at the value they will be rounded to
                    let x = d.kind.to_internal(&d.kind.from_internal(x)).unwrap_or(x);
                    l.log_pdf(x) - g.log_pdf(x)
                })
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cand));
            }
        }
        let (_, cand) = best.expect("at least one candidate");
        dims.iter()
            .zip(cand)
            .map(|(d, x)| (d.name.clone(), d.kind.from_internal(x)))
            .collect()
    }

    pub fn record(&mut self, point: Point, loss: f64, tag: TrialTag) -> Result<&Trial> {
        if !loss.is_finite() {
            return Err(Error::HyperParam(format!("loss must be finite, got {loss}")));
        }
        self.space.validate(&point)?;
        self.trials.push(Trial {
            iteration: self.trials.len() + 1,
            point,
            loss,
            tag,
        });
        Ok(self.trials.last().unwrap())
    }

    /// Trial with the smallest loss; ties go to the earliest trial.
    pub fn best(&self) -> Result<&Trial> {
        self.best_index().map(|i| &self.trials[i])
    }

    pub fn best_index(&self) -> Result<usize> {
        let mut best: Option<usize> = None;
        for (i, t) in self.trials.iter().enumerate() {
            if best.is_none_or(|b| t.loss < self.trials[b].loss) {
                best = Some(i);
            }
        }
        best.ok_or(Error::EmptyHistory)
    }

    /// True iff the running best loss has not strictly improved within the
    /// most recent `patience` trials.
    pub fn should_stop(&self, patience: usize) -> bool {
        match self.best_index() {
            Ok(b) => self.trials.len() - 1 - b >= patience.max(1),
            Err(_) => false,
        }
    }

    /// Writes one JSON object per trial.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.trials {
            serde_json::to_writer(&mut w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<Trial>> {
        let mut out = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(x: f64) -> Point {
        [("x".to_string(), ParamValue::Real(x))].into()
    }

    fn x_of(p: &Point) -> f64 {
        p["x"].as_f64().unwrap()
    }

    fn line_space(hi: f64) -> SearchSpace {
        SearchSpace::new().uniform("x", 0.0, hi).unwrap()
    }

    #[test]
    fn empty_history_samples_prior() {
        let h = TrialHistory::new(line_space(1.0), 1);
        let x = x_of(&h.suggest());
        assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn suggest_is_deterministic() {
        let mut h = TrialHistory::new(line_space(10.0), 42);
        for i in 0..15 {
            let p = h.suggest();
            let l = (x_of(&p) - 7.0).abs() + i as f64 * 0.0;
            h.record(p, l, TrialTag::Suggested).unwrap();
        }
        assert_eq!(h.suggest(), h.clone().suggest());
    }

    #[test]
    fn concentrates_near_optimum() {
        let mut h = TrialHistory::new(line_space(10.0), 7);
        for _ in 0..40 {
            let p = h.suggest();
            let l = (x_of(&p) - 7.0).abs();
            h.record(p, l, TrialTag::Suggested).unwrap();
        }
        let mut inside = 0;
        for _ in 0..200 {
            let p = h.suggest();
            let x = x_of(&p);
            if (5.5..=8.5).contains(&x) {
                inside += 1;
            }
            h.record(p, (x - 7.0).abs(), TrialTag::Suggested).unwrap();
        }
        assert!(inside as f64 >= 0.8 * 200.0, "{inside}");
    }

    #[test]
    fn categorical_good_set_is_favoured() {
        let space = SearchSpace::new().categorical("c", ["A", "B", "C"]).unwrap();
        let mut h = TrialHistory::new(space.clone(), 0);
        // 12 trials: A is always best
        for (i, c) in ["A", "B", "C"].iter().cycle().take(12).enumerate() {
            let loss = if *c == "A" { 0.0 } else { 1.0 + i as f64 };
            h.record([("c".to_string(), ParamValue::Choice(c.to_string()))].into(), loss, TrialTag::Suggested)
                .unwrap();
        }
        let mut hits = 0;
        for s in 0..1000 {
            let mut hs = h.clone();
            hs.seed = s;
            if hs.suggest()["c"] == ParamValue::Choice("A".into()) {
                hits += 1;
            }
        }
        assert!(hits as f64 / 1000.0 > 1.0 / 3.0, "{hits}");
    }

    #[test]
    fn record_best_and_ties() {
        let mut h = TrialHistory::new(line_space(1.0), 0);
        assert!(matches!(h.best(), Err(Error::EmptyHistory)));
        h.record(point(0.3), 1.0, TrialTag::WarmStart).unwrap();
        assert_eq!(h.best().unwrap().point, point(0.3));
        h.record(point(0.4), 1.0, TrialTag::Suggested).unwrap();
        assert_eq!(h.best_index().unwrap(), 0);
        assert!(h.record(point(0.5), f64::NAN, TrialTag::Suggested).is_err());
        assert!(h.record(point(5.0), 0.0, TrialTag::Suggested).is_err());
        assert_eq!(h.len(), 2);

        let mut h = TrialHistory::new(line_space(1.0), 0);
        for l in [3.0, 1.0, 2.0] {
            h.record(point(0.1), l, TrialTag::Suggested).unwrap();
        }
        assert_eq!(h.best_index().unwrap(), 1);
    }

    fn with_losses(losses: &[f64]) -> TrialHistory {
        let mut h = TrialHistory::new(line_space(1.0), 0);
        for &l in losses {
            h.record(point(0.5), l, TrialTag::Suggested).unwrap();
        }
        h
    }

    #[test]
    fn early_stopping_rule() {
        assert!(!with_losses(&[5.0, 4.0, 3.0]).should_stop(10));
        let flat: Vec<f64> = (0..=15).map(|i| 3.0 + 0.1 * i as f64).collect();
        assert!(with_losses(&flat).should_stop(15));
        assert!(!with_losses(&flat[..15]).should_stop(15));
        assert!(!with_losses(&[3.0, 4.0, 2.0]).should_stop(1));
        assert!(with_losses(&[3.0, 3.0]).should_stop(1));
        assert!(!TrialHistory::new(line_space(1.0), 0).should_stop(1));
    }

    #[test]
    fn jsonl_round_trip() {
        let h = with_losses(&[1.0, 0.5]);
        let mut buf = Vec::new();
        h.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"tag\":\"suggested\""));
        assert_eq!(TrialHistory::read_jsonl(buf.as_slice()).unwrap(), h.trials);
    }

    proptest! {
        #[test]
        fn best_matches_linear_scan(losses in prop::collection::vec(-100i32..100, 1..100)) {
            let losses: Vec<f64> = losses.into_iter().map(|l| l as f64 / 4.0).collect();
            let h = with_losses(&losses);
            let mut oracle = 0;
            for i in 1..losses.len() {
                if losses[i] < losses[oracle] { oracle = i; }
            }
            prop_assert_eq!(h.best_index().unwrap(), oracle);
        }

        #[test]
        fn running_best_is_monotone(losses in prop::collection::vec(-50.0f64..50.0, 1..60)) {
            let mut h = TrialHistory::new(line_space(1.0), 0);
            let mut prev = f64::INFINITY;
            for l in losses {
                h.record(point(0.2), l, TrialTag::Suggested).unwrap();
                let b = h.best().unwrap().loss;
                prop_assert!(b <= prev);
                prev = b;
            }
        }

        #[test]
        fn suggestions_validate(seed in any::<u64>(), n in 0usize..30, with_simplex in any::<bool>()) {
            let mut space = SearchSpace::new()
                .uniform("u", -2.0, 3.0).unwrap()
                .log_uniform("l", 1e-3, 10.0).unwrap()
                .int("i", 5, 128, true).unwrap()
                .int("j", -3, 3, false).unwrap()
                .categorical("c", ["x", "y", "z"]).unwrap();
            if with_simplex {
                space = space.simplex("a", 4).unwrap();
            }
            let mut h = TrialHistory::new(space.clone(), seed);
            let mut rng = seed::rng(seed);
            for _ in 0..n {
                let p = h.suggest();
                prop_assert!(space.validate(&p).is_ok());
                let loss = rand::Rng::random::<f64>(&mut rng);
                h.record(p, loss, TrialTag::Suggested).unwrap();
            }
            let p = h.suggest();
            prop_assert!(space.validate(&p).is_ok());
            if with_simplex {
                let w = space.simplex_weights(&p, "a").unwrap();
                prop_assert!(w.iter().all(|&v| v >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalised_simplex_invariants(raw in prop::collection::vec(0.0f64..=1.0, 2..8)) {
            let w = normalize_simplex(&raw);
            prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
