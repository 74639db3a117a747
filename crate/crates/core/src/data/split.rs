use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

const MAX_SPLIT_ATTEMPTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.2,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    /// Part sizes for `n` rows: train and validation are rounded, test takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (self.train * n as f64).round() as usize;
        let val = (self.val * n as f64).round() as usize;
        let train = train.min(n);
        let val = val.min(n - train);
        (train, val, n - train - val)
    }
}

/// Train/validation/test partition of one source dataset.
#[derive(Debug, Clone)]
pub struct Partition {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// Shuffles rows with a seeded PRNG and cuts them into contiguous parts.
/// The shuffle is redrawn (with a derived seed) until the training part
/// holds both label classes.
pub fn split(d: &Dataset, fractions: SplitFractions, seed: u64) -> Result<Partition> {
    let SplitFractions { train, val, test } = fractions;
    if [train, val, test].iter().any(|f| !(*f > 0.0 && *f < 1.0))
        || ((train + val + test) - 1.0).abs() > 1e-9
    {
        return Err(Error::config(format!(
            "split fractions ({train}, {val}, {test}) must be positive and sum to 1"
        )));
    }
    let n = d.n_rows();
    if n < 10 {
        return Err(Error::data(format!("dataset has {n} rows, at least 10 required")));
    }
    let (n_train, n_val, n_test) = fractions.sizes(n);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::data("dataset too small to give every part a row"));
    }
    if !d.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let labels = d.labels();
    for attempt in 0..MAX_SPLIT_ATTEMPTS {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::derived_rng(seed, &[attempt]));
        let train_idx = &order[..n_train];
        let has_pos = train_idx.iter().any(|&i| labels[i] == 1);
        let has_neg = train_idx.iter().any(|&i| labels[i] == 0);
        if has_pos && has_neg {
            return Ok(Partition {
                train: d.select_rows(train_idx),
                val: d.select_rows(&order[n_train..n_train + n_val]),
                test: d.select_rows(&order[n_train + n_val..]),
                seed,
            });
        }
    }
    Err(Error::data(format!(
        "no split with both classes in train after {MAX_SPLIT_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::test_util::continuous_schema;
    use proptest::prelude::*;

    fn dataset(n: usize) -> Dataset {
        let s = continuous_schema(1);
        let cells: Vec<f64> = (0..n)
            .flat_map(|i| [i as f64, (i % 2) as f64])
            .collect();
        Dataset::new(s, cells).unwrap()
    }

    #[test]
    fn sizes_follow_fractions() {
        let p = split(&dataset(100), SplitFractions::default(), 7).unwrap();
        assert_eq!((p.train.n_rows(), p.val.n_rows(), p.test.n_rows()), (70, 20, 10));
        let p = split(&dataset(10), SplitFractions::default(), 7).unwrap();
        assert_eq!((p.train.n_rows(), p.val.n_rows(), p.test.n_rows()), (7, 2, 1));
    }

    #[test]
    fn deterministic_given_seed() {
        let d = dataset(57);
        let a = split(&d, SplitFractions::default(), 3).unwrap();
        let b = split(&d, SplitFractions::default(), 3).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);
        let c = split(&d, SplitFractions::default(), 4).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn rejects_tiny_and_single_class() {
        assert!(split(&dataset(9), SplitFractions::default(), 1).is_err());
        let s = continuous_schema(1);
        let one_class = Dataset::new(s, (0..20).flat_map(|i| [i as f64, 0.0]).collect()).unwrap();
        assert!(matches!(
            split(&one_class, SplitFractions::default(), 1),
            Err(Error::SingleClass)
        ));
        let bad = SplitFractions { train: 0.5, val: 0.2, test: 0.2 };
        assert!(split(&dataset(100), bad, 1).is_err());
    }

    #[test]
    fn rare_positive_still_lands_in_train() {
        let s = continuous_schema(1);
        let mut cells: Vec<f64> = (0..30).flat_map(|i| [i as f64, 0.0]).collect();
        cells[1] = 1.0;
        let d = Dataset::new(s, cells).unwrap();
        for seed in 0..20 {
            let p = split(&d, SplitFractions::default(), seed).unwrap();
            assert!(p.train.has_both_classes());
        }
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..300, seed in any::<u64>()) {
            let d = dataset(n);
            let p = split(&d, SplitFractions::default(), seed).unwrap();
            let mut ids: Vec<i64> = [&p.train, &p.val, &p.test]
                .iter()
                .flat_map(|part| part.column(0))
                .map(|v| v as i64)
                .collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..n as i64).collect::<Vec<_>>());
        }
    }
}
