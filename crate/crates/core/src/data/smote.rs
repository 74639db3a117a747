use rand::seq::index;
use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority row ratio, in (0, 1].
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 0.5,
            seed: 0,
        }
    }
}

/// Rebalances classes by SMOTE oversampling of the minority class combined
/// with random undersampling of the majority class.
///
/// The total row count is kept: the minority target is
/// `round(n * r / (1 + r))` and the majority gets the remainder. When the
/// requested ratio is below the current one, the minority class is
/// undersampled instead and the majority is left untouched.
///
/// Retained rows keep their input order; synthetic minority rows are appended.
pub fn smote_balance(d: &Dataset, cfg: &SmoteConfig) -> Result<Dataset> {
    let r = cfg.target_ratio;
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::config(format!("target_ratio must lie in (0, 1], got {r}")));
    }
    let schema = d.schema();
    let label = schema.label_index();
    if let Some(c) = schema
        .columns()
        .iter()
        .enumerate()
        .find(|(j, c)| *j != label && c.is_categorical())
    {
        return Err(Error::data(format!(
            "smote requires continuous features; column `{}` is categorical",
            c.1.name
        )));
    }
    let counts = d.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let minority_class: u8 = if counts[1] <= counts[0] { 1 } else { 0 };
    let labels = d.labels();
    let minority: Vec<usize> = (0..d.n_rows()).filter(|&i| labels[i] == minority_class).collect();
    let majority: Vec<usize> = (0..d.n_rows()).filter(|&i| labels[i] != minority_class).collect();
    if minority.len() < 2 {
        return Err(Error::data("smote needs at least two minority rows"));
    }
    if cfg.k_neighbors == 0 {
        return Err(Error::config("k_neighbors must be at least 1"));
    }
    if cfg.k_neighbors >= minority.len() {
        return Err(Error::data(format!(
            "smote with k_neighbors = {} needs more than {} minority rows",
            cfg.k_neighbors,
            minority.len()
        )));
    }

    let n = d.n_rows();
    let mut target_min = (n as f64 * r / (1.0 + r)).round() as usize;
    let mut target_maj = n - target_min;
    if target_min < minority.len() {
        target_maj = majority.len();
        target_min = (r * target_maj as f64).round().max(1.0) as usize;
    }
    if target_min == minority.len() && target_maj == majority.len() {
        return Ok(d.clone());
    }

    let mut rng = seed::rng(cfg.seed);
    let mut keep_major: Vec<usize> = if target_maj < majority.len() {
        index::sample(&mut rng, majority.len(), target_maj)
            .into_iter()
            .map(|i| majority[i])
            .collect()
    } else {
        majority.clone()
    };
    let mut keep_minor: Vec<usize> = if target_min < minority.len() {
        index::sample(&mut rng, minority.len(), target_min)
            .into_iter()
            .map(|i| minority[i])
            .collect()
    } else {
        minority.clone()
    };
    keep_major.sort_unstable();
    keep_minor.sort_unstable();
    let mut kept: Vec<usize> = keep_major.into_iter().chain(keep_minor).collect();
    kept.sort_unstable();
    let mut cells = d.select_rows(&kept).cells().to_vec();

    let n_synth = target_min.saturating_sub(minority.len());
    if n_synth > 0 {
        let neighbors = nearest_neighbors(d, &minority, cfg.k_neighbors);
        let width = d.n_cols();
        for _ in 0..n_synth {
            let a = rng.random_range(0..minority.len());
            let b = neighbors[a][rng.random_range(0..cfg.k_neighbors)];
            let lambda: f64 = rng.random();
            let (xa, xb) = (d.row(minority[a]), d.row(minority[b]));
            for j in 0..width {
                cells.push(if j == label {
                    minority_class as f64
                } else {
                    xa[j] + lambda * (xb[j] - xa[j])
                });
            }
        }
    }
    Ok(Dataset::from_cells_unchecked(d.schema_arc().clone(), cells))
}

/// For each minority row, positions (within `minority`) of its `k` nearest
/// minority neighbours by Euclidean distance over the feature columns.
fn nearest_neighbors(d: &Dataset, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    let feats = d.schema().feature_indices();
    let points: Vec<Vec<f64>> = minority
        .iter()
        .map(|&i| feats.iter().map(|&j| d.value(i, j)).collect())
        .collect();
    points
        .iter()
        .enumerate()
        .map(|(a, pa)| {
            let mut dists: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, pb)| {
                    let d2: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum();
                    (d2, b)
                })
                .collect();
            dists.select_nth_unstable_by(k - 1, |x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let mut nn: Vec<(f64, usize)> = dists[..k].to_vec();
            nn.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            nn.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}
