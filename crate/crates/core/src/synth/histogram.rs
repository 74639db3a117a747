//! Independent per-column histograms conditioned on the label class: the
//! label is drawn from its frequency table, then every other column is drawn
//! independently from that class's histogram (continuous) or frequency
//! table (categorical). Bin edges are equal-width over the training range.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum HistColumn {
    Label,
    Constant { value: f64 },
    /// `masses[class][bin]` over `edges.len() - 1` bins.
    Binned { edges: Vec<f64>, masses: Vec<Vec<f64>> },
    /// `probs[class][category]`.
    Table { probs: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramModel {
    class_prior: [f64; 2],
    columns: Vec<HistColumn>,
}

fn draw(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn normalise(counts: Vec<f64>) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        counts.into_iter().map(|c| c / total).collect()
    } else {
        counts
    }
}

impl HistogramModel {
    pub fn fit(data: &Dataset, bins: usize) -> Self {
        let schema = data.schema();
        let label = schema.label_index();
        let labels = data.labels();
        let counts = data.class_counts();
        let n = data.n_rows() as f64;
        let class_prior = [counts[0] as f64 / n, counts[1] as f64 / n];

        let columns = schema
            .columns()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == label {
                    return HistColumn::Label;
                }
                let col = data.column(j);
                if c.is_categorical() {
                    let mut probs = vec![vec![0.0; c.n_categories()]; 2];
                    for (&v, &y) in col.iter().zip(&labels) {
                        probs[y as usize][v as usize] += 1.0;
                    }
                    return HistColumn::Table {
                        probs: probs.into_iter().map(normalise).collect(),
                    };
                }
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if lo == hi {
                    return HistColumn::Constant { value: lo };
                }
                let width = (hi - lo) / bins as f64;
                let mut edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
                edges[bins] = hi;
                let mut masses = vec![vec![0.0; bins]; 2];
                for (&v, &y) in col.iter().zip(&labels) {
                    let b = (((v - lo) / width) as usize).min(bins - 1);
                    masses[y as usize][b] += 1.0;
                }
                HistColumn::Binned {
                    edges,
                    masses: masses.into_iter().map(normalise).collect(),
                }
            })
            .collect();
        Self { class_prior, columns }
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * self.columns.len());
        for _ in 0..n {
            let y = draw(&self.class_prior, rng);
            for col in &self.columns {
                out.push(match col {
                    HistColumn::Label => y as f64,
                    HistColumn::Constant { value } => *value,
                    HistColumn::Table { probs } => draw(&probs[y], rng) as f64,
                    HistColumn::Binned { edges, masses } => {
                        let b = draw(&masses[y], rng);
                        let (a, z) = (edges[b], edges[b + 1]);
                        a + rng.random::<f64>() * (z - a)
                    }
                });
            }
        }
        out
    }

    /// Per-class bin masses of column `col`, if it is binned.
    pub fn bin_masses(&self, col: usize) -> Option<&[Vec<f64>]> {
        match &self.columns[col] {
            HistColumn::Binned { masses, .. } => Some(masses),
            _ => None,
        }
    }
}
