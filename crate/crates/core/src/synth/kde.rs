//! Smoothed bootstrap: resample training rows with replacement, jitter
//! continuous cells with Gaussian noise scaled to the column spread, and
//! redraw non-label categorical cells from their empirical distribution with
//! a small flip probability. Labels are copied from the resampled row.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    n_cols: usize,
    rows: Vec<f64>,
    /// Noise standard deviation per continuous column; `None` for categorical.
    bandwidths: Vec<Option<f64>>,
    /// Empirical category distribution of flippable columns.
    flip_tables: Vec<Option<Vec<f64>>>,
    flip_prob: f64,
}

impl KdeModel {
    pub fn fit(data: &Dataset, bandwidth_scale: f64, flip_prob: f64) -> Self {
        let schema = data.schema();
        let n = data.n_rows() as f64;
        let label = schema.label_index();
        let mut bandwidths = Vec::with_capacity(schema.n_cols());
        let mut flip_tables = Vec::with_capacity(schema.n_cols());
        for (j, c) in schema.columns().iter().enumerate() {
            let col = data.column(j);
            if c.is_categorical() {
                bandwidths.push(None);
                if j == label {
                    flip_tables.push(None);
                } else {
                    let mut probs = vec![0.0; c.n_categories()];
                    for v in col {
                        probs[v as usize] += 1.0 / n;
                    }
                    flip_tables.push(Some(probs));
                }
            } else {
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                bandwidths.push(Some(bandwidth_scale * var.sqrt()));
                flip_tables.push(None);
            }
        }
        Self {
            n_cols: schema.n_cols(),
            rows: data.cells().to_vec(),
            bandwidths,
            flip_tables,
            flip_prob,
        }
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        let n_rows = self.rows.len() / self.n_cols;
        let mut out = Vec::with_capacity(n * self.n_cols);
        for _ in 0..n {
            let i = rng.random_range(0..n_rows);
            let src = &self.rows[i * self.n_cols..(i + 1) * self.n_cols];
            for j in 0..self.n_cols {
                let v = src[j];
                out.push(match (&self.bandwidths[j], &self.flip_tables[j]) {
                    (Some(bw), _) => {
                        let z: f64 = StandardNormal.sample(rng);
                        v + bw * z
                    }
                    (None, Some(table)) if self.flip_prob > 0.0 && rng.random::<f64>() < self.flip_prob => {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut pick = v;
                        for (c, p) in table.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                pick = c as f64;
                                break;
                            }
                        }
                        pick
                    }
                    _ => v,
                });
            }
        }
        out
    }
}
