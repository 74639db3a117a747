//! Full-covariance Gaussian mixture over all columns jointly. Continuous
//! columns are standardised; categorical columns are one-hot relaxed and
//! decoded by argmax.
//!
//! One-hot coordinates are dequantised with Gaussian jitter before fitting.
//! Without it every component can shrink to zero variance along a category
//! indicator, and the mixture spends its components enumerating category
//! combinations instead of modelling the continuous shapes.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::Rng;
use crate::synth::gmm::MultivariateGmm;

const ONE_HOT_JITTER: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Slot {
    Continuous { offset: usize, mean: f64, std: f64 },
    Constant { value: f64 },
    OneHot { offset: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    slots: Vec<Slot>,
    gmm: Option<MultivariateGmm>,
}

impl JointModel {
    pub fn fit(data: &Dataset, n_components: usize, ridge: f64, em_iterations: usize, rng: &mut Rng) -> Self {
        let schema = data.schema();
        let n = data.n_rows();
        let mut slots = Vec::with_capacity(schema.n_cols());
        let mut dim = 0;
        for (j, c) in schema.columns().iter().enumerate() {
            let col = data.column(j);
            if c.is_categorical() {
                slots.push(Slot::OneHot { offset: dim, k: c.n_categories() });
                dim += c.n_categories();
            } else {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                if var > 0.0 {
                    slots.push(Slot::Continuous { offset: dim, mean, std: var.sqrt() });
                    dim += 1;
                } else {
                    slots.push(Slot::Constant { value: col[0] });
                }
            }
        }
        if dim == 0 {
            return Self { slots, gmm: None };
        }
        let mut points = vec![0.0; n * dim];
        for (i, row) in data.rows().enumerate() {
            let p = &mut points[i * dim..(i + 1) * dim];
            for (slot, &v) in slots.iter().zip(row) {
                match *slot {
                    Slot::Continuous { offset, mean, std } => p[offset] = (v - mean) / std,
                    Slot::OneHot { offset, k } => {
                        for c in 0..k {
                            let z: f64 = StandardNormal.sample(rng);
                            p[offset + c] = (c == v as usize) as u8 as f64 + ONE_HOT_JITTER * z;
                        }
                    }
                    Slot::Constant { .. } => {}
                }
            }
        }
        let gmm = MultivariateGmm::fit(&points, dim, n_components, ridge, em_iterations, rng);
        Self { slots, gmm: Some(gmm) }
    }

    pub fn converged(&self) -> bool {
        self.gmm.as_ref().is_none_or(|g| g.converged)
    }

    pub fn n_components(&self) -> usize {
        self.gmm.as_ref().map_or(0, MultivariateGmm::n_components)
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        let width = self.slots.len();
        let mut out = Vec::with_capacity(n * width);
        let dim = self.gmm.as_ref().map_or(0, |g| g.dim);
        let mut p = vec![0.0; dim];
        for _ in 0..n {
            if let Some(g) = &self.gmm {
                g.sample_into(rng, &mut p);
            }
            for slot in &self.slots {
                out.push(match *slot {
                    Slot::Continuous { offset, mean, std } => mean + std * p[offset],
                    Slot::Constant { value } => value,
                    Slot::OneHot { offset, k } => {
                        let block = &p[offset..offset + k];
                        let mut best = 0;
                        for c in 1..k {
                            if block[c] > block[best] {
                                best = c;
                            }
                        }
                        best as f64
                    }
                });
            }
        }
        out
    }
}
