//! Benchmarks and oracles shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use goatmix::data::{self, ColumnSchema, Dataset, Partition, Schema, SplitFractions};
use goatmix::eval::{self, GbdtConfig};
use goatmix::synth::{self, Generator, HyperParams, Method};
use goatmix::tpe::ParamValue;
use goatmix::{seed, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Emits features from a wide Gaussian and fair-coin labels, independent of
/// each other and of the real data.
pub struct NoiseGenerator {
    pub name: String,
    pub schema: Arc<Schema>,
    pub scale: f64,
}

impl Generator for NoiseGenerator {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn generate(&self, n: usize, s: u64) -> Result<Dataset> {
        let mut rng = seed::rng(s);
        let label = self.schema.label_index();
        let cols = self.schema.n_cols();
        let mut cells = Vec::with_capacity(n * cols);
        for _ in 0..n {
            for j in 0..cols {
                if j == label {
                    cells.push(rng.random_range(0..2) as f64);
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    cells.push(self.scale * z);
                }
            }
        }
        Dataset::new(self.schema.clone(), cells)
    }
}

pub fn continuous_schema(n_features: usize) -> Arc<Schema> {
    let mut cols: Vec<ColumnSchema> = (0..n_features).map(|i| ColumnSchema::continuous(format!("x{i}"))).collect();
    cols.push(ColumnSchema::categorical("y", ["0", "1"]));
    Arc::new(Schema::new(cols, "y").unwrap())
}

/// Four Gaussian features with a nonlinear logistic label.
pub fn signal_data(n: usize, s: u64) -> Dataset {
    let mut rng = seed::rng(s);
    let mut cells = Vec::with_capacity(n * 5);
    for _ in 0..n {
        let x: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let latent = 2.0 * x[0] - 1.5 * x[1] + 1.5 * x[2] * x[3];
        let y = rng.random::<f64>() < 1.0 / (1.0 + (-latent).exp());
        cells.extend(x);
        cells.push(y as u8 as f64);
    }
    Dataset::new(continuous_schema(4), cells).unwrap()
}

pub fn near_copy() -> HyperParams {
    HyperParams::new()
        .with("bandwidth_scale", ParamValue::Real(0.01))
        .with("flip_prob", ParamValue::Real(0.0))
}

/// Validation AUC of each generator on its own, sampled like a corner trial.
pub fn individual_aucs(gens: &[Arc<dyn Generator>], part: &Partition, n: usize, s: u64) -> Vec<f64> {
    gens.iter()
        .enumerate()
        .map(|(m, g)| {
            let d = g.generate(n, seed::derive_seed(s, &[m as u64])).unwrap();
            eval::evaluate(&d, &part.val, &GbdtConfig::default()).unwrap().auc
        })
        .collect()
}

pub struct Benchmark {
    pub part: Partition,
    pub generators: Vec<Arc<dyn Generator>>,
    /// Index of the method that should win, if any.
    pub dominant: usize,
}

/// One near-copy synthesizer (KDE at the smallest bandwidth) among three
/// label-independent noise generators; the near-copy's slot moves with `s`.
pub fn dominance(s: u64) -> Benchmark {
    let d = signal_data(2500, s);
    let part = data::split(&d, SplitFractions::default(), s).unwrap();
    let dominant = (s % 4) as usize;
    let copy = synth::fit(Method::KdePerturb, &part.train, &near_copy(), seed::derive_seed(s, &[1])).unwrap();
    let mut generators: Vec<Arc<dyn Generator>> = Vec::new();
    for m in 0..4 {
        if m == dominant {
            generators.push(Arc::new(copy.clone()));
        } else {
            generators.push(Arc::new(NoiseGenerator {
                name: format!("noise{m}"),
                schema: d.schema_arc().clone(),
                scale: 1.0 + m as f64,
            }));
        }
    }
    Benchmark { part, generators, dominant }
}

/// Rows split by the sign of `x0`: on the left the label follows `x1`, on
/// the right it follows `x2`.
pub fn two_halves_data(n: usize, s: u64) -> Dataset {
    let mut rng = seed::rng(s);
    let mut cells = Vec::with_capacity(n * 4);
    for _ in 0..n {
        let x: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let driver = if x[0] < 0.0 { x[1] } else { x[2] };
        let y = rng.random::<f64>() < 1.0 / (1.0 + (-3.0 * driver).exp());
        cells.extend(x);
        cells.push(y as u8 as f64);
    }
    Dataset::new(continuous_schema(3), cells).unwrap()
}

/// Each half of the training rows is matched by its own synthesizer: a
/// near-copy KDE of the left half and a histogram of the right half.
pub fn two_halves(s: u64) -> Benchmark {
    let d = two_halves_data(3000, s);
    let part = data::split(&d, SplitFractions::default(), s).unwrap();
    let side = |left: bool| {
        let idx: Vec<usize> = (0..part.train.n_rows())
            .filter(|&i| (part.train.value(i, 0) < 0.0) == left)
            .collect();
        part.train.select_rows(&idx)
    };
    let left = synth::fit(Method::KdePerturb, &side(true), &near_copy(), seed::derive_seed(s, &[1])).unwrap();
    let right = synth::fit(Method::Histogram, &side(false), &HyperParams::new(), seed::derive_seed(s, &[2])).unwrap();
    Benchmark {
        part,
        generators: vec![Arc::new(left), Arc::new(right)],
        dominant: 0,
    }
}
