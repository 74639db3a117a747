//! Gaussian copula: per-column marginals joined by a Gaussian dependence
//! structure estimated on probit-transformed data.
//!
//! Continuous marginals are univariate GMMs. Categorical columns map to
//! contiguous sub-intervals of [0, 1] ordered by descending frequency, with
//! uniform jitter inside the interval.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::data::{Dataset, Schema};
use crate::seed::Rng;
use crate::synth::gmm::{std_normal_cdf, UnivariateGmm};

const U_CLIP: f64 = 1e-10;
const EIGEN_FLOOR: f64 = 1e-8;

fn probit(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u.clamp(U_CLIP, 1.0 - U_CLIP))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Marginal {
    PointMass { value: f64 },
    Gmm(UnivariateGmm),
    /// `[lower[c], upper[c])` is the sub-interval of category `c`.
    Intervals { lower: Vec<f64>, upper: Vec<f64> },
}

impl Marginal {
    fn fit_categorical(values: &[f64], n_categories: usize) -> Self {
        let mut counts = vec![0usize; n_categories];
        for &v in values {
            counts[v as usize] += 1;
        }
        let mut order: Vec<usize> = (0..n_categories).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        let n = values.len() as f64;
        let mut lower = vec![1.0; n_categories];
        let mut upper = vec![1.0; n_categories];
        let mut acc = 0.0;
        for &c in &order {
            lower[c] = acc;
            acc += counts[c] as f64 / n;
            upper[c] = acc;
        }
        // close the last occupied interval exactly at 1
        if let Some(&last) = order.iter().rev().find(|&&c| counts[c] > 0) {
            upper[last] = 1.0;
        }
        Marginal::Intervals { lower, upper }
    }

    fn fit_continuous(values: &[f64], max_components: usize, rng: &mut Rng) -> Self {
        let first = values[0];
        if values.iter().all(|&v| v == first) {
            return Marginal::PointMass { value: first };
        }
        Marginal::Gmm(UnivariateGmm::fit_bic(values, max_components, rng))
    }

    /// Maps a cell to the uniform scale.
    fn to_uniform(&self, v: f64, rng: &mut Rng) -> f64 {
        match self {
            Marginal::PointMass { .. } => 0.5,
            Marginal::Gmm(g) => g.cdf(v),
            Marginal::Intervals { lower, upper } => {
                let c = v as usize;
                lower[c] + rng.random::<f64>() * (upper[c] - lower[c])
            }
        }
    }

    fn from_uniform(&self, u: f64) -> f64 {
        match self {
            Marginal::PointMass { value } => *value,
            Marginal::Gmm(g) => g.quantile(u),
            Marginal::Intervals { lower, upper } => {
                let mut fallback = 0;
                for c in 0..lower.len() {
                    if upper[c] > lower[c] {
                        fallback = c;
                        if u >= lower[c] && u < upper[c] {
                            return c as f64;
                        }
                    }
                }
                fallback as f64
            }
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Marginal::Gmm(g) => g.converged,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub marginals: Vec<Marginal>,
    /// Row-major correlation matrix of the probit scores.
    pub correlation: Vec<f64>,
    chol: Vec<f64>,
}

impl CopulaModel {
    pub fn fit(data: &Dataset, max_components: usize, rng: &mut Rng) -> Self {
        let schema = data.schema();
        let d = schema.n_cols();
        let n = data.n_rows();
        let marginals: Vec<Marginal> = (0..d)
            .map(|j| {
                let col = data.column(j);
                let c = schema.column(j);
                if c.is_categorical() {
                    Marginal::fit_categorical(&col, c.n_categories())
                } else {
                    Marginal::fit_continuous(&col, max_components, rng)
                }
            })
            .collect();

        let mut z = vec![0.0; n * d];
        for (i, row) in data.rows().enumerate() {
            for j in 0..d {
                z[i * d + j] = probit(marginals[j].to_uniform(row[j], rng));
            }
        }
        let correlation = nearest_correlation(&pearson(&z, n, d), d);
        let chol = cholesky(&correlation, d);
        Self {
            marginals,
            correlation,
            chol,
        }
    }

    pub fn converged(&self) -> bool {
        self.marginals.iter().all(Marginal::converged)
    }

    pub fn sample(&self, _schema: &Schema, n: usize, rng: &mut Rng) -> Vec<f64> {
        let d = self.marginals.len();
        let mut out = Vec::with_capacity(n * d);
        let mut eps = vec![0.0; d];
        for _ in 0..n {
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(rng);
            }
            for r in 0..d {
                let z: f64 = (0..=r).map(|c| self.chol[r * d + c] * eps[c]).sum();
                out.push(self.marginals[r].from_uniform(std_normal_cdf(z)));
            }
        }
        out
    }
}

/// Pearson correlation of the columns of a row-major matrix; constant
/// columns get zero correlation with everything else.
fn pearson(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[i * d + j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            let da = x[i * d + a] - mean[a];
            for b in 0..=a {
                cov[a * d + b] += da * (x[i * d + b] - mean[b]);
            }
        }
    }
    let mut corr = vec![0.0; d * d];
    for a in 0..d {
        corr[a * d + a] = 1.0;
        for b in 0..a {
            let denom = (cov[a * d + a] * cov[b * d + b]).sqrt();
            let r = if denom > 0.0 { (cov[a * d + b] / denom).clamp(-1.0, 1.0) } else { 0.0 };
            corr[a * d + b] = r;
            corr[b * d + a] = r;
        }
    }
    corr
}

/// Eigenvalue clipping at `EIGEN_FLOOR` followed by rescaling to unit
/// diagonal. Matrices that are already positive definite pass through.
pub(crate) fn nearest_correlation(corr: &[f64], d: usize) -> Vec<f64> {
    if d == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(d, d, corr);
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|&l| l >= EIGEN_FLOOR) {
        return corr.to_vec();
    }
    let clipped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let mut out = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            let s = (rebuilt[(a, a)] * rebuilt[(b, b)]).sqrt();
            out[a * d + b] = if a == b { 1.0 } else { rebuilt[(a, b)] / s };
        }
    }
    // symmetrise rounding noise
    for a in 0..d {
        for b in 0..a {
            let v = 0.5 * (out[a * d + b] + out[b * d + a]);
            out[a * d + b] = v;
            out[b * d + a] = v;
        }
    }
    out
}

fn cholesky(corr: &[f64], d: usize) -> Vec<f64> {
    let mut jitter = 0.0;
    loop {
        let mut m = DMatrix::from_row_slice(d, d, corr);
        for i in 0..d {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            let l = ch.l();
            let mut out = vec![0.0; d * d];
            for r in 0..d {
                for c in 0..=r {
                    out[r * d + c] = l[(r, c)];
                }
            }
            return out;
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
    }
}
