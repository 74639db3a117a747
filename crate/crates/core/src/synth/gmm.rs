//! Gaussian mixture models fitted by EM with k-means++ initialisation.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::seed::Rng;

pub const EM_TOLERANCE: f64 = 1e-6;
pub const EM_MAX_ITER: usize = 200;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// k-means++ seeding over row-major points of dimension `dim`; returns the
/// indices of the chosen centres.
pub(crate) fn kmeans_pp(points: &[f64], dim: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    let n = points.len() / dim;
    let k = k.min(n);
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut centres = vec![rng.random_range(0..n)];
    let mut best: Vec<f64> = (0..n).map(|i| dist2(row(i), row(centres[0]))).collect();
    while centres.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a centre
            match (0..n).find(|i| !centres.contains(i)) {
                Some(i) => i,
                None => break,
            }
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &b) in best.iter().enumerate() {
                if u < b {
                    pick = i;
                    break;
                }
                u -= b;
            }
            pick
        };
        centres.push(next);
        for i in 0..n {
            best[i] = best[i].min(dist2(row(i), row(next)));
        }
    }
    centres
}

/// One-dimensional Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateGmm {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub converged: bool,
}

impl UnivariateGmm {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// Fits `k` components. `xs` must hold at least two distinct values.
    pub fn fit(xs: &[f64], k: usize, rng: &mut Rng) -> (Self, f64) {
        let n = xs.len();
        let k = k.clamp(1, n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let total_var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let floor = (total_var * 1e-6).max(1e-12);

        let centres = kmeans_pp(xs, 1, k, rng);
        let mut means: Vec<f64> = centres.iter().map(|&i| xs[i]).collect();
        let mut weights = vec![1.0 / k as f64; k];
        let mut variances = vec![total_var.max(floor); k];
        // hard assignment pass for starting variances
        {
            let mut sum = vec![0.0; k];
            let mut sq = vec![0.0; k];
            let mut cnt = vec![0.0; k];
            for &x in xs {
                let c = (0..k)
                    .min_by(|&a, &b| (x - means[a]).abs().total_cmp(&(x - means[b]).abs()))
                    .unwrap();
                cnt[c] += 1.0;
                sum[c] += x;
                sq[c] += x * x;
            }
            for c in 0..k {
                if cnt[c] > 0.0 {
                    weights[c] = cnt[c] / n as f64;
                    means[c] = sum[c] / cnt[c];
                    variances[c] = (sq[c] / cnt[c] - means[c] * means[c]).max(floor);
                    if cnt[c] < 2.0 {
                        variances[c] = (total_var / k as f64).max(floor);
                    }
                }
            }
        }

        let mut resp = vec![0.0; n * k];
        let mut prev_ll = f64::NEG_INFINITY;
        let mut converged = false;
        let mut ll = f64::NEG_INFINITY;
        let mut logp = vec![0.0; k];
        for _ in 0..EM_MAX_ITER {
            ll = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                for c in 0..k {
                    logp[c] = weights[c].max(1e-300).ln() + normal_logpdf(x, means[c], variances[c]);
                }
                let lse = log_sum_exp(&logp);
                ll += lse;
                for c in 0..k {
                    resp[i * k + c] = (logp[c] - lse).exp();
                }
            }
            let mean_ll = ll / n as f64;
            if (mean_ll - prev_ll).abs() < EM_TOLERANCE {
                converged = true;
                break;
            }
            prev_ll = mean_ll;
            for c in 0..k {
                let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
                if nk < 1e-10 {
                    weights[c] = 0.0;
                    continue;
                }
                let mu = (0..n).map(|i| resp[i * k + c] * xs[i]).sum::<f64>() / nk;
                let var = (0..n)
                    .map(|i| resp[i * k + c] * (xs[i] - mu).powi(2))
                    .sum::<f64>()
                    / nk;
                weights[c] = nk / n as f64;
                means[c] = mu;
                variances[c] = var.max(floor);
            }
        }
        // drop components that lost all mass
        let keep: Vec<usize> = (0..k).filter(|&c| weights[c] > 0.0).collect();
        let wsum: f64 = keep.iter().map(|&c| weights[c]).sum();
        let model = Self {
            weights: keep.iter().map(|&c| weights[c] / wsum).collect(),
            means: keep.iter().map(|&c| means[c]).collect(),
            variances: keep.iter().map(|&c| variances[c]).collect(),
            converged,
        };
        (model, ll)
    }

    /// Fits 1..=max_k components and keeps the one with the lowest BIC.
    pub fn fit_bic(xs: &[f64], max_k: usize, rng: &mut Rng) -> Self {
        let n = xs.len() as f64;
        let mut best: Option<(f64, Self)> = None;
        for k in 1..=max_k.max(1) {
            let (model, ll) = Self::fit(xs, k, rng);
            let params = 3.0 * model.n_components() as f64 - 1.0;
            let bic = params * n.ln() - 2.0 * ll;
            if best.as_ref().is_none_or(|(b, _)| bic < *b) {
                best = Some((bic, model));
            }
        }
        best.unwrap().1
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * std_normal_cdf((x - m) / v.sqrt()))
            .sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * normal_logpdf(x, *m, *v).exp())
            .sum()
    }

    /// Inverse CDF by safeguarded Newton iteration on a bracketing interval.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(1e-15, 1.0 - 1e-15);
        let spread = self
            .variances
            .iter()
            .map(|v| v.sqrt())
            .fold(0.0f64, f64::max);
        let mut lo = self.means.iter().copied().fold(f64::INFINITY, f64::min) - 40.0 * spread;
        let mut hi = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 40.0 * spread;
        let mut x = self
            .weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * m)
            .sum::<f64>();
        for _ in 0..100 {
            let f = self.cdf(x) - u;
            if f.abs() < 1e-13 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.pdf(x);
            let newton = x - f / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-12 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }
}

fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean).powi(2) / var)
}

/// Full-covariance Gaussian mixture over `dim`-dimensional rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateGmm {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Lower Cholesky factors of the component covariances, row-major.
    pub chol: Vec<Vec<f64>>,
    pub converged: bool,
}

struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Vec<f64>,
    log_det: f64,
}

impl Component {
    fn log_pdf(&self, x: &[f64], dim: usize, scratch: &mut [f64]) -> f64 {
        // solve L z = x - mean
        let mut quad = 0.0;
        for r in 0..dim {
            let mut s = x[r] - self.mean[r];
            for c in 0..r {
                s -= self.chol[r * dim + c] * scratch[c];
            }
            let z = s / self.chol[r * dim + r];
            scratch[r] = z;
            quad += z * z;
        }
        -0.5 * (dim as f64 * LN_2PI + self.log_det + quad)
    }
}

/// Cholesky of a covariance matrix with `ridge` added to the diagonal;
/// the ridge is grown until the factorisation succeeds.
fn cholesky_with_ridge(cov: &[f64], dim: usize, ridge: f64) -> Vec<f64> {
    let mut extra = ridge.max(1e-12);
    loop {
        let mut m = DMatrix::from_row_slice(dim, dim, cov);
        for i in 0..dim {
            m[(i, i)] += extra;
        }
        if let Some(ch) = m.cholesky() {
            let l = ch.l();
            let mut out = vec![0.0; dim * dim];
            for r in 0..dim {
                for c in 0..=r {
                    out[r * dim + c] = l[(r, c)];
                }
            }
            return out;
        }
        extra *= 10.0;
    }
}

impl MultivariateGmm {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// EM fit on row-major `points`. `ridge` is added to every covariance
    /// diagonal.
    pub fn fit(points: &[f64], dim: usize, k: usize, ridge: f64, max_iter: usize, rng: &mut Rng) -> Self {
        let n = points.len() / dim;
        let k = k.clamp(1, n.max(1));
        let row = |i: usize| &points[i * dim..(i + 1) * dim];

        // initial responsibilities: hard assignment to k-means++ centres
        let centres = kmeans_pp(points, dim, k, rng);
        let mut resp = vec![0.0; n * k];
        for i in 0..n {
            let x = row(i);
            let c = (0..centres.len())
                .min_by(|&a, &b| {
                    let da: f64 = x.iter().zip(row(centres[a])).map(|(p, q)| (p - q) * (p - q)).sum();
                    let db: f64 = x.iter().zip(row(centres[b])).map(|(p, q)| (p - q) * (p - q)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            resp[i * k + c] = 1.0;
        }

        let mut comps = Self::m_step(points, dim, k, &resp, ridge);
        let mut prev_ll = f64::NEG_INFINITY;
        let mut converged = false;
        let mut scratch = vec![0.0; dim];
        let mut logp = vec![0.0; comps.len()];
        for _ in 0..max_iter {
            let kk = comps.len();
            logp.resize(kk, 0.0);
            resp.resize(n * kk, 0.0);
            let mut ll = 0.0;
            for i in 0..n {
                let x = row(i);
                for (c, comp) in comps.iter().enumerate() {
                    logp[c] = comp.log_weight + comp.log_pdf(x, dim, &mut scratch);
                }
                let lse = log_sum_exp(&logp[..kk]);
                ll += lse;
                for c in 0..kk {
                    resp[i * kk + c] = (logp[c] - lse).exp();
                }
            }
            let mean_ll = ll / n as f64;
            if (mean_ll - prev_ll).abs() < EM_TOLERANCE {
                converged = true;
                break;
            }
            prev_ll = mean_ll;
            comps = Self::m_step(points, dim, kk, &resp, ridge);
        }
        let wsum: f64 = comps.iter().map(|c| c.log_weight.exp()).sum();
        Self {
            dim,
            weights: comps.iter().map(|c| c.log_weight.exp() / wsum).collect(),
            means: comps.iter().map(|c| c.mean.clone()).collect(),
            chol: comps.into_iter().map(|c| c.chol).collect(),
            converged,
        }
    }

    fn m_step(points: &[f64], dim: usize, k: usize, resp: &[f64], ridge: f64) -> Vec<Component> {
        let n = points.len() / dim;
        let mut comps = Vec::with_capacity(k);
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk < 1e-8 {
                continue;
            }
            let mut mean = vec![0.0; dim];
            for i in 0..n {
                let r = resp[i * k + c];
                if r == 0.0 {
                    continue;
                }
                for (m, x) in mean.iter_mut().zip(&points[i * dim..(i + 1) * dim]) {
                    *m += r * x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut cov = vec![0.0; dim * dim];
            let mut diff = vec![0.0; dim];
            for i in 0..n {
                let r = resp[i * k + c];
                if r < 1e-12 {
                    continue;
                }
                for (d, (x, m)) in diff.iter_mut().zip(points[i * dim..(i + 1) * dim].iter().zip(&mean)) {
                    *d = x - m;
                }
                for a in 0..dim {
                    let ra = r * diff[a];
                    for b in 0..=a {
                        cov[a * dim + b] += ra * diff[b];
                    }
                }
            }
            for a in 0..dim {
                for b in 0..=a {
                    let v = cov[a * dim + b] / nk;
                    cov[a * dim + b] = v;
                    cov[b * dim + a] = v;
                }
            }
            let chol = cholesky_with_ridge(&cov, dim, ridge);
            let log_det = 2.0 * (0..dim).map(|i| chol[i * dim + i].ln()).sum::<f64>();
            comps.push(Component {
                log_weight: (nk / n as f64).ln(),
                mean,
                chol,
                log_det,
            });
        }
        comps
    }

    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut c = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                c = i;
                break;
            }
        }
        let dim = self.dim;
        let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.chol[c];
        for r in 0..dim {
            let mut v = self.means[c][r];
            for j in 0..=r {
                v += l[r * dim + j] * z[j];
            }
            out[r] = v;
        }
    }
}
