//! Univariate density estimators used by TPE for each search dimension.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::seed::Rng;
use crate::tpe::space::DimKind;

use crate::synth::gmm::std_normal_cdf;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Truncated-Gaussian Parzen mixture over `[lo, hi]`: one kernel per
/// observation plus a broad prior kernel at the interval midpoint. Kernel
/// widths follow the distance to the neighbouring observations.
#[derive(Debug, Clone)]
pub(crate) struct ParzenEstimator {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    log_norm: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl ParzenEstimator {
    pub fn new(observations: &[f64], lo: f64, hi: f64) -> Self {
        let width = hi - lo;
        let prior_mu = 0.5 * (lo + hi);
        let mut mus: Vec<f64> = observations.iter().map(|x| x.clamp(lo, hi)).collect();
        mus.push(prior_mu);
        let mut order: Vec<usize> = (0..mus.len()).collect();
        order.sort_by(|&a, &b| mus[a].total_cmp(&mus[b]).then(a.cmp(&b)));
        let sorted: Vec<f64> = order.iter().map(|&i| mus[i]).collect();
        let prior_pos = order.iter().position(|&i| i == mus.len() - 1).unwrap();

        let n = observations.len();
        let min_sigma = width / (1.0 + n as f64).min(100.0);
        let mut sigmas = Vec::with_capacity(sorted.len());
        for i in 0..sorted.len() {
            if i == prior_pos {
                sigmas.push(width);
                continue;
            }
            let left = if i == 0 { sorted[i] - lo } else { sorted[i] - sorted[i - 1] };
            let right = if i + 1 == sorted.len() { hi - sorted[i] } else { sorted[i + 1] - sorted[i] };
            sigmas.push(left.max(right).clamp(min_sigma, width));
        }
        let log_norm = sorted
            .iter()
            .zip(&sigmas)
            .map(|(&m, &s)| {
                let mass = std_normal_cdf((hi - m) / s) - std_normal_cdf((lo - m) / s);
                mass.max(1e-300).ln()
            })
            .collect();
        Self {
            mus: sorted,
            sigmas,
            log_norm,
            lo,
            hi,
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let k = self.mus.len() as f64;
        let terms: Vec<f64> = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.log_norm)
            .map(|((&m, &s), &z)| {
                let u = (x - m) / s;
                -0.5 * u * u - LN_SQRT_2PI - s.ln() - z
            })
            .collect();
        let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln() - k.ln()
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let c = rng.random_range(0..self.mus.len());
        let (m, s) = (self.mus[c], self.sigmas[c]);
        for _ in 0..64 {
            let z: f64 = StandardNormal.sample(rng);
            let x = m + s * z;
            if x >= self.lo && x <= self.hi {
                return x;
            }
        }
        m.clamp(self.lo, self.hi)
    }
}

/// Add-one smoothed categorical frequencies.
#[derive(Debug, Clone)]
pub(crate) struct CategoricalEstimator {
    probs: Vec<f64>,
}

impl CategoricalEstimator {
    pub fn new(observations: &[f64], n_choices: usize) -> Self {
        let mut counts = vec![1.0; n_choices];
        for &o in observations {
            counts[(o as usize).min(n_choices - 1)] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Self {
            probs: counts.into_iter().map(|c| c / total).collect(),
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        self.probs[(x as usize).min(self.probs.len() - 1)].ln()
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as f64;
            }
        }
        (self.probs.len() - 1) as f64
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Estimator {
    Parzen(ParzenEstimator),
    Categorical(CategoricalEstimator),
}

impl Estimator {
    pub fn build(kind: &DimKind, observations: &[f64]) -> Self {
        match kind {
            DimKind::Categorical { choices } => {
                Estimator::Categorical(CategoricalEstimator::new(observations, choices.len()))
            }
            _ => {
                let (lo, hi) = kind.internal_bounds();
                Estimator::Parzen(ParzenEstimator::new(observations, lo, hi))
            }
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Estimator::Parzen(p) => p.log_pdf(x),
            Estimator::Categorical(c) => c.log_pdf(x),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Estimator::Parzen(p) => p.sample(rng),
            Estimator::Categorical(c) => c.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn parzen_density_integrates_to_one() {
        let p = ParzenEstimator::new(&[0.2, 0.25, 0.9], 0.0, 1.0);
        let n = 20_000;
        let h = 1.0 / n as f64;
        let integral: f64 = (0..n).map(|i| p.log_pdf((i as f64 + 0.5) * h).exp() * h).sum();
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn parzen_samples_stay_in_bounds() {
        let p = ParzenEstimator::new(&[0.0, 10.0], 0.0, 10.0);
        let mut rng = seed::rng(3);
        for _ in 0..1000 {
            let x = p.sample(&mut rng);
            assert!((0.0..=10.0).contains(&x));
        }
    }

    #[test]
    fn categorical_add_one() {
        let c = CategoricalEstimator::new(&[0.0, 0.0, 0.0], 3);
        assert!((c.log_pdf(0.0).exp() - 4.0 / 6.0).abs() < 1e-12);
        assert!((c.log_pdf(2.0).exp() - 1.0 / 6.0).abs() < 1e-12);
    }
}
