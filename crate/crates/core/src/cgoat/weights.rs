//! Mixture weights over the synthesizer set, their warm starts, and the
//! closest-integer row allocation used to stack per-method samples.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;
use crate::synth::Generator;

/// A point on the probability simplex, one weight per method in fixed
/// method order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixtureWeights<T = f64> {
    alpha: Vec<T>,
}

fn sum_tolerance<T: Scalar>(len: usize) -> f64 {
    (8.0 * T::epsilon().to_f64_lossy() * len as f64).max(1e-9)
}

impl<T: Scalar> MixtureWeights<T> {
    /// Checks `alpha_m in [0, 1]` and `sum = 1` within rounding.
    pub fn new(alpha: Vec<T>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::config("mixture weights need at least one entry"));
        }
        if alpha.iter().any(|a| !(T::zero()..=T::one()).contains(a)) {
            return Err(Error::config("mixture weights must lie in [0, 1]"));
        }
        let total: f64 = alpha.iter().map(|a| a.to_f64_lossy()).sum();
        if (total - 1.0).abs() > sum_tolerance::<T>(alpha.len()) {
            return Err(Error::config(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { alpha })
    }

    /// Scales raw non-negative draws to sum to one. Negative entries are
    /// treated as zero; an all-zero vector maps to uniform weights.
    pub fn normalize(raw: &[T]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::config("mixture weights need at least one entry"));
        }
        if raw.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("raw mixture weights must be finite"));
        }
        let clipped: Vec<T> = raw.iter().map(|&r| r.max(T::zero())).collect();
        let total = clipped.iter().fold(T::zero(), |acc, &r| acc + r);
        let alpha = if total > T::zero() {
            clipped.into_iter().map(|r| (r / total).min(T::one())).collect()
        } else {
            Self::uniform(raw.len()).alpha
        };
        Ok(Self { alpha })
    }

    pub fn uniform(m: usize) -> Self {
        let w = T::one() / T::from_usize_lossy(m.max(1));
        Self { alpha: vec![w; m] }
    }

    /// Standard basis vector `e_index` of length `m`.
    pub fn corner(m: usize, index: usize) -> Self {
        let mut alpha = vec![T::zero(); m];
        alpha[index] = T::one();
        Self { alpha }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Index of the corner this point sits on, if any.
    pub fn corner_index(&self) -> Option<usize> {
        let ones: Vec<usize> = (0..self.alpha.len()).filter(|&i| self.alpha[i] == T::one()).collect();
        match ones.as_slice() {
            [i] if self.alpha.iter().filter(|&&a| a != T::zero()).count() == 1 => Some(*i),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> MixtureWeights<f64> {
        MixtureWeights {
            alpha: self.alpha.iter().map(|a| a.to_f64_lossy()).collect(),
        }
    }
}

/// The five initial points: the `M` corners followed by the point whose
/// weights are proportional to each method's validation AUC above the worst
/// one. When every AUC is equal the last point is uniform.
pub fn warm_starts<T: Scalar>(auc_val: &[T]) -> Result<Vec<MixtureWeights<T>>> {
    if auc_val.is_empty() {
        return Err(Error::config("warm starts need at least one validation AUC"));
    }
    if let Some(a) = auc_val.iter().find(|a| !(T::zero()..=T::one()).contains(*a)) {
        return Err(Error::config(format!(
            "validation AUC {} outside [0, 1]",
            a.to_f64_lossy()
        )));
    }
    let m = auc_val.len();
    let mut out: Vec<MixtureWeights<T>> = (0..m).map(|i| MixtureWeights::corner(m, i)).collect();
    let floor = auc_val.iter().copied().fold(T::infinity(), T::min);
    let excess: Vec<T> = auc_val.iter().map(|&a| a - floor).collect();
    let total = excess.iter().fold(T::zero(), |acc, &e| acc + e);
    out.push(if total > T::zero() {
        MixtureWeights {
            alpha: excess.into_iter().map(|e| e / total).collect(),
        }
    } else {
        MixtureWeights::uniform(m)
    });
    Ok(out)
}

/// Closest-integer allocation of `n` rows: round-half-to-even of each
/// `alpha_m * n`, then unit corrections until the total is exactly `n`.
/// Shortfalls go to the rounded-down entries with the largest fractional
/// remainders (ties to the lower index); excesses come off the rounded-up
/// entries with the smallest remainders (ties to the higher index).
pub fn allocate_rows<T: Scalar>(alpha: &MixtureWeights<T>, n: usize) -> Vec<usize> {
    let raw: Vec<f64> = alpha.alpha.iter().map(|a| a.to_f64_lossy() * n as f64).collect();
    let frac: Vec<f64> = raw.iter().map(|r| r - r.floor()).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.round_ties_even().max(0.0) as usize).collect();
    let total: usize = counts.iter().sum();

    if total < n {
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| {
            let down_a = (counts[a] as f64) < raw[a];
            let down_b = (counts[b] as f64) < raw[b];
            down_b.cmp(&down_a).then(frac[b].total_cmp(&frac[a])).then(a.cmp(&b))
        });
        for &i in order.iter().cycle().take(n - total) {
            counts[i] += 1;
        }
    } else if total > n {
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| {
            let up_a = counts[a] as f64 > raw[a];
            let up_b = counts[b] as f64 > raw[b];
            up_b.cmp(&up_a).then(frac[a].total_cmp(&frac[b])).then(b.cmp(&a))
        });
        let mut excess = total - n;
        while excess > 0 {
            for &i in &order {
                if excess > 0 && counts[i] > 0 {
                    counts[i] -= 1;
                    excess -= 1;
                }
            }
        }
    }
    counts
}

/// Seed used for method `m`'s block when composing with `seed`.
pub fn block_seed(seed: u64, m: usize) -> u64 {
    seed::derive_seed(seed, &[m as u64])
}

/// Stacks `allocate_rows(alpha, n)` rows from each generator in order.
pub fn compose<T: Scalar>(
    generators: &[Arc<dyn Generator>],
    alpha: &MixtureWeights<T>,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if generators.len() != alpha.len() {
        return Err(Error::Dimension {
            expected: generators.len(),
            got: alpha.len(),
        });
    }
    let schema = generators
        .first()
        .ok_or_else(|| Error::config("no generators to compose"))?
        .schema()
        .clone();
    if let Some(g) = generators.iter().find(|g| **g.schema() != *schema) {
        return Err(Error::schema(format!("{} does not share the mixture schema", g.name())));
    }
    let counts = allocate_rows(alpha, n);
    let parts = generators
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(m, (g, &c))| g.generate(c, block_seed(seed, m)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::concat(schema, &parts)
}
