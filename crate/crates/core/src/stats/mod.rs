//! Scalar-generic statistics: rank AUC, two-sample KS and chi-square
//! fidelity tests, and the one-sided paired t-test used in reports.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_ur;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Area under the ROC curve via the Mann-Whitney rank statistic:
/// `P(score_pos > score_neg) + P(tie) / 2`.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::data("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| cmp(&scores[i], &scores[j]));

    // twice the rank sum of positives keeps tied mid-ranks integral
    let mut rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j, midrank * 2 = i + 1 + j
        let mid_x2 = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        rank_sum_x2 += mid_x2 * pos_in_group;
        i = j;
    }
    let p = n_pos as u128;
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Two-sample Kolmogorov-Smirnov statistic: the sup-norm distance between
/// the empirical CDFs, evaluated at every pooled sample point.
pub fn ks_statistic<T: Scalar>(x: &[T], y: &[T]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::data("ks_statistic needs two nonempty samples"));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(cmp);
    ys.sort_by(cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n || j < m {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => {
                if cmp(a, b) == Ordering::Greater {
                    *b
                } else {
                    *a
                }
            }
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        while i < n && cmp(&xs[i], &v) != Ordering::Greater {
            i += 1;
        }
        while j < m && cmp(&ys[j], &v) != Ordering::Greater {
            j += 1;
        }
        d = d.max(ecdf_gap(i, n, j, m));
    }
    Ok(d)
}

#[inline]
pub(crate) fn ecdf_gap(i: usize, n: usize, j: usize, m: usize) -> f64 {
    (i as f64 / n as f64 - j as f64 / m as f64).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Chi-square goodness of fit of the category counts of `observed` against
/// the proportions of `reference`, scaled to `observed`'s size. Categories
/// with zero reference count are pooled into the smallest nonzero bin.
pub fn cs_statistic(reference: &[usize], observed: &[usize], n_categories: usize) -> Result<ChiSquare> {
    if reference.is_empty() || observed.is_empty() {
        return Err(Error::data("cs_statistic needs two nonempty samples"));
    }
    let mut ref_counts = vec![0usize; n_categories];
    let mut obs_counts = vec![0usize; n_categories];
    for &c in reference {
        *ref_counts.get_mut(c).ok_or_else(|| Error::data("category out of range"))? += 1;
    }
    for &c in observed {
        *obs_counts.get_mut(c).ok_or_else(|| Error::data("category out of range"))? += 1;
    }
    chi_square_counts(&ref_counts, &obs_counts)
}

pub fn chi_square_counts(reference: &[usize], observed: &[usize]) -> Result<ChiSquare> {
    let n_ref: usize = reference.iter().sum();
    let n_obs: usize = observed.iter().sum();
    if n_ref == 0 || n_obs == 0 || reference.len() != observed.len() {
        return Err(Error::data("chi-square needs matching nonempty count vectors"));
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut orphan_obs = 0.0;
    for (&r, &o) in reference.iter().zip(observed) {
        if r == 0 {
            orphan_obs += o as f64;
        } else {
            bins.push((r as f64 / n_ref as f64 * n_obs as f64, o as f64));
        }
    }
    if bins.len() < 2 {
        return Err(Error::data("chi-square needs at least two categories with support"));
    }
    if orphan_obs > 0.0 {
        let smallest = bins
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
            .unwrap();
        bins[smallest].1 += orphan_obs;
    }
    let statistic: f64 = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let df = bins.len() - 1;
    Ok(ChiSquare {
        statistic,
        p_value: chi2_sf(statistic, df as f64),
        df,
    })
}

/// Survival function of the chi-square distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(df / 2.0, x / 2.0).clamp(0.0, 1.0)
    }
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    #[serde(with = "crate::serde_float")]
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
    pub mean_diff: f64,
}

/// One-sided paired t-test of `H1: mean(a - b) > 0`.
///
/// Zero spread is handled explicitly: with zero mean difference `t = 0` and
/// `p = 0.5`; otherwise `t` is an infinite sentinel and `p` is 0 or 1.
pub fn paired_t_test<T: Scalar>(a: &[T], b: &[T]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::data("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.to_f64_lossy() - y.to_f64_lossy())
        .collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let df = n - 1;
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sd <= 8.0 * f64::EPSILON * scale || sd == 0.0 {
        let (t, p_value) = if mean == 0.0 || scale == 0.0 {
            (0.0, 0.5)
        } else if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        };
        return Ok(TTest {
            t,
            p_value,
            df,
            mean_diff: mean,
        });
    }
    let t = mean / (sd / nf.sqrt());
    Ok(TTest {
        t,
        p_value: student_t_sf(t, df as f64),
        df,
        mean_diff: mean,
    })
}

/// Label class shares of a dataset, keyed by class index.
pub fn class_share_report(d: &Dataset) -> Result<BTreeMap<u8, f64>> {
    if d.is_empty() {
        return Err(Error::data("class shares of an empty dataset"));
    }
    let [c0, c1] = d.class_counts();
    let n = d.n_rows() as f64;
    Ok(BTreeMap::from([(0, c0 as f64 / n), (1, c1 as f64 / n)]))
}

pub fn mean<T: Scalar>(xs: &[T]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().map(|x| x.to_f64_lossy()).sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 divisor); zero for fewer than two values.
pub fn std_dev<T: Scalar>(xs: &[T]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x.to_f64_lossy() - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.2, 0.3, 0.4], &[0, 1, 0, 1]).unwrap(), 0.75);
        assert_eq!(auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1f32, 0.2, 0.3, 0.4], &[0, 1, 0, 1]).unwrap(), 0.75);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
        assert!(auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 0.5);
        assert_eq!(ks_statistic(&[1.0, 2.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap(), 1.0);
        assert!(ks_statistic::<f64>(&[], &[1.0]).is_err());
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square_counts(&[50, 50], &[70, 30]).unwrap();
        assert!((r.statistic - 16.0).abs() < 1e-12);
        assert_eq!(r.df, 1);
        let same = chi_square_counts(&[20, 30, 50], &[40, 60, 100]).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        assert!(chi_square_counts(&[10], &[10]).is_err());
        assert!(chi_square_counts(&[10, 0], &[5, 5]).is_err());
        let x: Vec<usize> = [0; 50].into_iter().chain([1; 50]).collect();
        let y: Vec<usize> = [0; 70].into_iter().chain([1; 30]).collect();
        assert!((cs_statistic(&x, &y, 2).unwrap().statistic - 16.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reference_category_is_pooled() {
        let r = chi_square_counts(&[50, 40, 0], &[50, 30, 10]).unwrap();
        assert_eq!(r.df, 1);
        assert!(r.statistic.is_finite());
        assert!(r.statistic.abs() < 1e-12);
    }

    #[test]
    fn t_test_examples() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2);
        // closed form for df = 2: p = (1 - t / sqrt(t^2 + 2)) / 2
        let closed = 0.5 * (1.0 - r.t / (r.t * r.t + 2.0).sqrt());
        assert!((r.p_value - closed).abs() < 1e-12);
        assert!((r.p_value - 0.0371).abs() < 1e-4);

        let same = paired_t_test(&[0.7, 0.8], &[0.7, 0.8]).unwrap();
        assert_eq!((same.t, same.p_value), (0.0, 0.5));

        let pos = paired_t_test(&[0.01, 0.01, 0.01], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!((pos.t, pos.p_value), (f64::INFINITY, 0.0));
        let neg = paired_t_test(&[0.0, 0.0, 0.0], &[0.01, 0.01, 0.01]).unwrap();
        assert_eq!((neg.t, neg.p_value), (f64::NEG_INFINITY, 1.0));

        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn t_sf_symmetry() {
        for t in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            for df in [1.0, 2.0, 9.0, 30.0] {
                let s = student_t_sf(t, df) + student_t_sf(-t, df);
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(student_t_sf(0.0, 5.0), 0.5);
    }

    #[test]
    fn chi2_sf_known_values() {
        // P(chi2_1 > 3.841458820694124) = 0.05
        assert!((chi2_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-10);
        // chi2 with 2 df is exponential(1/2)
        assert!((chi2_sf(4.0, 2.0) - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn summary_stats() {
        assert!((mean(&[1.0, 2.0, 3.0]) - 2.0).abs() < 1e-15);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(std_dev(&[4.0]), 0.0);
    }
}
