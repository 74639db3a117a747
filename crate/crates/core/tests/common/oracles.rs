//! Slow, obviously-correct reference implementations.

/// Fraction of (positive, negative) pairs ranked correctly, ties counted half.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Largest ECDF gap, evaluated at every pooled point.
pub fn ks_brute(x: &[f64], y: &[f64]) -> f64 {
    let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    x.iter()
        .chain(y)
        .map(|&t| (ecdf(x, t) - ecdf(y, t)).abs())
        .fold(0.0, f64::max)
}

fn t_density(x: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let log_norm = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `P(T > t)` by adaptive Simpson integration of the t density over [0, |t|].
pub fn t_sf_quadrature(t: f64, df: f64) -> f64 {
    let f = |x: f64| t_density(x, df);
    let b = t.abs();
    let (fa, fm, fb) = (f(0.0), f(0.5 * b), f(b));
    let mass = adaptive(&f, 0.0, b, fa, fm, fb, simpson(0.0, b, fa, fm, fb), 1e-13, 60);
    if t >= 0.0 {
        0.5 - mass
    } else {
        0.5 + mass
    }
}
