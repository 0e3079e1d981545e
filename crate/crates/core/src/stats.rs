//! Goodness-of-fit and moment helpers used by the experiment runners.

use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Sample mean and unbiased sample variance (0 for a single value).
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, ss / (n - 1.0))
}

/// Unbiased sample covariance of two equally long samples.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "covariance needs paired samples");
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my))) / (n - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test of `sample` against a continuous `cdf`.
///
/// The statistic is exact: with the order statistics `x_(1) <= … <= x_(N)`,
/// `D = max_i max(i/N - F(x_(i)), F(x_(i)) - (i-1)/N)`. The p-value uses the
/// asymptotic Kolmogorov distribution of `√N · D`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted.iter().enumerate().fold(0.0_f64, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    });
    Ok(KsResult { statistic, p_value: kolmogorov_survival(n.sqrt() * statistic) })
}

/// `P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`, truncated at 100 terms.
///
/// Below `λ = 0.2` the survival probability is 1 to within 1e-12 and the
/// alternating series no longer converges in 100 terms, so 1 is returned.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Half the L1 distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "total variation needs vectors of equal length");
    0.5 * compensated_sum(p.iter().zip(q).map(|(a, b)| (a - b).abs()))
}

/// Mean and standard deviation of the total-variation distance between the
/// empirical frequencies of `draws` multinomial draws and the true law `p`,
/// from the normal approximation of each cell:
/// `E|p̂_j - p_j| ≈ √(2 p_j(1-p_j) / (π N))`,
/// `Var|p̂_j - p_j| ≈ (1 - 2/π) p_j(1-p_j) / N`, cells treated as independent.
pub fn multinomial_tv_noise(p: &[f64], draws: usize) -> (f64, f64) {
    let n = draws as f64;
    let pi = std::f64::consts::PI;
    let mean = 0.5 * p.iter().map(|q| (2.0 * q * (1.0 - q) / (pi * n)).sqrt()).sum::<f64>();
    let var = 0.25 * p.iter().map(|q| (1.0 - 2.0 / pi) * q * (1.0 - q) / n).sum::<f64>();
    (mean, var.sqrt())
}
