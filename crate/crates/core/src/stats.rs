//! Sample moments and Kolmogorov-Smirnov statistics used by the verification suites.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSampleStats {
    pub ks_statistic: f64,
    /// `mean(a) - mean(b)`.
    pub mean_diff: f64,
    /// `var(a) / var(b)`; 1 when both variances are zero.
    pub var_ratio: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two points).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample variance of `n` normal draws with variance `var`.
pub fn variance_standard_error(var: f64, n: usize) -> f64 {
    var * (2.0 / (n as f64 - 1.0)).sqrt()
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Argument("sample contains NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Supremum distance between the empirical CDFs of `a` and `b`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("two-sample statistics need nonempty samples".into()));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // step past every copy of the smallest remaining value in both samples
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn two_sample_stats(a: &[f64], b: &[f64]) -> Result<TwoSampleStats> {
    let ks_statistic = ks_two_sample(a, b)?;
    let (va, vb) = (variance(a), variance(b));
    let var_ratio = if va == 0.0 && vb == 0.0 { 1.0 } else { va / vb };
    Ok(TwoSampleStats {
        ks_statistic,
        mean_diff: mean(a) - mean(b),
        var_ratio,
    })
}

/// Asymptotic Kolmogorov quantile `c(alpha) = sqrt(-ln(alpha / 2) / 2)`.
pub fn kolmogorov_quantile(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Rejection threshold of the two-sample KS test at significance `alpha`.
pub fn ks_two_sample_threshold(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    kolmogorov_quantile(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Rejection threshold of the one-sample KS test at significance `alpha`.
pub fn ks_one_sample_threshold(n: usize, alpha: f64) -> f64 {
    kolmogorov_quantile(alpha) / (n as f64).sqrt()
}

/// One-sample KS distance between `xs` and `N(mean, sd^2)`.
pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Argument("KS test needs a nonempty sample".into()));
    }
    let dist = Normal::new(mean, sd).map_err(|e| Error::Argument(format!("normal reference: {e}")))?;
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let c = dist.cdf(x);
        d = d.max((i as f64 + 1.0) / n - c).max(c - i as f64 / n);
    }
    Ok(d)
}
