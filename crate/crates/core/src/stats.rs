// SPDX-License-Identifier: Apache-2.0

//! Sample moments and resampling standard errors.

use serde::{Deserialize, Serialize};

/// Batches used by the delete-one-batch jackknife.
pub const JACKKNIFE_BATCHES: usize = 100;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of the mean.
pub fn se_mean(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Contiguous batch boundaries splitting `n` items into at most `batches`
/// near-equal groups.
pub fn batch_bounds(n: usize, batches: usize) -> Vec<(usize, usize)> {
    let b = batches.min(n).max(1);
    (0..b).map(|k| (k * n / b, (k + 1) * n / b)).collect()
}

/// Delete-one-batch jackknife standard error of an arbitrary statistic of
/// paired samples. `stat` receives the retained indices' values through the
/// `keep` mask.
pub fn jackknife_se<F>(n: usize, batches: usize, stat: F) -> f64
where
    F: Fn(&dyn Fn(usize) -> bool) -> f64,
{
    let bounds = batch_bounds(n, batches);
    let b = bounds.len();
    if b < 2 {
        return 0.0;
    }
    let leave_out: Vec<f64> = bounds
        .iter()
        .map(|&(lo, hi)| stat(&|i| i < lo || i >= hi))
        .collect();
    let m = mean(&leave_out);
    let ss: f64 = leave_out.iter().map(|v| (v - m) * (v - m)).sum();
    ((b - 1) as f64 / b as f64 * ss).sqrt()
}

/// Jackknife SE of the sample variance of `xs`, computed from batch sums.
pub fn jackknife_variance_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.0;
    }
    let shift = mean(xs);
    let bounds = batch_bounds(n, JACKKNIFE_BATCHES);
    let (s1, s2) = sums(xs, shift);
    let leave_out: Vec<f64> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let (b1, b2) = sums(&xs[lo..hi], shift);
            let k = (n - (hi - lo)) as f64;
            let m1 = (s1 - b1) / k;
            ((s2 - b2) - k * m1 * m1) / (k - 1.0)
        })
        .collect();
    let b = leave_out.len() as f64;
    let m = mean(&leave_out);
    let ss: f64 = leave_out.iter().map(|v| (v - m) * (v - m)).sum();
    ((b - 1.0) / b * ss).sqrt()
}

fn sums(xs: &[f64], shift: f64) -> (f64, f64) {
    xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = x - shift;
        (a + d, b + d * d)
    })
}

/// Mean and variance of a sample with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub reps: usize,
}

impl MomentEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        MomentEstimate {
            mean: mean(xs),
            variance: variance(xs),
            se_mean: se_mean(xs),
            se_variance: jackknife_variance_se(xs),
            reps: xs.len(),
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Binomial standard error `sqrt(p(1-p)/n)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}
