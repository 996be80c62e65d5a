//! Percentile-bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Percentile bootstrap of the median: returns the sample median plus the
/// `[lower_pct, upper_pct]` percentiles of the bootstrap distribution of
/// the median. Deterministic given the seed.
pub fn bootstrap_median_ci(
    samples: &[f64],
    resamples: usize,
    lower_pct: f64,
    upper_pct: f64,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    bootstrap_stat_ci(samples, median, resamples, lower_pct, upper_pct, seed)
}

/// Percentile bootstrap of an arbitrary statistic.
pub fn bootstrap_stat_ci(
    samples: &[f64],
    stat: impl Fn(&[f64]) -> f64,
    resamples: usize,
    lower_pct: f64,
    upper_pct: f64,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Config("bootstrap needs a non-empty sample".into()));
    }
    if resamples < 100 {
        return Err(Error::Config(format!(
            "bootstrap needs at least 100 resamples, got {resamples}"
        )));
    }
    if !(0.0..=100.0).contains(&lower_pct) || !(0.0..=100.0).contains(&upper_pct) || lower_pct > upper_pct {
        return Err(Error::Config(format!(
            "invalid percentile range [{lower_pct}, {upper_pct}]"
        )));
    }

    let point = stat(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resample = vec![0.0; samples.len()];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in resample.iter_mut() {
            *slot = samples[rng.gen_range(0..samples.len())];
        }
        stats.push(stat(&resample));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let low = percentile_sorted(&stats, lower_pct);
    let high = percentile_sorted(&stats, upper_pct);
    Ok((point, low, high))
}

/// Median with the usual midpoint convention for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Unbiased sample variance (n - 1 normalization).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
}

/// Linear-interpolation percentile of an already sorted slice.
fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = pct / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}
